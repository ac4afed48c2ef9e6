// Acceptance suite: one PASS/FAIL line per criterion. Exit status 1 if a criterion fails that
// is not listed with --known-failures.
#include <CLI11.hpp>
#include <sys/wait.h>

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "objslam/bench.hpp"
#include "objslam/config.hpp"
#include "objslam/io.hpp"
#include "objslam/jacobian_check.hpp"
#include "objslam/metrics.hpp"
#include "objslam/pipeline.hpp"
#include "objslam/render.hpp"
#include "objslam/residuals.hpp"
#include "objslam/simkit.hpp"
#include "objslam/solver.hpp"

using namespace objslam;

namespace {

const fs::path kConfigs = fs::path(OBJSLAM_SOURCE_DIR) / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string fingerprint;  // every number the criterion depends on, for the determinism check
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OBJSLAM_CLI_PATH) + " " + args + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct SingleView {
  SceneSpec scene;
  Detection det;
  PoseSim3d gt;  // T_co
};

SingleView single_view(Config c, std::uint64_t seed) {
  c.single.seed = seed;
  SingleView v;
  v.scene = c.make_scene();
  v.det = make_frames(v.scene).at(0).detections.at(0);
  v.gt = v.scene.trajectory[0].inverse().sim3() * v.scene.objects[0].T_wo;
  return v;
}

Outcome jacobian_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<JacobianReport> reports = check_jacobians(100, 1);
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = t < 30.0 && !reports.empty();
  double worst = 0.0;
  for (const JacobianReport& r : reports) {
    o.pass = o.pass && r.pass() && r.configs >= 100;
    worst = std::max(worst, r.max_error / r.tolerance);
    if (!r.pass()) o.detail += r.family + " " + fmt("%.2e ", r.max_error);
  }
  o.detail += std::to_string(reports.size()) + " families, worst err/tol " + fmt("%.2e", worst) +
              fmt(", %.2f s", t);
  return o;
}

Outcome renderer_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd occ(1 + i % 128);
    for (Eigen::Index k = 0; k < occ.size(); ++k) occ(k) = u(rng);
    sum_err = std::max(sum_err, std::abs(event_probabilities(occ).sum() - 1.0));
  }

  const Camera cam = Camera::from_intrinsics(500, 500, 320, 240, 640, 480);
  const double radius = 1.2;
  const DecoderSpec spec = DecoderSpec::superellipsoid(Eigen::Vector3d::Constant(radius), 2.0);
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  const PoseSim3d T_co(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 8.0), 1.0);
  const DepthRange range = depth_range(T_co, spec);

  const RayBundle empty = trace_ray(cam, Eigen::Vector2d(5, 5), T_co.inverse(), z, spec, 32);
  const bool escape_ok = empty.rendered_depth() == empty.d_escape;

  double worst = 0.0;  // error / spacing
  int rays = 0;
  std::uniform_real_distribution<double> off(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d px(320 + off(rng), 240 + off(rng));
    const Eigen::Vector3d dir = cam.ray(px);
    const Eigen::Vector3d c = T_co.translation();
    const double a = dir.squaredNorm();
    const double b = -2.0 * dir.dot(c);
    const double disc = b * b - 4 * a * (c.squaredNorm() - radius * radius);
    if (disc <= 0) continue;
    const double hit = (-b - std::sqrt(disc)) / (2 * a);
    ++rays;
    for (int M : {32, 64, 128}) {
      const RayBundle rb = trace_ray(cam, px, T_co.inverse(), z, spec, M);
      worst = std::max(worst, std::abs(rb.rendered_depth() - hit) / range.spacing(M));
    }
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = sum_err <= 1e-12 && escape_ok && rays > 0 && worst <= 1.0 && t < 10.0;
  o.detail = fmt("max |sum phi - 1| %.1e", sum_err) + (escape_ok ? ", escape exact" : ", escape WRONG") +
             ", " + std::to_string(rays) + " hit rays max err " + fmt("%.3f spacing", worst) +
             fmt(", %.2f s", t);
  return o;
}

Outcome sparse_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const Camera cam = Camera::from_intrinsics(500, 500, 320, 240, 640, 480);
  const DecoderSpec spec = car_spec();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.3);
  std::uniform_real_distribution<double> u(-80, 80);
  int identical = 0, band = 0, fewer = 0;
  long sparse_calls = 0, dense_calls = 0;
  for (int i = 0; i < 1000; ++i) {
    ShapeCode z(spec.code_dim());
    for (int k = 0; k < z.size(); ++k) z(k) = n(rng);
    TwistSim3d xi;
    xi.phi = Eigen::Vector3d(n(rng), n(rng), n(rng));
    xi.sigma = 0.3 * n(rng);
    const PoseSim3d R = exp_sim3(xi);
    const PoseSim3d T_co(R.rotation(), Eigen::Vector3d(n(rng), n(rng), 8.0 + n(rng)), R.scale());
    const DecodedShape shape = decode_shape(z, spec);
    const DepthRange range = depth_range(T_co, spec);
    const Eigen::Vector2d px(320 + u(rng), 240 + u(rng));
    const std::optional<double> obs = i % 2 ? std::optional<double>(8.0) : std::nullopt;
    const RenderTerm s = render_term(px, obs, T_co.inverse(), shape, range, cam, kDefaultRaySamples,
                                     kDefaultOccupancySigma, true, JacobianAssembly::kSparse);
    const RenderTerm d = render_term(px, obs, T_co.inverse(), shape, range, cam, kDefaultRaySamples,
                                     kDefaultOccupancySigma, true, JacobianAssembly::kDense);
    identical += s.r == d.r && s.J == d.J;
    sparse_calls += s.gradient_calls;
    dense_calls += d.gradient_calls;
    if (s.touches_band) {
      ++band;
      fewer += s.gradient_calls < d.gradient_calls;
    }
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = identical == 1000 && band > 0 && fewer == band && t < 20.0;
  o.detail = std::to_string(identical) + "/1000 identical, " + std::to_string(fewer) + "/" +
             std::to_string(band) + " band rays cheaper, calls " + std::to_string(sparse_calls) +
             " vs " + std::to_string(dense_calls) + fmt(", %.2f s", t);
  return o;
}

Outcome partial_observation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Config c = load_config(kConfigs / "partial.toml");
  const SingleView v = single_view(c, c.single.seed);
  const DecoderSpec& spec = v.scene.objects[0].spec;
  FitConfig no_render = c.slam.fit;
  no_render.lambda_render = 0.0;
  const FitResult a = fit_object(v.det, v.scene.camera, spec, no_render);
  const FitResult b = fit_object(v.det, v.scene.camera, spec, c.slam.fit);
  const PoseError ea = pose_error(a.pose, v.gt);
  const PoseError eb = pose_error(b.pose, v.gt);
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = a.ok && b.ok && ea.scale >= 0.20 && eb.scale <= 0.05 && eb.rotation_deg <= 2.0 && t < 60.0;
  o.detail = fmt("lambda_r=0: scale err %.1f%%", 100 * ea.scale) +
             fmt("; full weights: scale err %.1f%%", 100 * eb.scale) +
             fmt(", rot %.2f deg", eb.rotation_deg) + fmt(", %.2f s", t);
  for (const FitResult* r : {&a, &b}) {
    for (double e : r->energy_trace) o.fingerprint += format_double(e) + " ";
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) o.fingerprint += format_double(r->pose.matrix()(i, j)) + " ";
  }
  return o;
}

Outcome point_count() {
  const auto t0 = std::chrono::steady_clock::now();
  const Config c = load_config(kConfigs / "reference.toml");
  std::vector<double> ch10, ch50, ch250;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SingleView v = single_view(c, seed);
    const SceneObject& gt = v.scene.objects[0];
    for (int n : {10, 50, 250}) {
      Detection d = v.det;
      d.surface.resize(std::min<std::size_t>(n, d.surface.size()));
      const FitResult r = fit_object(d, v.scene.camera, gt.spec, c.slam.fit);
      // A failed fit counts as the initial guess.
      const PoseSim3d T = r.ok ? r.pose : d.init_pose;
      const ShapeCode z = r.ok ? r.z : ShapeCode::Zero(gt.spec.code_dim());
      const double ch = shape_error(z, T, gt.z, v.gt, gt.spec, c.mesh_resolution);
      (n == 10 ? ch10 : n == 50 ? ch50 : ch250).push_back(ch);
    }
  }
  const double m10 = median(ch10), m50 = median(ch50), m250 = median(ch250);
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = m50 <= 1.5 * m250 && m10 > m50 && t < 300.0;
  o.detail = fmt("median chamfer 10/50/250 pts: %.4f", m10) + fmt(" / %.4f", m50) +
             fmt(" / %.4f m", m250) + fmt(" (50/250 ratio %.2f)", m50 / m250) + fmt(", %.2f s", t);
  for (const auto* v : {&ch10, &ch50, &ch250})
    for (double x : *v) o.fingerprint += format_double(x) + " ";
  return o;
}

Outcome convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const Config c = load_config(kConfigs / "reference.toml");
  const SingleView cal = single_view(c, 1000);
  const SingleView v = single_view(c, c.single.seed);
  const DecoderSpec& spec = v.scene.objects[0].spec;
  const double step = tune_first_order_step(cal.det, cal.scene.camera, spec, c.slam.fit);
  const BenchResult b = run_bench(v.det, v.scene.camera, spec, c.slam.fit, step);
  const int gn = b.gauss_newton.iterations_to_target;
  const int fo = b.first_order.iterations_to_target;
  // Not reaching the target within the budget counts as needing more than the budget.
  const int fo_needed = fo < 0 ? b.first_order.budget + 1 : fo;
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = gn >= 1 && gn <= 10 && fo_needed >= 3 * gn && t < 120.0;
  o.detail = "GN " + std::to_string(gn) + " iters (" +
             fmt("%.1f ms/iter", 1e3 * b.gauss_newton.seconds_per_iteration) + "), first-order " +
             (fo < 0 ? ">" + std::to_string(b.first_order.budget) : std::to_string(fo)) +
             fmt(" iters at step %.3g", step) + fmt(", %.2f s", t);
  o.fingerprint = format_double(step) + " " + format_double(b.target) + " ";
  for (const BenchRow* r : {&b.gauss_newton, &b.first_order})
    for (double e : r->energy_trace) o.fingerprint += format_double(e) + " ";
  return o;
}

Outcome ba_improvement() {
  const auto t0 = std::chrono::steady_clock::now();
  Config c = load_config(kConfigs / "loop.toml");
  std::vector<double> odo, with, without;
  Outcome o;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    c.single.seed = seed;
    const SceneSpec s = c.make_scene();
    const FrameLog log{s.trajectory[0], make_frames(s)};
    SlamConfig sc = c.slam;
    sc.object_edges = true;
    const SlamResult a = run_slam(log, s.camera, s.objects[0].spec, sc);
    sc.object_edges = false;
    const SlamResult b = run_slam(log, s.camera, s.objects[0].spec, sc);
    odo.push_back(absolute_trajectory_error(a.odometry_trajectory, s.trajectory));
    with.push_back(absolute_trajectory_error(a.trajectory, s.trajectory));
    without.push_back(absolute_trajectory_error(b.trajectory, s.trajectory));
    o.fingerprint += format_double(with.back()) + " " + format_double(without.back()) + " ";
  }
  const double mo = median(odo), mw = median(with), mn = median(without);
  const double t = seconds_since(t0);
  o.pass = mw <= 0.7 * mo && mw < mn && t < 300.0;
  o.detail = fmt("median ATE odometry %.4f", mo) + fmt(", with objects %.4f", mw) +
             fmt(" (ratio %.3f)", mw / mo) + fmt(", without co edges %.4f m", mn) + fmt(", %.2f s", t);
  return o;
}

Outcome zero_noise_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / "objslam_acceptance_zero_noise";
  fs::remove_all(dir);
  Outcome o;
  const int sim = run_cli("simulate " + (kConfigs / "zero_noise.toml").string() + " " + dir.string());
  const int slam = sim == 0 ? run_cli("slam " + dir.string()) : -1;
  if (sim != 0 || slam != 0) {
    o.detail = "simulate exit " + std::to_string(sim) + ", slam exit " + std::to_string(slam);
    return o;
  }
  const SceneSpec scene = read_scene(dir / "scene.txt");
  const auto metrics = read_csv(dir / "metrics.csv");
  const double ate = std::stod(metrics.at(0).at(2));
  double worst_t = 0.0, worst_r = 0.0, worst_s = 0.0;
  std::vector<bool> found(scene.objects.size(), false);
  for (const auto& row : read_csv(dir / "objects.csv")) {
    const int gt = std::stoi(row.at(1));
    if (gt < 0 || gt >= static_cast<int>(found.size()) || row.at(2).empty()) continue;
    found[gt] = true;
    worst_t = std::max(worst_t, std::stod(row.at(2)));
    worst_r = std::max(worst_r, std::stod(row.at(3)) * std::numbers::pi / 180.0);
    worst_s = std::max(worst_s, std::stod(row.at(4)));
  }
  const bool all_found = std::all_of(found.begin(), found.end(), [](bool b) { return b; });
  const double t = seconds_since(t0);
  o.pass = all_found && worst_t <= 1e-6 && worst_r <= 1e-6 && worst_s <= 1e-6 && ate <= 1e-9 &&
           t < 120.0;
  o.detail = std::string(all_found ? "all objects found" : "objects MISSING") +
             fmt(", worst object err t %.2e m", worst_t) + fmt(" r %.2e rad", worst_r) +
             fmt(" s %.2e", worst_s) + fmt(", ATE %.2e m", ate) + fmt(", %.2f s", t);
  for (const char* f : {"trajectory.txt", "graph.txt", "objects.csv", "metrics.csv"})
    o.fingerprint += read_text(dir / f);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> known;
  app.add_option("--known-failures", known, "criteria whose failure does not fail the run")
      ->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  std::vector<int> failed;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("criterion %d %-28s %s  %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) failed.push_back(id);
  };

  const auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Outcome o;
      o.detail = std::string("exception: ") + e.what();
      return o;
    }
  };

  report(1, "jacobian-suite", guarded(jacobian_suite));
  report(2, "renderer-identities", guarded(renderer_identities));
  report(3, "sparse-jacobian", guarded(sparse_equivalence));

  const std::vector<std::pair<const char*, std::function<Outcome()>>> seeded{
      {"partial-observation", partial_observation},
      {"point-count", point_count},
      {"convergence", convergence},
      {"ba-improvement", ba_improvement},
      {"zero-noise-end-to-end", zero_noise_end_to_end},
  };
  std::vector<std::string> first;
  for (std::size_t i = 0; i < seeded.size(); ++i) {
    const Outcome o = guarded(seeded[i].second);
    first.push_back(o.fingerprint);
    report(static_cast<int>(i) + 4, seeded[i].first, o);
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::string mismatched;
  for (std::size_t i = 0; i < seeded.size(); ++i) {
    const Outcome o = guarded(seeded[i].second);
    if (o.fingerprint.empty() || o.fingerprint != first[i]) mismatched += " " + std::to_string(i + 4);
  }
  Outcome det;
  det.pass = mismatched.empty();
  det.detail = (det.pass ? std::string("criteria 4-8 rerun bit-identical")
                         : "rerun differs or empty for criteria" + mismatched) +
               fmt(", %.2f s", seconds_since(t0));
  report(9, "determinism", det);

  int unexpected = 0;
  for (int id : failed) unexpected += std::find(known.begin(), known.end(), id) == known.end();
  std::printf("%zu of 9 criteria failed, %d not listed as known\n", failed.size(), unexpected);
  return unexpected == 0 ? 0 : 1;
}
