#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "objslam/bench.hpp"
#include "objslam/config.hpp"
#include "objslam/error.hpp"
#include "objslam/io.hpp"
#include "objslam/jacobian_check.hpp"
#include "objslam/metrics.hpp"
#include "objslam/pipeline.hpp"
#include "objslam/simkit.hpp"

using namespace objslam;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitNumerical = 3;

std::string num(double v) { return format_double(v); }

struct Workspace {
  Config config;
  SceneSpec scene;
  FrameLog log;
};

Config config_for(const fs::path& dir, const std::string& override_path) {
  return load_config(override_path.empty() ? dir / "config.toml" : fs::path(override_path));
}

Workspace load_workspace(const fs::path& dir, const std::string& config_path) {
  return {config_for(dir, config_path), read_scene(dir / "scene.txt"), read_frames(dir / "frames.txt")};
}

int cmd_simulate(const std::string& config_path, const fs::path& out) {
  const Config config = load_config(config_path);
  const SceneSpec scene = config.make_scene();
  fs::create_directories(out);
  const std::vector<FrameObservation> frames = make_frames(scene);
  write_scene(out / "scene.txt", scene);
  write_frames(out / "frames.txt", {scene.trajectory.front(), frames});
  std::ofstream(out / "config.toml") << format_config(config);
  write_trajectory(out / "trajectory_gt.txt", scene.trajectory);
  int detections = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t d = 0; d < frames[i].detections.size(); ++d, ++detections) {
      std::vector<Eigen::Vector3d> cloud;
      for (const auto& s : frames[i].detections[d].surface) {
        cloud.push_back(scene.trajectory[i] * (scene.camera.ray(s.pixel) * s.depth));
      }
      write_ply(out / ("points_" + std::to_string(i) + "_" + std::to_string(d) + ".ply"), cloud);
    }
  }
  std::printf("simulate: %zu frames, %zu objects, %d detections -> %s\n", frames.size(),
              scene.objects.size(), detections, out.string().c_str());
  return 0;
}

int cmd_fit(const fs::path& dir, int object, int points, int frame, const std::string& config_path) {
  const Workspace ws = load_workspace(dir, config_path);
  if (object < 0 || object >= static_cast<int>(ws.scene.objects.size())) {
    throw ParameterError("fit: no object " + std::to_string(object));
  }
  const Detection* det = nullptr;
  int frame_index = -1;
  for (std::size_t i = 0; i < ws.log.frames.size() && !det; ++i) {
    if (frame >= 0 && static_cast<int>(i) != frame) continue;
    const auto& f = ws.log.frames[i];
    for (std::size_t d = 0; d < f.detections.size(); ++d) {
      if (f.gt_associations[d] == object) {
        det = &f.detections[d];
        frame_index = static_cast<int>(i);
        break;
      }
    }
  }
  if (!det) throw ParameterError("fit: object " + std::to_string(object) + " is never detected");
  Detection subset = *det;
  if (points < static_cast<int>(subset.surface.size())) subset.surface.resize(points);

  const SceneObject& gt = ws.scene.objects[object];
  const FitResult r = fit_object(subset, ws.scene.camera, gt.spec, ws.config.slam.fit);
  if (!r.ok) {
    std::fprintf(stderr, "fit: %s\n", r.diagnostic.c_str());
    return kExitNumerical;
  }
  const PoseSim3d T_co_gt = ws.scene.trajectory[frame_index].inverse().sim3() * gt.T_wo;
  const PoseError e = pose_error(r.pose, T_co_gt);
  const double chamfer =
      shape_error(r.z, r.pose, gt.z, T_co_gt, gt.spec, ws.config.mesh_resolution);
  const std::string stem = "fit_" + std::to_string(object) + "_" + std::to_string(points);
  CsvWriter csv(dir / (stem + ".csv"),
                {"object", "frame", "points", "iterations", "energy_initial", "energy_final",
                 "translation_error", "rotation_error_deg", "scale_error", "chamfer", "converged"});
  csv.row({std::to_string(object), std::to_string(frame_index),
           std::to_string(subset.surface.size()), std::to_string(r.iterations),
           num(r.energy_trace.front()), num(r.energy_trace.back()), num(e.translation),
           num(e.rotation_deg), num(e.scale), num(chamfer), r.converged ? "1" : "0"});
  write_obj(dir / (stem + ".obj"),
            transform_mesh(decode_mesh(r.z, gt.spec, ws.config.mesh_resolution), r.pose));
  std::printf("fit: object %d, %zu points, %d iterations, energy %.6g -> %.6g, "
              "t %.4g m, r %.4g deg, s %.4g, chamfer %.4g\n",
              object, subset.surface.size(), r.iterations, r.energy_trace.front(),
              r.energy_trace.back(), e.translation, e.rotation_deg, e.scale, chamfer);
  return 0;
}

int cmd_slam(const fs::path& dir, const std::string& config_path) {
  const Workspace ws = load_workspace(dir, config_path);
  if (ws.scene.objects.empty()) throw ParameterError("slam: scene has no objects");
  const SlamResult r = run_slam(ws.log, ws.scene.camera, ws.scene.objects.front().spec, ws.config.slam);
  for (const auto& d : r.diagnostics) std::fprintf(stderr, "slam: %s\n", d.c_str());

  write_trajectory(dir / "trajectory.txt", r.trajectory);
  write_trajectory(dir / "trajectory_odometry.txt", r.odometry_trajectory);
  write_graph(dir / "graph.txt", r.graph);
  const double ate = absolute_trajectory_error(r.trajectory, ws.scene.trajectory);
  const double ate_odo = absolute_trajectory_error(r.odometry_trajectory, ws.scene.trajectory);
  RelativePoseError rpe;
  if (r.trajectory.size() >= 2) rpe = relative_pose_error(r.trajectory, ws.scene.trajectory);

  CsvWriter objects(dir / "objects.csv", {"object", "gt_object", "translation_error",
                                          "rotation_error_deg", "scale_error", "chamfer"});
  for (const auto& [id, node] : r.graph.objects) {
    const int gt = r.object_source.at(id);
    const TriangleMesh mesh =
        transform_mesh(decode_mesh(node.z, node.spec, ws.config.mesh_resolution), node.sim3());
    write_obj(dir / ("object_" + std::to_string(id) + ".obj"), mesh);
    if (gt < 0 || gt >= static_cast<int>(ws.scene.objects.size())) {
      objects.row({std::to_string(id), std::to_string(gt), "", "", "", ""});
      continue;
    }
    const SceneObject& o = ws.scene.objects[gt];
    const PoseError e = pose_error(node.sim3(), o.T_wo);
    const double chamfer = shape_error(node.z, node.sim3(), o.z, o.T_wo, o.spec, ws.config.mesh_resolution);
    objects.row({std::to_string(id), std::to_string(gt), num(e.translation), num(e.rotation_deg),
                 num(e.scale), num(chamfer)});
  }
  CsvWriter metrics(dir / "metrics.csv",
                    {"frames", "objects", "ate", "ate_odometry", "rpe_translation",
                     "rpe_rotation_deg", "associated", "associated_correct", "created", "dropped"});
  metrics.row({std::to_string(r.trajectory.size()), std::to_string(r.graph.objects.size()), num(ate),
               num(ate_odo), num(rpe.translation), num(rpe.rotation_deg),
               std::to_string(r.stats.associated), std::to_string(r.stats.correct),
               std::to_string(r.stats.created), std::to_string(r.stats.dropped)});
  std::printf("slam: %zu frames, %zu objects, ATE %.6g m (odometry %.6g m), associations %d/%d\n",
              r.trajectory.size(), r.graph.objects.size(), ate, ate_odo, r.stats.correct,
              r.stats.associated);
  return r.ok ? 0 : kExitNumerical;
}

struct ShapeArgs {
  std::vector<double> translation{0.0, 0.0, 8.0};
  std::vector<double> rotation{0.0, 0.0, 0.0};  // axis-angle, radians
  double scale = 2.25;
  std::vector<double> code;

  PoseSim3d pose() const {
    return PoseSim3d(exp_so3<double>(Eigen::Vector3d(rotation[0], rotation[1], rotation[2])),
                     Eigen::Vector3d(translation[0], translation[1], translation[2]), scale);
  }
  ShapeCode z(const DecoderSpec& spec) const {
    if (code.empty()) return ShapeCode::Zero(spec.code_dim());
    if (static_cast<int>(code.size()) != spec.code_dim()) {
      throw ParameterError("--code needs " + std::to_string(spec.code_dim()) + " values");
    }
    return Eigen::Map<const Eigen::VectorXd>(code.data(), code.size());
  }
};

void add_shape_options(CLI::App* app, ShapeArgs& a) {
  app->add_option("--translation", a.translation, "T_co translation")->expected(3);
  app->add_option("--rotation", a.rotation, "T_co rotation, axis-angle")->expected(3);
  app->add_option("--scale", a.scale, "object scale");
  app->add_option("--code", a.code, "shape code (default zeros)");
}

int cmd_render(const ShapeArgs& a, int samples, double sigma, const fs::path& out) {
  const DecoderSpec spec = car_spec();
  const Camera camera = Camera::from_intrinsics(250.0, 250.0, 160.0, 120.0, 320, 240);
  const DepthImage image = render_depth_image(camera, a.pose(), a.z(spec), spec, samples, sigma);
  write_depth(out, image);
  std::printf("render: %dx%d depth map -> %s\n", image.width, image.height, out.string().c_str());
  return 0;
}

int cmd_mesh(const ShapeArgs& a, int resolution, bool object_frame, const fs::path& out) {
  const DecoderSpec spec = car_spec();
  TriangleMesh mesh = decode_mesh(a.z(spec), spec, resolution);
  if (!object_frame) mesh = transform_mesh(mesh, a.pose());
  write_obj(out, mesh);
  std::printf("mesh: %zu vertices, %zu faces -> %s\n", mesh.vertices.size(), mesh.faces.size(),
              out.string().c_str());
  return 0;
}

int cmd_bench(const fs::path& dir, std::uint64_t calibration_seed, const std::string& config_path) {
  const Workspace ws = load_workspace(dir, config_path);
  const FitConfig& cfg = ws.config.slam.fit;
  if (ws.log.frames.empty() || ws.log.frames.front().detections.empty()) {
    throw ParameterError("bench: first frame has no detection");
  }
  Config calibration = ws.config;
  calibration.single.seed = calibration_seed;
  const SceneSpec cal_scene = calibration.make_scene();
  const std::vector<FrameObservation> cal_frames = make_frames(cal_scene);
  if (cal_frames.front().detections.empty()) throw ParameterError("bench: calibration scene has no detection");
  const DecoderSpec& spec = ws.scene.objects.front().spec;
  const double step = tune_first_order_step(cal_frames.front().detections.front(), cal_scene.camera,
                                            spec, cfg);
  const BenchResult b = run_bench(ws.log.frames.front().detections.front(), ws.scene.camera, spec, cfg, step);
  CsvWriter csv(dir / "bench.csv", {"method", "iterations_to_target", "budget", "energy_initial",
                                    "energy_final", "target", "seconds_per_iteration", "step"});
  for (const BenchRow* row : {&b.gauss_newton, &b.first_order}) {
    csv.row({row->method, std::to_string(row->iterations_to_target), std::to_string(row->budget),
             num(row->initial_energy), num(row->final_energy), num(b.target),
             num(row->seconds_per_iteration), row == &b.first_order ? num(step) : ""});
  }
  std::printf("%-14s %10s %8s %14s %14s %12s\n", "method", "iters", "budget", "E_initial",
              "E_final", "ms/iter");
  for (const BenchRow* row : {&b.gauss_newton, &b.first_order}) {
    const std::string iters =
        row->iterations_to_target < 0 ? ">" + std::to_string(row->budget)
                                      : std::to_string(row->iterations_to_target);
    std::printf("%-14s %10s %8d %14.6g %14.6g %12.4g\n", row->method.c_str(), iters.c_str(),
                row->budget, row->initial_energy, row->final_energy,
                1e3 * row->seconds_per_iteration);
  }
  std::printf("target energy %.6g, first-order step %.6g\n", b.target, step);
  return 0;
}

int cmd_check_jacobians(int configs, std::uint64_t seed) {
  bool ok = true;
  for (const JacobianReport& r : check_jacobians(configs, seed)) {
    std::printf("%-20s configs %4d skipped %3d max_rel_err %.3e tol %.0e %s\n", r.family.c_str(),
                r.configs, r.skipped, r.max_error, r.tolerance, r.pass() ? "PASS" : "FAIL");
    ok = ok && r.pass();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object pose and shape estimation with shape priors"};
  app.require_subcommand(1);

  std::string config_path, config_override;
  std::string dir;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scene and its observations");
  simulate->add_option("config", config_path, "experiment configuration")->required()->check(CLI::ExistingFile);
  simulate->add_option("out", dir, "output directory")->required();

  int object = 0, points = 250, frame = -1;
  auto* fit = app.add_subcommand("fit", "fit one object from a simulated directory");
  fit->add_option("dir", dir, "simulated directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--object", object, "ground-truth object index");
  fit->add_option("--points", points, "surface points used (prefix of the sampled set)")
      ->check(CLI::PositiveNumber);
  fit->add_option("--frame", frame, "frame to take the detection from (default: first seen)");
  fit->add_option("--config", config_override, "configuration (default: dir/config.toml)");

  auto* slam = app.add_subcommand("slam", "run the sequential object SLAM pipeline");
  slam->add_option("dir", dir, "simulated directory")->required()->check(CLI::ExistingDirectory);
  slam->add_option("--config", config_override, "configuration (default: dir/config.toml)");

  ShapeArgs shape;
  int samples = kDefaultRaySamples;
  double sigma = kDefaultOccupancySigma;
  std::string out_path;
  auto* render = app.add_subcommand("render", "expected-depth map of a decoded shape");
  add_shape_options(render, shape);
  render->add_option("--samples", samples, "samples per ray")->check(CLI::Range(2, 4096));
  render->add_option("--sigma", sigma, "occupancy ramp half-width")->check(CLI::PositiveNumber);
  render->add_option("-o,--output", out_path, "depth map file")->required();

  int resolution = 40;
  bool object_frame = false;
  auto* mesh = app.add_subcommand("mesh", "OBJ mesh of a decoded shape");
  add_shape_options(mesh, shape);
  mesh->add_option("--resolution", resolution, "grid cells per axis")->check(CLI::Range(8, 512));
  mesh->add_flag("--object-frame", object_frame, "skip the pose transform");
  mesh->add_option("-o,--output", out_path, "OBJ file")->required();

  std::uint64_t calibration_seed = 1000;
  auto* bench = app.add_subcommand("bench", "Gauss-Newton vs first-order convergence");
  bench->add_option("dir", dir, "simulated directory")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--calibration-seed", calibration_seed, "scene seed used to tune the step");
  bench->add_option("--config", config_override, "configuration (default: dir/config.toml)");

  int configs = 100;
  std::uint64_t seed = 1;
  auto* check = app.add_subcommand("check-jacobians", "finite-difference checks of every Jacobian");
  check->add_option("--configs", configs, "random configurations per family")->check(CLI::PositiveNumber);
  check->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFormat;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, dir);
    if (*fit) return cmd_fit(dir, object, points, frame, config_override);
    if (*slam) return cmd_slam(dir, config_override);
    if (*render) return cmd_render(shape, samples, sigma, out_path);
    if (*mesh) return cmd_mesh(shape, resolution, object_frame, out_path);
    if (*bench) return cmd_bench(dir, calibration_seed, config_override);
    if (*check) return cmd_check_jacobians(configs, seed);
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFormat;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const BranchError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFormat;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
