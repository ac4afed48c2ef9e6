#include "objslam/jacobian_check.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "objslam/graph.hpp"
#include "objslam/lie.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"
#include "objslam/residuals.hpp"
#include "objslam/simkit.hpp"

namespace objslam {

double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
}

Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 int dim, double h) {
  const Eigen::VectorXd f0 = f(Eigen::VectorXd::Zero(dim));
  Eigen::MatrixXd J(f0.size(), dim);
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
    d(i) = h;
    J.col(i) = (f(d) - f(-d)) / (2.0 * h);
  }
  return J;
}

namespace {

using Rng = std::mt19937_64;

Eigen::Vector3d gaussian3(Rng& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  return {n(rng), n(rng), n(rng)};
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle) {
  const Eigen::Vector3d axis = gaussian3(rng, 1.0).normalized();
  return exp_so3<double>(axis * uniform(rng, 0.0, max_angle));
}

ShapeCode random_code(Rng& rng, int k, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  ShapeCode z(k);
  for (int i = 0; i < k; ++i) z(i) = n(rng);
  return z;
}

PoseSim3d perturb(const Eigen::VectorXd& d, const PoseSim3d& T) {
  return exp_sim3(TwistSim3d::from_vector(d.head<kSim3Dof>())) * T;
}

PoseSE3d perturb(const Vector6d& d, const PoseSE3d& T) { return exp_se3<double>(d) * T; }

// Object placed 6-10 m in front of the camera, returned as T_co.
PoseSim3d random_object_pose(Rng& rng) {
  const Eigen::Matrix3d R = random_rotation(rng, 0.3) *
                            Eigen::AngleAxisd(uniform(rng, 0.0, 2.0 * std::numbers::pi),
                                              Eigen::Vector3d::UnitY())
                                .toRotationMatrix();
  const Eigen::Vector3d t(uniform(rng, -1.0, 1.0), uniform(rng, -0.5, 0.5), uniform(rng, 6.0, 10.0));
  return PoseSim3d(R, t, uniform(rng, 1.5, 3.0));
}

// Camera-frame point near the decoded surface of an object at T_co.
SurfaceObservation near_surface_observation(Rng& rng, const PoseSim3d& T_co,
                                            const DecoderSpec& spec, const Camera& camera) {
  const Eigen::Vector3d half = spec.base.head<3>();
  const Eigen::Vector3d dir = gaussian3(rng, 1.0).normalized();
  const Eigen::Vector3d p = (dir.array() * half.array()).matrix() * uniform(rng, 0.7, 1.3);
  const Eigen::Vector3d x_c = transform_point(T_co, p);
  return {camera.project(x_c), x_c.z()};
}

class Family {
 public:
  Family(std::string name, double tol) { report_.family = std::move(name), report_.tolerance = tol; }
  void add(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    ++report_.configs;
    report_.max_error = std::max(report_.max_error, relative_error(analytic, numeric));
  }
  void skip() { ++report_.skipped; }
  JacobianReport report() const { return report_; }

 private:
  JacobianReport report_;
};

constexpr double kTolerance = 1e-5;
constexpr double kRenderTolerance = 1e-4;
constexpr double kKinkMargin = 1e-4;

}  // namespace

std::vector<JacobianReport> check_jacobians(int configs, std::uint64_t seed) {
  Rng rng(seed);
  const DecoderSpec spec = car_spec();
  const int k = spec.code_dim();
  const Camera camera = Camera::from_intrinsics(250.0, 250.0, 160.0, 120.0, 320, 240);
  std::vector<JacobianReport> out;

  {
    Family f("point_jacobian_sim3", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const PoseSim3d T(random_rotation(rng, 3.0), gaussian3(rng, 2.0), uniform(rng, 0.5, 3.0));
      const Eigen::Vector3d x = gaussian3(rng, 1.0);
      const auto g = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return transform_point(perturb(d, T), x);
      };
      f.add(point_jacobian_sim3<double>(transform_point(T, x)), numeric_jacobian(g, kSim3Dof));
    }
    out.push_back(f.report());
  }

  {
    Family fx("decoder_x", kTolerance);
    Family fz("decoder_code", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const ShapeCode z = random_code(rng, k, 0.4);
      const Eigen::Vector3d x = (gaussian3(rng, 1.0).array() * spec.base.head<3>().array()).matrix();
      const SdfGradients g = decode_gradients(x, z, spec);
      const auto by_x = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, decode_sdf(x + d, z, spec));
      };
      const auto by_z = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, decode_sdf(x, z + d, spec));
      };
      fx.add(g.d_x.transpose(), numeric_jacobian(by_x, 3));
      fz.add(g.d_code.transpose(), numeric_jacobian(by_z, k));
    }
    out.push_back(fx.report());
    out.push_back(fz.report());
  }

  {
    Family f("surface", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const PoseSim3d T_co = random_object_pose(rng);
      const PoseSim3d T_oc = T_co.inverse();
      const ShapeCode z = random_code(rng, k, 0.3);
      const SurfaceObservation obs = near_surface_observation(rng, T_co, spec, camera);
      const auto g = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(
            1, surface_residual(obs, perturb(d, T_oc), z + d.tail(k), spec, camera));
      };
      f.add(surface_jacobian(obs, T_oc, z, spec, camera), numeric_jacobian(g, kSim3Dof + k));
    }
    out.push_back(f.report());
  }

  {
    Family f("render", kRenderTolerance);
    const int samples = kDefaultRaySamples;
    const double sigma = kDefaultOccupancySigma;
    int attempts = 0;
    while (f.report().configs < configs && attempts < 1000 * configs) {
      ++attempts;
      const PoseSim3d T_co = random_object_pose(rng);
      const PoseSim3d T_oc = T_co.inverse();
      const ShapeCode z = random_code(rng, k, 0.3);
      const DecodedShape shape = decode_shape(z, spec);
      const DepthRange range = depth_range(T_co, spec);
      const SurfaceObservation obs = near_surface_observation(rng, T_co, spec, camera);
      std::optional<double> observed;
      if (uniform(rng, 0.0, 1.0) < 0.5) observed = obs.depth + uniform(rng, -0.3, 0.3);
      const RenderTerm t = render_term(obs.pixel, observed, T_oc, shape, range, camera, samples,
                                       sigma, true, JacobianAssembly::kDense);
      if (!t.touches_band) continue;  // zero Jacobian, nothing to compare
      const RayBundle bundle = trace_ray(camera, obs.pixel, T_oc, shape, range, samples, sigma);
      bool near_kink = false;
      for (int s = 0; s < bundle.sdf.size(); ++s) {
        near_kink = near_kink || std::abs(std::abs(bundle.sdf(s)) - sigma) < kKinkMargin;
      }
      if (near_kink) {
        f.skip();
        continue;
      }
      const auto g = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        const DecodedShape s = decode_shape(z + d.tail(k), spec);
        return Eigen::VectorXd::Constant(1, render_term(obs.pixel, observed, perturb(d, T_oc), s,
                                                        range, camera, samples, sigma, false)
                                                .r);
      };
      f.add(t.J, numeric_jacobian(g, kSim3Dof + k));
    }
    out.push_back(f.report());
  }

  {
    Family f("code_prior", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const ShapeCode z = random_code(rng, k, 1.0);
      const auto g = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return code_prior_block(z + d.tail(k)).r;
      };
      f.add(code_prior_block(z).J, numeric_jacobian(g, kSim3Dof + k));
    }
    out.push_back(f.report());
  }

  {
    Family f("rotation_prior", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const PoseSim3d T_oc(random_rotation(rng, 3.0), gaussian3(rng, 3.0), uniform(rng, 0.3, 1.0));
      const Eigen::Vector3d n = gaussian3(rng, 1.0).normalized();
      const auto g = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, rotation_prior_residual(perturb(d, T_oc), n));
      };
      f.add(rotation_prior_jacobian(T_oc, n, k), numeric_jacobian(g, kSim3Dof + k));
    }
    out.push_back(f.report());
  }

  {
    Family fc("co_camera", kTolerance);
    Family fo("co_object", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const PoseSE3d T_wc(random_rotation(rng, 3.0), gaussian3(rng, 5.0));
      const PoseSE3d T_wo(random_rotation(rng, 3.0), gaussian3(rng, 5.0));
      Vector6d noise;
      noise << gaussian3(rng, 0.3), gaussian3(rng, 0.3);
      const PoseSE3d T_co = T_wc.inverse() * T_wo * exp_se3<double>(noise);
      const CoJacobians J = co_jacobians(T_wc, T_wo, T_co);
      const auto by_c = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return co_residual(perturb(Vector6d(d), T_wc), T_wo, T_co);
      };
      const auto by_o = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return co_residual(T_wc, perturb(Vector6d(d), T_wo), T_co);
      };
      fc.add(J.d_camera, numeric_jacobian(by_c, 6));
      fo.add(J.d_object, numeric_jacobian(by_o, 6));
    }
    out.push_back(fc.report());
    out.push_back(fo.report());
  }

  {
    Family fc("cp_camera", kTolerance);
    Family fp("cp_point", kTolerance);
    for (int i = 0; i < configs; ++i) {
      const PoseSE3d T_wc(random_rotation(rng, 3.0), gaussian3(rng, 5.0));
      const Eigen::Vector3d p_c(uniform(rng, -3.0, 3.0), uniform(rng, -2.0, 2.0), uniform(rng, 2.0, 20.0));
      const Eigen::Vector3d p_w = T_wc * p_c;
      const Eigen::Vector2d pixel = camera.project(p_c) + Eigen::Vector2d(uniform(rng, -5, 5), uniform(rng, -5, 5));
      const CpJacobians J = cp_jacobians(T_wc, p_w, camera);
      const auto by_c = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return *cp_residual(perturb(Vector6d(d), T_wc), p_w, pixel, camera);
      };
      const auto by_p = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return *cp_residual(T_wc, p_w + d, pixel, camera);
      };
      fc.add(J.d_camera, numeric_jacobian(by_c, 6));
      fp.add(J.d_point, numeric_jacobian(by_p, 3));
    }
    out.push_back(fc.report());
    out.push_back(fp.report());
  }
  return out;
}

}  // namespace objslam
