#include "objslam/solver.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "objslam/error.hpp"

namespace objslam {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Left update of T_oc and additive update of z.
void apply_step(const Eigen::VectorXd& delta, PoseSim3d& T_oc, ShapeCode& z) {
  const PoseSim3d inc = exp_sim3(TwistSim3d::from_vector(delta.head<kSim3Dof>()));
  const PoseSim3d next = inc * T_oc;
  T_oc = PoseSim3d(orthonormalize(next.rotation()), next.translation(), next.scale());
  z += delta.tail(z.size());
}

void add_row(Eigen::MatrixXd& H, Eigen::VectorXd& g, const Eigen::RowVectorXd& J, double r,
             double weight) {
  H.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose(), weight);
  g.noalias() += (weight * r) * J.transpose();
}

void symmetrize(Eigen::MatrixXd& H) { H = H.selfadjointView<Eigen::Lower>(); }

}  // namespace

void FitConfig::validate() const {
  if (lambda_surface < 0 || lambda_render < 0 || lambda_code < 0 || lambda_rotation < 0) {
    throw ParameterError("fit config: weights must be non-negative");
  }
  if (max_iters < 1) throw ParameterError("fit config: max_iters must be >= 1");
  if (ray_samples < 2) throw ParameterError("fit config: ray_samples must be >= 2");
  if (bbox_pixels < 0) throw ParameterError("fit config: bbox_pixels must be >= 0");
  if (damping < 0) throw ParameterError("fit config: damping must be >= 0");
  if (pose_only_max_rms < 0) throw ParameterError("fit config: pose_only_max_rms must be >= 0");
  if (!(sigma > 0)) throw ParameterError("fit config: sigma must be positive");
}

ObjectProblem::ObjectProblem(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                             const FitConfig& cfg)
    : det_(det), camera_(camera), spec_(spec), cfg_(cfg) {
  cfg_.validate();
  const BoundingBox& box = det.bbox;
  if (box.empty() || cfg.bbox_pixels == 0) return;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> ux(box.x_min, box.x_max);
  std::uniform_int_distribution<int> uy(box.y_min, box.y_max);
  const long attempts = 50L * cfg.bbox_pixels;
  for (long a = 0; a < attempts && static_cast<int>(silhouette_.size()) < cfg.bbox_pixels; ++a) {
    const int x = ux(rng);
    const int y = uy(rng);
    if (det.mask.at(x, y)) continue;
    silhouette_.emplace_back(x, y);
  }
}

DepthRange ObjectProblem::range_at(const PoseSim3d& T_oc) const {
  return depth_range(T_oc.inverse(), spec_, cfg_.near_plane);
}

EnergyTerms ObjectProblem::energy(const PoseSim3d& T_oc, const ShapeCode& z) const {
  return energy(T_oc, z, range_at(T_oc));
}

EnergyTerms ObjectProblem::energy(const PoseSim3d& T_oc, const ShapeCode& z,
                                  const DepthRange& range) const {
  const DecodedShape shape = decode_shape(z, spec_);
  EnergyTerms e;
  const double n_surface = static_cast<double>(det_.surface.size());
  const double n_render = n_surface + static_cast<double>(silhouette_.size());
  if (cfg_.lambda_surface > 0 && n_surface > 0) {
    double sum = 0.0;
    for (const auto& obs : det_.surface) {
      const double r = sdf(shape, T_oc * (obs.depth * camera_.ray(obs.pixel)));
      sum += r * r;
    }
    e.surface = cfg_.lambda_surface * sum / n_surface;
  }
  if (cfg_.lambda_render > 0 && n_render > 0) {
    double sum = 0.0;
    for (const auto& obs : det_.surface) {
      const double r = render_term(obs.pixel, obs.depth, T_oc, shape, range, camera_,
                                   cfg_.ray_samples, cfg_.sigma, false)
                           .r;
      sum += r * r;
    }
    for (const auto& px : silhouette_) {
      const double r = render_term(px, std::nullopt, T_oc, shape, range, camera_,
                                   cfg_.ray_samples, cfg_.sigma, false)
                           .r;
      sum += r * r;
    }
    e.render = cfg_.lambda_render * sum / n_render;
  }
  e.code = cfg_.lambda_code * z.squaredNorm();
  if (cfg_.use_rotation_prior && det_.ground_normal) {
    const double r = rotation_prior_residual(T_oc, *det_.ground_normal);
    e.rotation = cfg_.lambda_rotation * r * r;
  }
  return e;
}

ObjectProblem::Linearization ObjectProblem::linearize(const PoseSim3d& T_oc, const ShapeCode& z,
                                                      const DepthRange& range,
                                                      bool split_blocks) const {
  const int k = spec_.code_dim();
  const int n = kSim3Dof + k;
  const DecodedShape shape = decode_shape(z, spec_);
  Linearization lin;
  lin.H = Eigen::MatrixXd::Zero(n, n);
  lin.g = Eigen::VectorXd::Zero(n);
  const double n_surface = static_cast<double>(det_.surface.size());
  const double n_render = n_surface + static_cast<double>(silhouette_.size());

  Eigen::MatrixXd H_part = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g_part = Eigen::VectorXd::Zero(n);
  auto flush = [&](Eigen::MatrixXd* block) {
    symmetrize(H_part);
    lin.H += H_part;
    lin.g += g_part;
    if (block) *block = H_part;
    H_part.setZero();
    g_part.setZero();
  };

  if (cfg_.lambda_surface > 0 && n_surface > 0) {
    const double w = cfg_.lambda_surface / n_surface;
    double sum = 0.0;
    for (const auto& obs : det_.surface) {
      const ScalarResidual res = surface_term(obs, T_oc, shape, camera_);
      add_row(H_part, g_part, res.J, res.r, w);
      sum += res.r * res.r;
    }
    lin.energy.surface = w * sum;
  }
  flush(split_blocks ? &lin.H_surface : nullptr);

  if (cfg_.lambda_render > 0 && n_render > 0) {
    const double w = cfg_.lambda_render / n_render;
    double sum = 0.0;
    auto accumulate = [&](const Eigen::Vector2d& px, std::optional<double> observed) {
      const RenderTerm t = render_term(px, observed, T_oc, shape, range, camera_,
                                       cfg_.ray_samples, cfg_.sigma, true);
      add_row(H_part, g_part, t.J, t.r, w);
      sum += t.r * t.r;
    };
    for (const auto& obs : det_.surface) accumulate(obs.pixel, obs.depth);
    for (const auto& px : silhouette_) accumulate(px, std::nullopt);
    lin.energy.render = w * sum;
  }
  flush(split_blocks ? &lin.H_render : nullptr);

  if (cfg_.lambda_code > 0) {
    const ResidualBlock block = code_prior_block(z);
    H_part.noalias() += cfg_.lambda_code * block.J.transpose() * block.J;
    g_part.noalias() += cfg_.lambda_code * block.J.transpose() * block.r;
    lin.energy.code = cfg_.lambda_code * z.squaredNorm();
  }
  flush(split_blocks ? &lin.H_code : nullptr);

  if (cfg_.use_rotation_prior && det_.ground_normal) {
    const double r = rotation_prior_residual(T_oc, *det_.ground_normal);
    add_row(H_part, g_part, rotation_prior_jacobian(T_oc, *det_.ground_normal, k), r,
            cfg_.lambda_rotation);
    lin.energy.rotation = cfg_.lambda_rotation * r * r;
  }
  flush(nullptr);
  return lin;
}

FitResult fit_object(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                     const FitConfig& cfg) {
  return fit_object_from(det, camera, spec, cfg, det.init_pose,
                         ShapeCode::Zero(spec.code_dim()));
}

FitResult fit_object_from(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                          const FitConfig& cfg, const PoseSim3d& T_co_init,
                          const ShapeCode& z_init) {
  FitResult result;
  result.pose = T_co_init;
  result.z = z_init;
  if (det.surface.size() < 10) {
    result.diagnostic = "fit_object: fewer than 10 surface observations";
    return result;
  }
  const ObjectProblem problem(det, camera, spec, cfg);
  PoseSim3d T_oc = T_co_init.inverse();
  ShapeCode z = z_init;

  double current;
  try {
    current = problem.energy(T_oc, z).total();
  } catch (const ParameterError& e) {
    result.diagnostic = std::string("fit_object: ") + e.what();
    return result;
  }
  if (!std::isfinite(current)) {
    result.diagnostic = "fit_object: non-finite initial energy";
    return result;
  }
  result.energy_trace.push_back(current);

  double lambda = cfg.damping;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const auto start = Clock::now();
    const DepthRange range = problem.range_at(T_oc);
    const ObjectProblem::Linearization lin = problem.linearize(T_oc, z, range);
    if (!lin.H.allFinite() || !lin.g.allFinite()) {
      result.diagnostic = "fit_object: non-finite residuals or Jacobians";
      return result;
    }

    bool accepted = false;
    int escalations = 0;
    int rejections = 0;
    Eigen::VectorXd delta;
    while (true) {
      Eigen::MatrixXd A = lin.H;
      A.diagonal() += lambda * lin.H.diagonal();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      bool solved = ldlt.info() == Eigen::Success && ldlt.isPositive();
      if (solved) {
        delta = ldlt.solve(-lin.g);
        solved = delta.allFinite() && (A * delta + lin.g).norm() <= 1e-6 * (1.0 + lin.g.norm());
      }
      if (!solved) {
        if (++escalations > cfg.max_damping_escalations) break;
        lambda = std::max(lambda * 10.0, 1e-6);
        continue;
      }
      if (cfg.damping == 0.0) {
        PoseSim3d T_next = T_oc;
        ShapeCode z_next = z;
        apply_step(delta, T_next, z_next);
        try {
          current = problem.energy(T_next, z_next).total();
        } catch (const ParameterError&) {
          current = std::numeric_limits<double>::quiet_NaN();
        }
        T_oc = T_next;
        z = z_next;
        accepted = true;
        break;
      }
      PoseSim3d T_next = T_oc;
      ShapeCode z_next = z;
      apply_step(delta, T_next, z_next);
      double candidate = std::numeric_limits<double>::infinity();
      try {
        candidate = problem.energy(T_next, z_next).total();
      } catch (const ParameterError&) {
      }
      if (std::isfinite(candidate) && candidate <= current) {
        T_oc = T_next;
        z = z_next;
        current = candidate;
        lambda = std::max(cfg.damping, lambda / 10.0);
        accepted = true;
        break;
      }
      if (++rejections > cfg.max_step_rejections) break;
      lambda *= 10.0;
    }
    result.iteration_seconds.push_back(seconds_since(start));
    if (!accepted) {
      if (escalations > cfg.max_damping_escalations) {
        result.diagnostic = "fit_object: singular normal equations";
        result.pose = T_oc.inverse();
        result.z = z;
        return result;
      }
      // No descent direction left at this damping: converged to within the model's resolution.
      result.converged = true;
      break;
    }
    if (!std::isfinite(current)) {
      result.diagnostic = "fit_object: non-finite energy after step";
      result.pose = T_oc.inverse();
      result.z = z;
      return result;
    }
    ++result.iterations;
    result.energy_trace.push_back(current);
    result.step_norms.push_back(delta.norm());
    if (delta.norm() < cfg.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  result.ok = true;
  result.pose = T_oc.inverse();
  result.z = z;
  return result;
}

PoseOnlyResult pose_only_optimize(const Detection& det, const PoseSim3d& T_co_init,
                                  const ShapeCode& z, const DecoderSpec& spec,
                                  const Camera& camera, const FitConfig& cfg) {
  PoseOnlyResult result;
  result.pose = T_co_init;
  if (det.surface.empty()) {
    result.diagnostic = "pose_only_optimize: no surface observations";
    return result;
  }
  const DecodedShape shape = decode_shape(z, spec);
  const double scale = T_co_init.scale();
  auto cost_at = [&](const PoseSim3d& T_oc) {
    double sum = 0.0;
    for (const auto& obs : det.surface) {
      const double r = sdf(shape, T_oc * (obs.depth * camera.ray(obs.pixel)));
      sum += r * r;
    }
    return sum / static_cast<double>(det.surface.size());
  };
  PoseSim3d T_oc = T_co_init.inverse();
  double current = cost_at(T_oc);
  double lambda = cfg.damping;
  for (int it = 0; it < cfg.pose_only_iters; ++it) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& obs : det.surface) {
      const ScalarResidual res = surface_term(obs, T_oc, shape, camera);
      const Eigen::Matrix<double, 1, 6> J = res.J.head<6>();
      H.noalias() += J.transpose() * J;
      g.noalias() += res.r * J.transpose();
    }
    bool accepted = false;
    Eigen::Matrix<double, 6, 1> delta;
    for (int attempt = 0; attempt <= cfg.max_step_rejections; ++attempt) {
      Eigen::Matrix<double, 6, 6> A = H;
      A.diagonal() += lambda * H.diagonal();
      delta = A.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda = std::max(lambda * 10.0, 1e-6);
        continue;
      }
      Eigen::Matrix<double, 7, 1> twist = Eigen::Matrix<double, 7, 1>::Zero();
      twist.head<6>() = delta;
      const PoseSim3d next = exp_sim3(TwistSim3d::from_vector(twist)) * T_oc;
      // sigma = 0 gives an increment of scale exactly 1; the product keeps the scale bit-exact.
      const PoseSim3d candidate(orthonormalize(next.rotation()), next.translation(), next.scale());
      const double c = cost_at(candidate);
      if (cfg.damping == 0.0 || c <= current) {
        T_oc = candidate;
        current = c;
        lambda = std::max(cfg.damping, lambda / 10.0);
        accepted = true;
        break;
      }
      lambda = std::max(lambda * 10.0, 1e-6);
    }
    if (!accepted) break;
    ++result.iterations;
    if (delta.norm() < cfg.convergence_tol) break;
  }
  const PoseSim3d T_co = T_oc.inverse();
  result.pose = PoseSim3d(T_co.rotation(), T_co.translation(), scale);
  result.cost = current;
  result.ok = std::isfinite(current);
  if (!result.ok) {
    result.diagnostic = "pose_only_optimize: non-finite cost";
  } else if (cfg.pose_only_max_rms > 0.0 && std::sqrt(current) * scale > cfg.pose_only_max_rms) {
    result.ok = false;
    result.diagnostic = "pose_only_optimize: surface residual above pose_only_max_rms";
  }
  return result;
}

namespace {

FitResult gradient_descent(const ObjectProblem& problem, const PoseSim3d& T_co_init, double step,
                           int iters) {
  FitResult result;
  PoseSim3d T_oc = T_co_init.inverse();
  ShapeCode z = ShapeCode::Zero(problem.code_dim());
  double current = problem.energy(T_oc, z).total();
  result.energy_trace.push_back(current);
  const double initial = current;
  for (int it = 0; it < iters; ++it) {
    const auto start = Clock::now();
    const ObjectProblem::Linearization lin =
        problem.linearize(T_oc, z, problem.range_at(T_oc));
    const Eigen::VectorXd grad = 2.0 * lin.g;
    const Eigen::VectorXd delta = -step * grad;
    try {
      apply_step(delta, T_oc, z);
      current = problem.energy(T_oc, z).total();
    } catch (const ParameterError&) {
      current = std::numeric_limits<double>::infinity();
    }
    result.iteration_seconds.push_back(seconds_since(start));
    ++result.iterations;
    result.energy_trace.push_back(current);
    result.step_norms.push_back(delta.norm());
    if (!std::isfinite(current) || current > 1e3 * (initial + 1.0)) {
      result.diagnostic = "first_order_baseline: diverged";
      break;
    }
    if (delta.norm() < problem.config().convergence_tol) {
      result.converged = true;
      break;
    }
  }
  result.ok = result.diagnostic.empty();
  result.pose = T_oc.inverse();
  result.z = z;
  return result;
}

}  // namespace

FitResult first_order_baseline(const Detection& det, const Camera& camera,
                               const DecoderSpec& spec, const FitConfig& cfg) {
  const ObjectProblem problem(det, camera, spec, cfg);
  return gradient_descent(problem, det.init_pose, cfg.first_order_step, cfg.first_order_iters);
}

double tune_first_order_step(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                             const FitConfig& cfg, int probe_iters) {
  const ObjectProblem problem(det, camera, spec, cfg);
  double best = 0.0;
  for (double step = 1e-6; step <= 1.0; step *= 2.0) {
    const FitResult r = gradient_descent(problem, det.init_pose, step, probe_iters);
    bool monotone = r.ok;
    for (std::size_t i = 1; monotone && i < r.energy_trace.size(); ++i) {
      monotone = r.energy_trace[i] <= r.energy_trace[i - 1];
    }
    if (!monotone) break;
    best = step;
  }
  return best;
}

EnergyTerms hessian_block_norms(const Detection& det, const Camera& camera,
                                const DecoderSpec& spec, const FitConfig& cfg) {
  const ObjectProblem problem(det, camera, spec, cfg);
  const PoseSim3d T_oc = det.init_pose.inverse();
  const ShapeCode z = ShapeCode::Zero(spec.code_dim());
  const auto lin = problem.linearize(T_oc, z, problem.range_at(T_oc), true);
  EnergyTerms norms;
  norms.surface = lin.H_surface.norm();
  norms.render = lin.H_render.norm();
  norms.code = lin.H_code.norm();
  return norms;
}

}  // namespace objslam
