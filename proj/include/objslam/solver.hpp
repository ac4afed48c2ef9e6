#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "objslam/detection.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"
#include "objslam/residuals.hpp"

namespace objslam {

struct FitConfig {
  double lambda_surface = 100.0;
  double lambda_render = 2.5;
  double lambda_code = 0.25;
  bool use_rotation_prior = false;
  double lambda_rotation = 1.0;
  int max_iters = 10;
  int ray_samples = kDefaultRaySamples;
  int bbox_pixels = 200;
  double damping = 1e-6;  // 0 = plain Gauss-Newton
  double convergence_tol = 1e-6;
  double sigma = kDefaultOccupancySigma;
  double near_plane = kDefaultNearPlane;
  std::uint64_t seed = 1;
  int max_damping_escalations = 5;  // singular systems
  int max_step_rejections = 10;     // energy increases
  int pose_only_iters = 5;
  double pose_only_max_rms = 0.03;  // meters; worse pose-only fits are rejected, 0 disables
  double first_order_step = 1e-3;
  int first_order_iters = 300;

  void validate() const;
};

struct FitResult {
  bool ok = false;
  std::string diagnostic;
  PoseSim3d pose;  // T_co
  ShapeCode z;
  std::vector<double> energy_trace;  // [initial, after iteration 1, ...]
  std::vector<double> step_norms;
  std::vector<double> iteration_seconds;
  int iterations = 0;
  bool converged = false;
};

struct EnergyTerms {
  double surface = 0.0;
  double render = 0.0;
  double code = 0.0;
  double rotation = 0.0;
  double total() const { return surface + render + code + rotation; }
};

/**
 * Weighted least-squares problem of one detection over [xi_oc; z].
 *
 * Silhouette pixels are drawn once, uniformly from the bounding box with the
 * mask removed, from a generator seeded by FitConfig::seed.
 */
class ObjectProblem {
 public:
  ObjectProblem(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                const FitConfig& cfg);

  struct Linearization {
    EnergyTerms energy;
    Eigen::MatrixXd H;  // J^T J
    Eigen::VectorXd g;  // J^T r
    Eigen::MatrixXd H_surface, H_render, H_code;
  };

  /// Energy with the depth range recomputed at `T_oc`.
  EnergyTerms energy(const PoseSim3d& T_oc, const ShapeCode& z) const;
  EnergyTerms energy(const PoseSim3d& T_oc, const ShapeCode& z, const DepthRange& range) const;

  /// Normal equations with the depth range held at `range`.
  Linearization linearize(const PoseSim3d& T_oc, const ShapeCode& z, const DepthRange& range,
                          bool split_blocks = false) const;

  DepthRange range_at(const PoseSim3d& T_oc) const;

  const std::vector<Eigen::Vector2d>& silhouette_pixels() const { return silhouette_; }
  const Detection& detection() const { return det_; }
  const DecoderSpec& spec() const { return spec_; }
  const FitConfig& config() const { return cfg_; }
  int code_dim() const { return spec_.code_dim(); }

 private:
  const Detection& det_;
  const Camera& camera_;
  const DecoderSpec& spec_;
  FitConfig cfg_;
  std::vector<Eigen::Vector2d> silhouette_;
};

/// Joint pose and shape fit from the detection's initial pose and z = 0.
FitResult fit_object(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                     const FitConfig& cfg);

/// Same, starting from an explicit pose and code.
FitResult fit_object_from(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                          const FitConfig& cfg, const PoseSim3d& T_co_init,
                          const ShapeCode& z_init);

struct PoseOnlyResult {
  bool ok = false;
  std::string diagnostic;
  PoseSim3d pose;  // T_co, scale untouched
  double cost = 0.0;
  int iterations = 0;
};

/// Surface-term Gauss-Newton over rotation and translation only; scale and code stay fixed.
PoseOnlyResult pose_only_optimize(const Detection& det, const PoseSim3d& T_co_init,
                                  const ShapeCode& z, const DecoderSpec& spec,
                                  const Camera& camera, const FitConfig& cfg);

/// Fixed-step gradient descent on the same energy.
FitResult first_order_baseline(const Detection& det, const Camera& camera,
                               const DecoderSpec& spec, const FitConfig& cfg);

/// Largest step from a geometric grid whose first `probe_iters` iterations never increase the energy.
double tune_first_order_step(const Detection& det, const Camera& camera, const DecoderSpec& spec,
                             const FitConfig& cfg, int probe_iters = 20);

/// Frobenius norms of the weighted Gauss-Newton Hessian blocks at the initial state.
EnergyTerms hessian_block_norms(const Detection& det, const Camera& camera,
                                const DecoderSpec& spec, const FitConfig& cfg);

}  // namespace objslam
