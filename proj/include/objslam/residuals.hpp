#pragma once

#include <Eigen/Core>
#include <optional>

#include "objslam/detection.hpp"
#include "objslam/lie.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"

/**
 * Residual families of the object fit. All Jacobians are taken with respect to
 * [xi_oc; z] with columns [nu(3) | phi(3) | sigma(1) | z(k)], where xi_oc is a
 * left perturbation of the object-from-camera transform T_oc.
 */
namespace objslam {

constexpr int kSim3Dof = 7;

struct ResidualBlock {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  double weight = 1.0;
};

struct ScalarResidual {
  double r = 0.0;
  Eigen::RowVectorXd J;
};

/// SDF of the back-projected observation in the object frame.
ScalarResidual surface_term(const SurfaceObservation& obs, const PoseSim3d& T_oc,
                            const DecodedShape& shape, const Camera& camera);

double surface_residual(const SurfaceObservation& obs, const PoseSim3d& T_oc, const ShapeCode& z,
                        const DecoderSpec& spec, const Camera& camera);
Eigen::RowVectorXd surface_jacobian(const SurfaceObservation& obs, const PoseSim3d& T_oc,
                                    const ShapeCode& z, const DecoderSpec& spec,
                                    const Camera& camera);

enum class JacobianAssembly {
  kSparse,  // decoder gradients only where d e/d o_k * d o_k/d s_k != 0
  kDense,   // decoder gradients at every sample
};

struct RenderTerm {
  double r = 0.0;
  Eigen::RowVectorXd J;
  int gradient_calls = 0;
  bool touches_band = false;  // some sample lies in the open band |s| < sigma
};

/**
 * observed - rendered depth for one pixel with the depth samples fixed by `range`.
 * A missing `observed_depth` marks a silhouette pixel, observed at the escape depth.
 */
RenderTerm render_term(const Eigen::Vector2d& pixel, std::optional<double> observed_depth,
                       const PoseSim3d& T_oc, const DecodedShape& shape, const DepthRange& range,
                       const Camera& camera, int samples, double sigma, bool with_jacobian,
                       JacobianAssembly assembly = JacobianAssembly::kSparse);

/// Convenience forms deriving the depth range from the pose.
double render_residual(const Eigen::Vector2d& pixel, std::optional<double> observed_depth,
                       const PoseSim3d& T_oc, const ShapeCode& z, const DecoderSpec& spec,
                       const Camera& camera, int samples, double sigma = kDefaultOccupancySigma);
Eigen::RowVectorXd render_jacobian(const Eigen::Vector2d& pixel,
                                   std::optional<double> observed_depth, const PoseSim3d& T_oc,
                                   const ShapeCode& z, const DecoderSpec& spec,
                                   const Camera& camera, int samples,
                                   double sigma = kDefaultOccupancySigma);

/// Residual z, Jacobian [0 | I].
ResidualBlock code_prior_block(const ShapeCode& z);

/// 1 - e_y^T R_oc n_g.
double rotation_prior_residual(const PoseSim3d& T_oc, const Eigen::Vector3d& ground_normal);
/// Nonzero only in the phi columns: second row of skew(R_oc n_g).
Eigen::RowVectorXd rotation_prior_jacobian(const PoseSim3d& T_oc,
                                           const Eigen::Vector3d& ground_normal, int code_dim);

}  // namespace objslam
