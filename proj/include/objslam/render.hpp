#pragma once

#include <Eigen/Core>
#include <vector>

#include "objslam/lie.hpp"
#include "objslam/prior.hpp"

namespace objslam {

/// Pinhole camera.
struct Camera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  int width = 0;
  int height = 0;

  static Camera from_intrinsics(double fx, double fy, double cx, double cy, int width,
                                int height);

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }

  /// Ray direction with unit z, so that d * ray(u) has depth d.
  Eigen::Vector3d ray(const Eigen::Vector2d& pixel) const;
  Eigen::Vector2d project(const Eigen::Vector3d& x_camera) const;
  bool contains(const Eigen::Vector2d& pixel) const;
  void validate() const;
};

struct DepthRange {
  double d_min = 0.0;
  double d_max = 0.0;

  /// Depth assigned to the escape event.
  double escape_depth() const { return 1.1 * d_max; }
  double spacing(int samples) const { return (d_max - d_min) / (samples - 1); }
};

constexpr double kDefaultNearPlane = 0.1;
constexpr double kDefaultOccupancySigma = 0.01;
constexpr int kDefaultRaySamples = 32;

/**
 * Sampling interval along the optical axis for an object with camera-frame pose
 * `T_co`: [max(near, t_z - s R), t_z + s R] with R the decoder's bounding radius.
 * Throws ParameterError when the whole bounding sphere lies behind the near plane.
 */
DepthRange depth_range(const PoseSim3d& T_co, const DecoderSpec& spec,
                       double near_plane = kDefaultNearPlane);

/// Continuous linear ramp from 1 (s <= -sigma) to 0 (s >= sigma).
double occupancy(double s, double sigma);
/// -1/(2 sigma) inside the open band |s| < sigma, 0 elsewhere.
double occupancy_grad(double s, double sigma);

/// phi_i = o_i prod_{j<i}(1 - o_j); the last entry is the escape probability.
Eigen::VectorXd event_probabilities(const Eigen::VectorXd& occ);

double render_depth(const Eigen::VectorXd& phi, const Eigen::VectorXd& depths, double d_escape);

/**
 * d(observed - rendered)/d o_k for uniformly spaced samples whose escape depth
 * sits one spacing past the last sample.
 */
Eigen::VectorXd depth_residual_occ_grad(const Eigen::VectorXd& occ, double delta_d);

/**
 * Exact d(observed - rendered)/d o_k for arbitrary depths and escape depth:
 *   sum_{i>=k} (d_{i+1} - d_i) prod_{j<=i, j!=k} (1 - o_j),  d_{M+1} = d_escape.
 */
Eigen::VectorXd depth_residual_occ_grad(const Eigen::VectorXd& occ, const Eigen::VectorXd& depths,
                                        double d_escape);

struct RayBundle {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::VectorXd depths;
  Eigen::Matrix<double, Eigen::Dynamic, 3> points_obj;
  Eigen::VectorXd sdf;
  Eigen::VectorXd occ;
  Eigen::VectorXd event_prob;
  double d_escape = 0.0;

  double rendered_depth() const { return render_depth(event_prob, depths, d_escape); }
};

/// Samples `samples` depths in `range` along the ray of `pixel` and evaluates the decoded shape.
RayBundle trace_ray(const Camera& camera, const Eigen::Vector2d& pixel, const PoseSim3d& T_oc,
                    const DecodedShape& shape, const DepthRange& range, int samples,
                    double sigma = kDefaultOccupancySigma);

/// Same, with the depth range derived from the pose.
RayBundle trace_ray(const Camera& camera, const Eigen::Vector2d& pixel, const PoseSim3d& T_oc,
                    const ShapeCode& z, const DecoderSpec& spec, int samples,
                    double sigma = kDefaultOccupancySigma, double near_plane = kDefaultNearPlane);

/// Expected-depth image of one object; pixels whose rays escape hold 0.
struct DepthImage {
  int width = 0;
  int height = 0;
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  std::vector<float> data;  // row-major

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

DepthImage render_depth_image(const Camera& camera, const PoseSim3d& T_co, const ShapeCode& z,
                              const DecoderSpec& spec, int samples,
                              double sigma = kDefaultOccupancySigma);

}  // namespace objslam
