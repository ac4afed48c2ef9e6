#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "objslam/lie.hpp"
#include "objslam/prior.hpp"

namespace objslam {

/// Geodesic angle of R_est R_gt^T, degrees.
double rotation_error_deg(const Eigen::Matrix3d& R_est, const Eigen::Matrix3d& R_gt);
double translation_error(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt);
/// |s_est / s_gt - 1|.
double scale_error(double s_est, double s_gt);

struct PoseError {
  double translation = 0.0;  // meters
  double rotation_deg = 0.0;
  double scale = 0.0;  // fraction
};

PoseError pose_error(const PoseSim3d& est, const PoseSim3d& gt);

/// Translation RMSE; trajectories are gauge-fixed so no alignment is applied.
double absolute_trajectory_error(const std::vector<PoseSE3d>& est, const std::vector<PoseSE3d>& gt);

struct RelativePoseError {
  double translation = 0.0;     // RMSE, meters
  double rotation_deg = 0.0;    // RMSE
};

/// Errors of consecutive relative motions.
RelativePoseError relative_pose_error(const std::vector<PoseSE3d>& est,
                                      const std::vector<PoseSE3d>& gt);

/// `n` area-weighted random points on the mesh surface.
std::vector<Eigen::Vector3d> sample_mesh(const TriangleMesh& mesh, int n, std::uint64_t seed);

/// Mean nearest-neighbour distance, averaged over both directions.
double chamfer_distance(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b);

TriangleMesh transform_mesh(const TriangleMesh& mesh, const PoseSim3d& T);

constexpr int kChamferSamples = 2000;

/// Chamfer distance between the two decoded shapes placed in the world.
double shape_error(const ShapeCode& z_est, const PoseSim3d& T_est, const ShapeCode& z_gt,
                   const PoseSim3d& T_gt, const DecoderSpec& spec, int mesh_resolution = 40,
                   std::uint64_t seed = 11);

}  // namespace objslam
