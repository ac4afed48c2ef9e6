#include "objslam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "objslam/error.hpp"

namespace objslam {

double rotation_error_deg(const Eigen::Matrix3d& R_est, const Eigen::Matrix3d& R_gt) {
  const double c = std::clamp(((R_est * R_gt.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double translation_error(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt) {
  return (t_est - t_gt).norm();
}

double scale_error(double s_est, double s_gt) { return std::abs(s_est / s_gt - 1.0); }

PoseError pose_error(const PoseSim3d& est, const PoseSim3d& gt) {
  return {translation_error(est.translation(), gt.translation()),
          rotation_error_deg(est.rotation(), gt.rotation()), scale_error(est.scale(), gt.scale())};
}

double absolute_trajectory_error(const std::vector<PoseSE3d>& est,
                                 const std::vector<PoseSE3d>& gt) {
  if (est.size() != gt.size() || est.empty()) {
    throw ParameterError("absolute_trajectory_error: trajectories differ in length or are empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    sum += (est[i].translation() - gt[i].translation()).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(est.size()));
}

RelativePoseError relative_pose_error(const std::vector<PoseSE3d>& est,
                                      const std::vector<PoseSE3d>& gt) {
  if (est.size() != gt.size() || est.size() < 2) {
    throw ParameterError("relative_pose_error: need two trajectories of equal length >= 2");
  }
  double t2 = 0.0;
  double r2 = 0.0;
  for (std::size_t i = 1; i < est.size(); ++i) {
    const PoseSE3d d_est = est[i - 1].inverse() * est[i];
    const PoseSE3d d_gt = gt[i - 1].inverse() * gt[i];
    const PoseSE3d e = d_gt.inverse() * d_est;
    t2 += e.translation().squaredNorm();
    const double r = rotation_error_deg(e.rotation(), Eigen::Matrix3d::Identity());
    r2 += r * r;
  }
  const double n = static_cast<double>(est.size() - 1);
  return {std::sqrt(t2 / n), std::sqrt(r2 / n)};
}

std::vector<Eigen::Vector3d> sample_mesh(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  if (mesh.faces.empty()) throw ParameterError("sample_mesh: empty mesh");
  std::vector<double> areas(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& F = mesh.faces[f];
    const Eigen::Vector3d& a = mesh.vertices[F(0)];
    areas[f] = 0.5 * (mesh.vertices[F(1)] - a).cross(mesh.vertices[F(2)] - a).norm();
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector3d> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& F = mesh.faces[pick(rng)];
    double a = u(rng);
    double b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const Eigen::Vector3d& p0 = mesh.vertices[F(0)];
    out.push_back(p0 + a * (mesh.vertices[F(1)] - p0) + b * (mesh.vertices[F(2)] - p0));
  }
  return out;
}

namespace {

double mean_nearest(const std::vector<Eigen::Vector3d>& from, const std::vector<Eigen::Vector3d>& to) {
  double sum = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty()) throw ParameterError("chamfer_distance: empty point set");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

TriangleMesh transform_mesh(const TriangleMesh& mesh, const PoseSim3d& T) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = transform_point(T, v);
  return out;
}

double shape_error(const ShapeCode& z_est, const PoseSim3d& T_est, const ShapeCode& z_gt,
                   const PoseSim3d& T_gt, const DecoderSpec& spec, int mesh_resolution,
                   std::uint64_t seed) {
  const TriangleMesh est = transform_mesh(decode_mesh(z_est, spec, mesh_resolution), T_est);
  const TriangleMesh gt = transform_mesh(decode_mesh(z_gt, spec, mesh_resolution), T_gt);
  return chamfer_distance(sample_mesh(est, kChamferSamples, seed),
                          sample_mesh(gt, kChamferSamples, seed + 1));
}

}  // namespace objslam
