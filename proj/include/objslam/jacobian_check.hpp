#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace objslam {

constexpr double kFiniteDifferenceStep = 1e-6;

/// ||J_a - J_fd||_F / max(||J_fd||_F, 1e-12).
double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric);

/// Central differences of f around a zero perturbation of size `dim`.
Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 int dim, double h = kFiniteDifferenceStep);

struct JacobianReport {
  std::string family;
  int configs = 0;
  int skipped = 0;  // draws rejected near a non-differentiable point
  double max_error = 0.0;
  double tolerance = 0.0;

  bool pass() const { return configs > 0 && max_error <= tolerance; }
};

/// Every analytic Jacobian family against finite differences at `configs` random draws.
std::vector<JacobianReport> check_jacobians(int configs = 100, std::uint64_t seed = 1);

}  // namespace objslam
