#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "objslam/detection.hpp"
#include "objslam/lie.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"
#include "objslam/solver.hpp"

/**
 * Camera-object-point factor graph. Poses are perturbed on the left,
 * T <- exp(delta) T, with delta = [nu; phi].
 */
namespace objslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

struct CameraNode {
  PoseSE3d T_wc;
  bool fixed = false;
};

struct ObjectNode {
  PoseSE3d T_wo;
  double scale = 1.0;  // frozen after insertion
  ShapeCode z;
  DecoderSpec spec;
  std::set<int> landmark_ids;

  PoseSim3d sim3() const { return T_wo.sim3(scale); }
};

struct CoEdge {
  int camera = 0;
  int object = 0;
  PoseSE3d T_co;  // measured
  Matrix6d covariance = Matrix6d::Identity();
};

struct CpEdge {
  int camera = 0;
  int point = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();  // measured
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
};

struct FactorGraph {
  Camera camera;
  std::map<int, CameraNode> cameras;
  std::map<int, ObjectNode> objects;
  std::map<int, Eigen::Vector3d> points;
  std::vector<CoEdge> co_edges;
  std::vector<CpEdge> cp_edges;

  /// Throws ParameterError on dangling edges or non-SPD covariances.
  void validate() const;
  int next_object_id() const { return objects.empty() ? 0 : objects.rbegin()->first + 1; }
};

/// log(T_co^-1 T_wc^-1 T_wo).
Vector6d co_residual(const PoseSE3d& T_wc, const PoseSE3d& T_wo, const PoseSE3d& T_co);

struct CoJacobians {
  Matrix6d d_camera;  // d e / d delta_wc
  Matrix6d d_object;  // d e / d delta_wo
};
CoJacobians co_jacobians(const PoseSE3d& T_wc, const PoseSE3d& T_wo, const PoseSE3d& T_co);

/// pi(T_wc^-1 p) - u; nullopt when the point is not in front of the camera.
std::optional<Eigen::Vector2d> cp_residual(const PoseSE3d& T_wc, const Eigen::Vector3d& p_w,
                                           const Eigen::Vector2d& pixel, const Camera& camera);

struct CpJacobians {
  Eigen::Matrix<double, 2, 6> d_camera;
  Eigen::Matrix<double, 2, 3> d_point;
};
CpJacobians cp_jacobians(const PoseSE3d& T_wc, const Eigen::Vector3d& p_w, const Camera& camera);

struct GraphConfig {
  int max_iters = 20;
  double damping = 1e-4;
  int max_damping_escalations = 10;
  double convergence_tol = 1e-10;
  double cost_tol = 1e-12;  // a graph already at this cost is left untouched
  bool huber = false;
  double huber_delta = 2.0;  // in whitened units
  double sigma_pixel = 1.0;
  double sigma_co_translation = 0.02;  // with sigma_co_rotation: initial co and cp costs within 2x on loop seed 1
  double sigma_co_rotation = 0.01;

  Matrix6d co_covariance() const;
  Eigen::Matrix2d cp_covariance() const;
};

struct GraphCost {
  double co = 0.0;
  double cp = 0.0;
  int disabled_cp = 0;  // behind-camera edges
  int inactive_cp = 0;  // edges of points seen from fewer than two cameras
  double total() const { return co + cp; }
};

GraphCost graph_cost(const FactorGraph& graph, const GraphConfig& cfg);

struct GraphOptimizeResult {
  bool ok = false;
  std::string diagnostic;
  std::vector<double> cost_trace;
  int iterations = 0;
};

/**
 * Levenberg-Marquardt over all free cameras, objects and points. The camera
 * with the smallest id is the gauge anchor; points seen by fewer than two
 * cameras stay fixed and their edges are left out of the cost. Points are
 * eliminated by a Schur complement and the reduced pose system is solved densely.
 */
GraphOptimizeResult optimize_graph(FactorGraph& graph, const GraphConfig& cfg);

enum class AssociationMode { kLidar, kVisual };

const char* to_string(AssociationMode mode);
AssociationMode association_mode_from_string(const std::string& name);

struct AssociationConfig {
  AssociationMode mode = AssociationMode::kLidar;
  double tau = 2.0;    // meters, lidar gate
  int min_shared = 10; // landmarks, visual gate
};

constexpr int kNewObject = -1;

/**
 * Object id per detection, or kNewObject. Each object takes at most one
 * detection (the nearest / the one sharing most landmarks).
 */
std::vector<int> associate(const std::vector<Detection>& detections, const PoseSE3d& T_wc,
                           const FactorGraph& graph, const AssociationConfig& cfg);

struct InsertResult {
  bool ok = false;
  std::string diagnostic;
  int object = kNewObject;
  bool created = false;
};

/**
 * New detections are fitted and become object nodes; associated ones are
 * refined by pose-only optimization. Either way one camera-object edge is added.
 * A failed fit leaves the graph untouched.
 */
InsertResult insert_detection(FactorGraph& graph, int camera_id, const Detection& det,
                              int assignment, const DecoderSpec& prior, const FitConfig& fit_cfg,
                              const GraphConfig& graph_cfg);

}  // namespace objslam
