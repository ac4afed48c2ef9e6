#include "objslam/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "objslam/error.hpp"

namespace objslam {

namespace {

bool is_spd(const Eigen::MatrixXd& m) {
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

// Squared whitened norm m2 -> robust cost and IRLS weight.
std::pair<double, double> robust(double m2, const GraphConfig& cfg) {
  if (!cfg.huber) return {m2, 1.0};
  const double m = std::sqrt(m2);
  if (m <= cfg.huber_delta) return {m2, 1.0};
  return {2.0 * cfg.huber_delta * m - cfg.huber_delta * cfg.huber_delta, cfg.huber_delta / m};
}

struct Layout {
  std::map<int, int> camera_var;  // camera id -> pose block index
  std::map<int, int> object_var;
  std::map<int, int> point_var;   // point id -> point block index
  int pose_blocks = 0;
  int point_blocks = 0;
};

// Points seen from at least two cameras; the others only echo their own initialization.
std::set<int> constrained_points(const FactorGraph& graph) {
  std::map<int, std::set<int>> observers;
  for (const auto& e : graph.cp_edges) observers[e.point].insert(e.camera);
  std::set<int> out;
  for (const auto& [id, cams] : observers) {
    if (cams.size() >= 2) out.insert(id);
  }
  return out;
}

Layout make_layout(const FactorGraph& graph) {
  Layout layout;
  const int anchor = graph.cameras.empty() ? 0 : graph.cameras.begin()->first;
  const std::set<int> points = constrained_points(graph);
  // Nodes without active edges carry no information and stay put.
  std::set<int> linked_cameras;
  std::set<int> linked_objects;
  for (const auto& e : graph.co_edges) {
    linked_cameras.insert(e.camera);
    linked_objects.insert(e.object);
  }
  for (const auto& e : graph.cp_edges) {
    if (points.count(e.point)) linked_cameras.insert(e.camera);
  }
  for (const auto& [id, cam] : graph.cameras) {
    if (id == anchor || cam.fixed || !linked_cameras.count(id)) continue;
    layout.camera_var[id] = layout.pose_blocks++;
  }
  for (const auto& [id, obj] : graph.objects) {
    if (linked_objects.count(id)) layout.object_var[id] = layout.pose_blocks++;
  }
  for (int id : points) layout.point_var[id] = layout.point_blocks++;
  return layout;
}

void apply_update(FactorGraph& graph, const Layout& layout, const Eigen::VectorXd& dx,
                  const std::vector<Eigen::Vector3d>& dp) {
  for (const auto& [id, k] : layout.camera_var) {
    auto& T = graph.cameras.at(id).T_wc;
    const PoseSE3d next = exp_se3<double>(dx.segment<6>(6 * k)) * T;
    T = PoseSE3d(orthonormalize(next.rotation()), next.translation());
  }
  for (const auto& [id, k] : layout.object_var) {
    auto& T = graph.objects.at(id).T_wo;
    const PoseSE3d next = exp_se3<double>(dx.segment<6>(6 * k)) * T;
    T = PoseSE3d(orthonormalize(next.rotation()), next.translation());
  }
  for (const auto& [id, k] : layout.point_var) graph.points.at(id) += dp[k];
}

}  // namespace

void FactorGraph::validate() const {
  for (const auto& e : co_edges) {
    if (!cameras.count(e.camera) || !objects.count(e.object)) {
      throw ParameterError("graph: camera-object edge references a missing node");
    }
    if (!is_spd(e.covariance)) throw ParameterError("graph: co covariance is not SPD");
  }
  for (const auto& e : cp_edges) {
    if (!cameras.count(e.camera) || !points.count(e.point)) {
      throw ParameterError("graph: camera-point edge references a missing node");
    }
    if (!is_spd(e.covariance)) throw ParameterError("graph: cp covariance is not SPD");
  }
  for (const auto& [id, obj] : objects) {
    if (!(obj.scale > 0.0)) throw ParameterError("graph: non-positive object scale");
  }
}

Vector6d co_residual(const PoseSE3d& T_wc, const PoseSE3d& T_wo, const PoseSE3d& T_co) {
  return log_se3<double>(T_co.inverse() * T_wc.inverse() * T_wo);
}

CoJacobians co_jacobians(const PoseSE3d& T_wc, const PoseSE3d& T_wo, const PoseSE3d& T_co) {
  const Vector6d e = co_residual(T_wc, T_wo, T_co);
  const Matrix6d J = right_jacobian_se3_inverse<double>(e) * T_wo.inverse().adjoint();
  return {-J, J};
}

std::optional<Eigen::Vector2d> cp_residual(const PoseSE3d& T_wc, const Eigen::Vector3d& p_w,
                                           const Eigen::Vector2d& pixel, const Camera& camera) {
  const Eigen::Vector3d p_c = T_wc.inverse() * p_w;
  if (p_c.z() <= 1e-6) return std::nullopt;
  return camera.project(p_c) - pixel;
}

CpJacobians cp_jacobians(const PoseSE3d& T_wc, const Eigen::Vector3d& p_w, const Camera& camera) {
  const Eigen::Matrix3d Rt = T_wc.rotation().transpose();
  const Eigen::Vector3d p_c = Rt * (p_w - T_wc.translation());
  const double iz = 1.0 / p_c.z();
  Eigen::Matrix<double, 2, 3> P;
  P << camera.fx() * iz, 0.0, -camera.fx() * p_c.x() * iz * iz,
       0.0, camera.fy() * iz, -camera.fy() * p_c.y() * iz * iz;
  CpJacobians J;
  J.d_camera.leftCols<3>() = -P * Rt;
  J.d_camera.rightCols<3>() = P * Rt * skew(p_w);
  J.d_point = P * Rt;
  return J;
}

Matrix6d GraphConfig::co_covariance() const {
  Vector6d d;
  d << Eigen::Vector3d::Constant(sigma_co_translation * sigma_co_translation),
      Eigen::Vector3d::Constant(sigma_co_rotation * sigma_co_rotation);
  return d.asDiagonal();
}

Eigen::Matrix2d GraphConfig::cp_covariance() const {
  return sigma_pixel * sigma_pixel * Eigen::Matrix2d::Identity();
}

GraphCost graph_cost(const FactorGraph& graph, const GraphConfig& cfg) {
  GraphCost cost;
  for (const auto& e : graph.co_edges) {
    const Vector6d r = co_residual(graph.cameras.at(e.camera).T_wc, graph.objects.at(e.object).T_wo,
                                   e.T_co);
    cost.co += robust(r.dot(e.covariance.ldlt().solve(r)), cfg).first;
  }
  const std::set<int> points = constrained_points(graph);
  for (const auto& e : graph.cp_edges) {
    if (!points.count(e.point)) {
      ++cost.inactive_cp;
      continue;
    }
    const auto r =
        cp_residual(graph.cameras.at(e.camera).T_wc, graph.points.at(e.point), e.pixel, graph.camera);
    if (!r) {
      ++cost.disabled_cp;
      continue;
    }
    cost.cp += robust(r->dot(e.covariance.ldlt().solve(*r)), cfg).first;
  }
  return cost;
}

GraphOptimizeResult optimize_graph(FactorGraph& graph, const GraphConfig& cfg) {
  graph.validate();
  GraphOptimizeResult result;
  double current = graph_cost(graph, cfg).total();
  result.cost_trace.push_back(current);
  if (!std::isfinite(current)) {
    result.diagnostic = "optimize_graph: non-finite initial cost";
    return result;
  }
  if (current <= cfg.cost_tol) {
    result.ok = true;
    return result;
  }

  const Layout layout = make_layout(graph);
  const int n = 6 * layout.pose_blocks;
  double lambda = cfg.damping;

  for (int it = 0; it < cfg.max_iters; ++it) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Matrix3d> C(layout.point_blocks, Eigen::Matrix3d::Zero());
    std::vector<Eigen::Vector3d> b(layout.point_blocks, Eigen::Vector3d::Zero());
    std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 6, 3>>>> W(layout.point_blocks);

    for (const auto& e : graph.co_edges) {
      const PoseSE3d& T_wc = graph.cameras.at(e.camera).T_wc;
      const PoseSE3d& T_wo = graph.objects.at(e.object).T_wo;
      const Vector6d r = co_residual(T_wc, T_wo, e.T_co);
      const Matrix6d info = e.covariance.inverse();
      const double w = robust(r.dot(info * r), cfg).second;
      const CoJacobians J = co_jacobians(T_wc, T_wo, e.T_co);
      const auto cam = layout.camera_var.find(e.camera);
      const int ci = cam == layout.camera_var.end() ? -1 : cam->second;
      const int oi = layout.object_var.at(e.object);
      const Matrix6d Jo_info = w * J.d_object.transpose() * info;
      A.block<6, 6>(6 * oi, 6 * oi) += Jo_info * J.d_object;
      a.segment<6>(6 * oi) += Jo_info * r;
      if (ci >= 0) {
        const Matrix6d Jc_info = w * J.d_camera.transpose() * info;
        A.block<6, 6>(6 * ci, 6 * ci) += Jc_info * J.d_camera;
        A.block<6, 6>(6 * ci, 6 * oi) += Jc_info * J.d_object;
        A.block<6, 6>(6 * oi, 6 * ci) += Jo_info * J.d_camera;
        a.segment<6>(6 * ci) += Jc_info * r;
      }
    }

    for (const auto& e : graph.cp_edges) {
      const auto pt = layout.point_var.find(e.point);
      if (pt == layout.point_var.end()) continue;
      const int pi = pt->second;
      const PoseSE3d& T_wc = graph.cameras.at(e.camera).T_wc;
      const Eigen::Vector3d& p = graph.points.at(e.point);
      const auto r = cp_residual(T_wc, p, e.pixel, graph.camera);
      if (!r) continue;
      const Eigen::Matrix2d info = e.covariance.inverse();
      const double w = robust(r->dot(info * *r), cfg).second;
      const CpJacobians J = cp_jacobians(T_wc, p, graph.camera);
      const auto cam = layout.camera_var.find(e.camera);
      const int ci = cam == layout.camera_var.end() ? -1 : cam->second;
      if (ci >= 0) {
        const Eigen::Matrix<double, 6, 2> Jc_info = w * J.d_camera.transpose() * info;
        A.block<6, 6>(6 * ci, 6 * ci) += Jc_info * J.d_camera;
        a.segment<6>(6 * ci) += Jc_info * *r;
        W[pi].emplace_back(ci, Jc_info * J.d_point);
      }
      const Eigen::Matrix<double, 3, 2> Jp_info = w * J.d_point.transpose() * info;
      C[pi] += Jp_info * J.d_point;
      b[pi] += Jp_info * *r;
    }

    bool accepted = false;
    bool singular = false;
    int escalations = 0;
    Eigen::VectorXd dx;
    std::vector<Eigen::Vector3d> dp(layout.point_blocks);
    while (escalations <= cfg.max_damping_escalations) {
      Eigen::MatrixXd S = A;
      S.diagonal() += lambda * A.diagonal();
      Eigen::VectorXd rhs = -a;
      std::vector<Eigen::Matrix3d> C_inv(layout.point_blocks);
      singular = false;
      for (int j = 0; j < layout.point_blocks; ++j) {
        Eigen::Matrix3d Cj = C[j];
        Cj.diagonal() += lambda * C[j].diagonal();
        Eigen::LLT<Eigen::Matrix3d> llt(Cj);
        if (llt.info() != Eigen::Success) {
          singular = true;
          break;
        }
        C_inv[j] = llt.solve(Eigen::Matrix3d::Identity());
        for (const auto& [c1, W1] : W[j]) {
          const Eigen::Matrix<double, 6, 3> W1C = W1 * C_inv[j];
          rhs.segment<6>(6 * c1) += W1C * b[j];
          for (const auto& [c2, W2] : W[j]) S.block<6, 6>(6 * c1, 6 * c2) -= W1C * W2.transpose();
        }
      }
      if (!singular) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
        singular = ldlt.info() != Eigen::Success || !ldlt.isPositive();
        if (!singular) {
          dx = n > 0 ? Eigen::VectorXd(ldlt.solve(rhs)) : Eigen::VectorXd();
          singular = !dx.allFinite();
        }
      }
      if (singular) {
        lambda = std::max(lambda * 10.0, 1e-9);
        ++escalations;
        continue;
      }
      double step2 = dx.squaredNorm();
      for (int j = 0; j < layout.point_blocks; ++j) {
        Eigen::Vector3d rj = -b[j];
        for (const auto& [c, Wc] : W[j]) rj -= Wc.transpose() * dx.segment<6>(6 * c);
        dp[j] = C_inv[j] * rj;
        step2 += dp[j].squaredNorm();
      }
      FactorGraph candidate = graph;
      apply_update(candidate, layout, dx, dp);
      const double cost = graph_cost(candidate, cfg).total();
      if (std::isfinite(cost) && cost <= current) {
        graph = std::move(candidate);
        current = cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        ++result.iterations;
        result.cost_trace.push_back(current);
        if (std::sqrt(step2) < cfg.convergence_tol) {
          result.ok = true;
          return result;
        }
        break;
      }
      lambda *= 10.0;
      ++escalations;
    }
    if (!accepted) {
      if (singular) {
        result.diagnostic = "optimize_graph: singular system after maximum damping";
        return result;
      }
      break;  // no further decrease available
    }
    if (current <= cfg.cost_tol) break;
  }
  result.ok = true;
  return result;
}

const char* to_string(AssociationMode mode) {
  return mode == AssociationMode::kLidar ? "lidar" : "visual";
}

AssociationMode association_mode_from_string(const std::string& name) {
  if (name == "lidar") return AssociationMode::kLidar;
  if (name == "visual") return AssociationMode::kVisual;
  throw ParameterError("unknown association mode '" + name + "'");
}

std::vector<int> associate(const std::vector<Detection>& detections, const PoseSE3d& T_wc,
                           const FactorGraph& graph, const AssociationConfig& cfg) {
  std::vector<int> out(detections.size(), kNewObject);
  std::vector<double> score(detections.size(), 0.0);  // lower is better
  for (std::size_t d = 0; d < detections.size(); ++d) {
    const Detection& det = detections[d];
    const Eigen::Vector3d center = T_wc * det.init_pose.translation();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, obj] : graph.objects) {
      double s;
      if (cfg.mode == AssociationMode::kLidar) {
        s = (center - obj.T_wo.translation()).norm();
        if (s > cfg.tau) continue;
      } else {
        int shared = 0;
        for (int l : det.landmark_ids) shared += static_cast<int>(obj.landmark_ids.count(l));
        if (shared < cfg.min_shared) continue;
        s = -shared;
      }
      if (s < best) {
        best = s;
        out[d] = id;
        score[d] = s;
      }
    }
  }
  // One detection per object: keep the best, reject the others.
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (out[d] == kNewObject) continue;
    for (std::size_t e = 0; e < detections.size(); ++e) {
      if (e == d || out[e] != out[d]) continue;
      if (score[e] < score[d] || (score[e] == score[d] && e < d)) {
        out[d] = kNewObject;
        break;
      }
    }
  }
  return out;
}

InsertResult insert_detection(FactorGraph& graph, int camera_id, const Detection& det,
                              int assignment, const DecoderSpec& prior, const FitConfig& fit_cfg,
                              const GraphConfig& graph_cfg) {
  InsertResult result;
  const auto cam = graph.cameras.find(camera_id);
  if (cam == graph.cameras.end()) {
    result.diagnostic = "insert_detection: unknown camera";
    return result;
  }
  const PoseSE3d& T_wc = cam->second.T_wc;

  if (assignment == kNewObject) {
    const FitResult fit = fit_object(det, graph.camera, prior, fit_cfg);
    if (!fit.ok) {
      result.diagnostic = fit.diagnostic;
      return result;
    }
    ObjectNode node;
    node.T_wo = T_wc * fit.pose.se3();
    node.scale = fit.pose.scale();
    node.z = fit.z;
    node.spec = prior;
    node.landmark_ids.insert(det.landmark_ids.begin(), det.landmark_ids.end());
    const int id = graph.next_object_id();
    graph.objects.emplace(id, std::move(node));
    graph.co_edges.push_back({camera_id, id, fit.pose.se3(), graph_cfg.co_covariance()});
    result.ok = true;
    result.object = id;
    result.created = true;
    return result;
  }

  const auto obj = graph.objects.find(assignment);
  if (obj == graph.objects.end()) {
    result.diagnostic = "insert_detection: unknown object";
    return result;
  }
  const PoseSim3d predicted = T_wc.inverse().sim3() * obj->second.sim3();
  const PoseOnlyResult refined =
      pose_only_optimize(det, predicted, obj->second.z, obj->second.spec, graph.camera, fit_cfg);
  if (!refined.ok) {
    result.diagnostic = refined.diagnostic;
    return result;
  }
  obj->second.landmark_ids.insert(det.landmark_ids.begin(), det.landmark_ids.end());
  graph.co_edges.push_back({camera_id, assignment, refined.pose.se3(), graph_cfg.co_covariance()});
  result.ok = true;
  result.object = assignment;
  return result;
}

}  // namespace objslam
