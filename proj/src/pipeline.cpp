#include "objslam/pipeline.hpp"

namespace objslam {

namespace {

void bundle_adjust(SlamResult& out, const SlamConfig& cfg) {
  if (cfg.object_edges) {
    out.ba_runs.push_back(optimize_graph(out.graph, cfg.graph));
  } else {
    FactorGraph reduced = without_object_edges(out.graph);
    out.ba_runs.push_back(optimize_graph(reduced, cfg.graph));
    reduced.co_edges = std::move(out.graph.co_edges);
    out.graph = std::move(reduced);
  }
  if (!out.ba_runs.back().ok) {
    out.ok = false;
    out.diagnostics.push_back(out.ba_runs.back().diagnostic);
  }
}

}  // namespace

FactorGraph without_object_edges(const FactorGraph& graph) {
  FactorGraph g = graph;
  g.co_edges.clear();
  return g;
}

SlamResult run_slam(const FrameLog& log, const Camera& camera, const DecoderSpec& prior,
                    const SlamConfig& cfg) {
  SlamResult out;
  out.graph.camera = camera;
  std::vector<int> camera_ids;
  PoseSE3d T_wc = log.origin;
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    const FrameObservation& frame = log.frames[i];
    if (i > 0) T_wc = T_wc * frame.odometry;
    out.odometry_trajectory.push_back(T_wc);
    // Later frames start from the optimized previous pose.
    const PoseSE3d T_init =
        i == 0 ? T_wc : out.graph.cameras.at(camera_ids.back()).T_wc * frame.odometry;
    out.graph.cameras[frame.camera_id] = {T_init, false};
    camera_ids.push_back(frame.camera_id);

    for (const PointObservation& p : frame.points) {
      if (!out.graph.points.count(p.id)) {
        out.graph.points[p.id] = T_init * (camera.ray(p.pixel) * p.depth);
      }
      out.graph.cp_edges.push_back({frame.camera_id, p.id, p.pixel, cfg.graph.cp_covariance()});
    }

    const std::vector<int> assignment =
        associate(frame.detections, T_init, out.graph, cfg.assoc);
    for (std::size_t d = 0; d < frame.detections.size(); ++d) {
      const int gt = d < frame.gt_associations.size() ? frame.gt_associations[d] : -1;
      const InsertResult r = insert_detection(out.graph, frame.camera_id, frame.detections[d],
                                              assignment[d], prior, cfg.fit, cfg.graph);
      if (!r.ok) {
        ++out.stats.dropped;
        out.diagnostics.push_back("frame " + std::to_string(frame.camera_id) + " detection " +
                                  std::to_string(d) + ": " + r.diagnostic);
        continue;
      }
      if (r.created) {
        ++out.stats.created;
        out.object_source[r.object] = gt;
      } else {
        ++out.stats.associated;
        if (out.object_source[r.object] == gt) ++out.stats.correct;
      }
    }

    if (cfg.ba_every > 0 && (i + 1) % cfg.ba_every == 0 && i + 1 < log.frames.size()) {
      bundle_adjust(out, cfg);
    }
  }
  if (!log.frames.empty()) bundle_adjust(out, cfg);
  for (int id : camera_ids) out.trajectory.push_back(out.graph.cameras.at(id).T_wc);
  return out;
}

}  // namespace objslam
