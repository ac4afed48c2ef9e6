#pragma once

#include <map>
#include <string>
#include <vector>

#include "objslam/config.hpp"
#include "objslam/graph.hpp"
#include "objslam/io.hpp"

namespace objslam {

struct AssociationStats {
  int associated = 0;  // detections matched to an existing object
  int correct = 0;     // ... whose object was created from the same ground-truth object
  int created = 0;
  int dropped = 0;     // failed fits
};

struct SlamResult {
  FactorGraph graph;
  std::vector<PoseSE3d> odometry_trajectory;  // dead reckoning from the origin
  std::vector<PoseSE3d> trajectory;           // graph cameras in frame order
  std::map<int, int> object_source;           // object id -> ground-truth object index
  AssociationStats stats;
  std::vector<GraphOptimizeResult> ba_runs;
  std::vector<std::string> diagnostics;
  bool ok = true;  // false when a bundle adjustment failed
};

/**
 * Sequential front end: dead-reckon the camera, triangulate new points from
 * their first depth observation, associate and insert detections, and run
 * bundle adjustment every `ba_every` frames and once at the end.
 */
SlamResult run_slam(const FrameLog& log, const Camera& camera, const DecoderSpec& prior,
                    const SlamConfig& cfg);

/// Copy of `graph` without camera-object edges.
FactorGraph without_object_edges(const FactorGraph& graph);

}  // namespace objslam
