#pragma once

#include <filesystem>
#include <string>

#include "objslam/graph.hpp"
#include "objslam/simkit.hpp"
#include "objslam/solver.hpp"

/**
 * Experiment configuration: a TOML subset with [section] headers,
 * `key = value` lines, numbers, booleans, double-quoted strings and `#`
 * comments. Unknown sections or keys are errors.
 */
namespace objslam {

enum class SceneKind { kSingle, kLoop };

struct SlamConfig {
  FitConfig fit;
  AssociationConfig assoc;
  GraphConfig graph;
  int ba_every = 10;          // frames between bundle adjustments; 0 = final only
  bool object_edges = true;   // keep camera-object edges in the bundle adjustment
};

struct Config {
  SceneKind scene = SceneKind::kSingle;
  SingleObjectOptions single;
  LoopOptions loop;
  double init_scale_bias = 1.0;
  NoiseModel noise;
  int mesh_resolution = 40;
  SlamConfig slam;

  /// Scene for the configured kind, with the shared seed and noise applied.
  SceneSpec make_scene() const;
};

/// Throws FormatError with the offending line.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Every key with its current value, in a form parse_config accepts.
std::string format_config(const Config& config);

}  // namespace objslam
