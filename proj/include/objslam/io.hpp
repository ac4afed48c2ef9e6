#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "objslam/graph.hpp"
#include "objslam/lie.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"
#include "objslam/simkit.hpp"

/**
 * Text formats are line oriented: a keyword followed by whitespace separated
 * values, doubles written in their shortest round-trip form.
 * Readers throw FormatError carrying the 1-based line number.
 */
namespace objslam {

namespace fs = std::filesystem;

std::string format_double(double v);

void write_scene(const fs::path& path, const SceneSpec& scene);
SceneSpec read_scene(const fs::path& path);

/// Frame observations plus the world pose of the first camera (the gauge).
struct FrameLog {
  PoseSE3d origin;
  std::vector<FrameObservation> frames;
};

void write_frames(const fs::path& path, const FrameLog& log);
FrameLog read_frames(const fs::path& path);

/// Text header "objslam-depth 1", size and intrinsics, then little-endian float32 rows.
void write_depth(const fs::path& path, const DepthImage& image);
DepthImage read_depth(const fs::path& path);

void write_obj(const fs::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const fs::path& path);

void write_ply(const fs::path& path, const std::vector<Eigen::Vector3d>& points);
std::vector<Eigen::Vector3d> read_ply(const fs::path& path);

void write_graph(const fs::path& path, const FactorGraph& graph);
FactorGraph read_graph(const fs::path& path);

/// One "timestamp tx ty tz qx qy qz qw" line per pose; the timestamp is the index.
void write_trajectory(const fs::path& path, const std::vector<PoseSE3d>& poses);
std::vector<PoseSE3d> read_trajectory(const fs::path& path);

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

 private:
  std::size_t columns_;
  std::ofstream out_;
};

}  // namespace objslam
