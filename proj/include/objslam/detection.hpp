#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "objslam/lie.hpp"

namespace objslam {

/// Inclusive pixel box. Empty when x_max < x_min.
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;

  bool empty() const { return x_max < x_min || y_max < y_min; }
  bool contains(int x, int y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  long area() const {
    return empty() ? 0 : static_cast<long>(x_max - x_min + 1) * (y_max - y_min + 1);
  }
};

/// Full-image binary mask.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  long count() const;
  BoundingBox bounding_box() const;

  /// Alternating run lengths starting with a run of zeros.
  std::vector<int> run_lengths() const;
  static Mask from_run_lengths(int width, int height, const std::vector<int>& runs);
};

struct SurfaceObservation {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
};

/// One observed object instance in one frame.
struct Detection {
  BoundingBox bbox;
  Mask mask;
  std::vector<SurfaceObservation> surface;
  PoseSim3d init_pose;  // T_co
  std::optional<Eigen::Vector3d> ground_normal;  // camera frame, unit
  std::vector<int> landmark_ids;  // map points seen inside the mask

  /// Throws ParameterError when an invariant is violated.
  void validate() const;
};

}  // namespace objslam
