#include "objslam/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "objslam/error.hpp"

namespace objslam {

long Mask::count() const {
  return std::count(bits.begin(), bits.end(), std::uint8_t{1});
}

BoundingBox Mask::bounding_box() const {
  BoundingBox box{width, height, -1, -1};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!at(x, y)) continue;
      box.x_min = std::min(box.x_min, x);
      box.y_min = std::min(box.y_min, y);
      box.x_max = std::max(box.x_max, x);
      box.y_max = std::max(box.y_max, y);
    }
  }
  if (box.x_max < 0) return BoundingBox{};
  return box;
}

std::vector<int> Mask::run_lengths() const {
  std::vector<int> runs;
  std::uint8_t current = 0;
  int length = 0;
  for (auto b : bits) {
    if (b != current) {
      runs.push_back(length);
      current = b;
      length = 0;
    }
    ++length;
  }
  runs.push_back(length);
  return runs;
}

Mask Mask::from_run_lengths(int width, int height, const std::vector<int>& runs) {
  Mask m(width, height);
  const long total = static_cast<long>(width) * height;
  if (std::accumulate(runs.begin(), runs.end(), 0L) != total) {
    throw ParameterError("mask: run lengths do not cover the image");
  }
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (int run : runs) {
    if (run < 0) throw ParameterError("mask: negative run length");
    std::fill_n(m.bits.begin() + static_cast<long>(pos), run, value);
    pos += static_cast<std::size_t>(run);
    value ^= 1;
  }
  return m;
}

void Detection::validate() const {
  for (const auto& obs : surface) {
    if (!(obs.depth > 0.0)) throw ParameterError("detection: non-positive surface depth");
    const int x = static_cast<int>(std::lround(obs.pixel.x()));
    const int y = static_cast<int>(std::lround(obs.pixel.y()));
    if (!mask.at(x, y)) throw ParameterError("detection: surface pixel outside the mask");
  }
  if (ground_normal && std::abs(ground_normal->norm() - 1.0) > 1e-9) {
    throw ParameterError("detection: ground normal is not unit length");
  }
  if (!(init_pose.scale() > 0.0)) throw ParameterError("detection: non-positive initial scale");
}

}  // namespace objslam
