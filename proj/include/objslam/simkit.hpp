#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "objslam/detection.hpp"
#include "objslam/lie.hpp"
#include "objslam/prior.hpp"
#include "objslam/render.hpp"

/**
 * Synthetic scenes. World frame is y-up; object frames are y-up with x along
 * the longest base extent; cameras are x-right, y-down, z-forward.
 */
namespace objslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;

struct SceneObject {
  ShapeCode z;
  PoseSim3d T_wo;
  DecoderSpec spec;
  /// Object-frame boxes the sampled surface points must fall in; empty means anywhere.
  std::vector<Eigen::AlignedBox3d> sample_regions;
};

struct Landmark {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// Unit normal and half-angle of the cone it can be seen from; a zero normal means omnidirectional.
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  double cone_deg = 180.0;
};

struct NoiseModel {
  double depth = 0.0;   // meters, surface samples and landmark depths
  double pixel = 0.0;   // pixels, landmark observations
  Vector6d odometry = Vector6d::Zero();  // per-axis twist sigma [t; r]
  double init_rotation_deg = 0.0;  // detection init-pose perturbation
  double init_translation = 0.0;   // fraction of the object's distance to the camera
  double init_scale = 0.0;         // fraction
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<PoseSE3d> trajectory;  // T_wc
  std::vector<Landmark> landmarks;
  Camera camera;
  NoiseModel noise;
  std::uint64_t seed = 0;
  int surface_points = 250;
  int object_landmarks = 40;  // surface landmarks per object, appended after `landmarks`
  int min_mask_pixels = 50;
  bool ground_normal = false;
  /// Scale-factor bias on the detection init pose, applied about the object-frame point
  /// `init_anchor` before the random perturbation.
  double init_scale_bias = 1.0;
  Eigen::Vector3d init_anchor = Eigen::Vector3d::Zero();

  void validate() const;
};

struct PointObservation {
  int id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
};

struct FrameObservation {
  int camera_id = 0;
  std::vector<Detection> detections;
  std::vector<int> gt_associations;  // detection index -> object index
  PoseSE3d odometry;                 // measured T_{c(i-1) c(i)}; identity for the first frame
  std::vector<PointObservation> points;
};

/// First intersection of a camera ray with a decoded shape by sphere tracing.
struct RayHit {
  bool hit = false;
  double depth = 0.0;  // camera z
};

constexpr int kSphereTraceSteps = 128;
constexpr double kSphereTraceTolerance = 1e-6;

RayHit sphere_trace(const Camera& camera, const Eigen::Vector2d& pixel, const PoseSim3d& T_co,
                    const DecodedShape& shape, const DecoderSpec& spec);

struct GroundTruthView {
  DepthImage depth;  // first-hit depth, 0 where the ray misses
  Mask mask;
  BoundingBox bbox;  // empty when nothing is visible
};

GroundTruthView render_gt(const SceneObject& object, const PoseSE3d& T_wc, const Camera& camera);

struct SurfaceSamples {
  std::vector<SurfaceObservation> samples;
  std::string warning;
};

/**
 * `n` mask pixels in a seed-determined order with their (noisy) first-hit depths.
 * The order does not depend on `n`, so smaller sets are prefixes of larger ones.
 */
SurfaceSamples sample_surface_points(const SceneObject& object, const PoseSE3d& T_wc,
                                     const Camera& camera, int n, double depth_noise,
                                     std::uint64_t seed);
SurfaceSamples sample_surface_points(const SceneObject& object, const GroundTruthView& view,
                                     const PoseSE3d& T_wc, const Camera& camera, int n,
                                     double depth_noise, std::uint64_t seed);

/// PCA box fit of an object point cloud and its 180-degree yaw twin.
std::pair<PoseSim3d, PoseSim3d> pca_init_pose(const std::vector<Eigen::Vector3d>& points_world,
                                              const DecoderSpec& spec);

/// Points on the decoded surface seen along rays through the object's bounding sphere.
std::vector<Eigen::Vector3d> object_landmarks(const SceneObject& object, int count,
                                              std::uint64_t seed);

std::vector<FrameObservation> make_frames(const SceneSpec& scene);

/// All landmarks of the scene: explicit ones followed by per-object surface landmarks.
std::vector<Landmark> all_landmarks(const SceneSpec& scene);

/// Zero-mean Gaussian twist with per-axis sigma.
Vector6d sample_twist(const Vector6d& sigma, std::mt19937_64& rng);

/// Car-like rounded box: base half extents (1.0, 0.33, 0.40), roundness 0.08.
DecoderSpec car_spec(int code_dim = 8);

struct SingleObjectOptions {
  std::uint64_t seed = 1;
  double distance = 9.0;
  double azimuth_deg = 30.0;   // camera direction around the object, 0 = behind (-x)
  double elevation_deg = 12.0;
  double scale = 2.25;
  double code_sigma = 0.3;     // GT code entries ~ N(0, code_sigma)
  int surface_points = 250;
  NoiseModel noise;
  bool partial = false;        // samples only inside the rear and side faces seen by the camera
};

SceneSpec single_object_scene(const SingleObjectOptions& options);

struct LoopOptions {
  std::uint64_t seed = 1;
  int cameras = 30;
  double radius = 12.0;
  int objects = 2;
  int wall_landmarks = 240;
  double landmark_cone_deg = 35.0;
  NoiseModel noise;
};

SceneSpec loop_scene(const LoopOptions& options);

}  // namespace objslam
