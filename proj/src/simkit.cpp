#include "objslam/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "objslam/error.hpp"

namespace objslam {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

Eigen::Matrix3d yaw_rotation(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

PoseSE3d look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
  const Eigen::Vector3d z = (target - center).normalized();
  const Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitY()).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R;
  R << x, y, z;
  return PoseSE3d(R, center);
}

PoseSim3d camera_from_object(const PoseSE3d& T_wc, const PoseSim3d& T_wo) {
  return T_wc.inverse().sim3() * T_wo;
}

// Sphere tracing in the object frame from `origin` along unit `dir`, t in [t0, t1].
RayHit trace_object_frame(const DecodedShape& shape, double lipschitz, const Eigen::Vector3d& origin,
                          const Eigen::Vector3d& dir, double t0, double t1) {
  double t = t0;
  for (int step = 0; step < kSphereTraceSteps; ++step) {
    const double f = sdf(shape, origin + t * dir);
    if (std::abs(f) <= kSphereTraceTolerance) return {true, t};
    t += f / lipschitz;
    if (t > t1) break;
  }
  return {};
}

PoseSim3d perturb_init(const PoseSim3d& T_co, const NoiseModel& noise, double bias,
                       const Eigen::Vector3d& anchor, std::mt19937_64& rng) {
  Eigen::Matrix3d R = T_co.rotation();
  double s = T_co.scale() * bias;
  Eigen::Vector3d t = T_co.translation() + (T_co.scale() - s) * (R * anchor);
  if (noise.init_rotation_deg > 0.0) {
    R = R * exp_so3<double>(deg2rad(noise.init_rotation_deg) * random_unit(rng));
  }
  if (noise.init_translation > 0.0) {
    t += noise.init_translation * T_co.translation().norm() * random_unit(rng);
  }
  if (noise.init_scale > 0.0) {
    std::bernoulli_distribution coin(0.5);
    s *= coin(rng) ? 1.0 + noise.init_scale : 1.0 - noise.init_scale;
  }
  return PoseSim3d(R, t, s);
}

}  // namespace

void SceneSpec::validate() const {
  camera.validate();
  if (trajectory.empty()) throw ParameterError("scene: empty trajectory");
  if (surface_points < 1) throw ParameterError("scene: surface_points must be >= 1");
  for (const auto& obj : objects) {
    obj.spec.validate();
    if (obj.z.size() != obj.spec.code_dim()) {
      throw ParameterError("scene: object code dimension does not match its decoder");
    }
    if (!(obj.T_wo.scale() > 0.0)) throw ParameterError("scene: non-positive object scale");
  }
  if (!(init_scale_bias > 0.0)) throw ParameterError("scene: init_scale_bias must be positive");
}

RayHit sphere_trace(const Camera& camera, const Eigen::Vector2d& pixel, const PoseSim3d& T_co,
                    const DecodedShape& shape, const DecoderSpec& spec) {
  const Eigen::Vector3d ray = camera.ray(pixel);
  const Eigen::Vector3d c = T_co.translation();
  const double rho = T_co.scale() * spec.bounding_radius();
  const double a = ray.squaredNorm();
  const double b = -2.0 * ray.dot(c);
  const double cc = c.squaredNorm() - rho * rho;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return {};
  const double t_far = (-b + std::sqrt(disc)) / (2.0 * a);
  const double t_near = std::max(0.0, (-b - std::sqrt(disc)) / (2.0 * a));
  if (t_far <= 0.0) return {};

  // Parameterize by camera depth t; object-frame arc length per unit t is |ray| / s.
  const PoseSim3d T_oc = T_co.inverse();
  const Eigen::Vector3d origin = T_oc.translation();
  const Eigen::Vector3d dir_obj = T_oc.rotation() * ray * T_oc.scale();
  const double speed = dir_obj.norm();
  const RayHit h = trace_object_frame(shape, spec.lipschitz_bound(), origin + t_near * dir_obj,
                                      dir_obj / speed, 0.0, (t_far - t_near) * speed);
  if (!h.hit) return {};
  return {true, t_near + h.depth / speed};
}

GroundTruthView render_gt(const SceneObject& object, const PoseSE3d& T_wc, const Camera& camera) {
  GroundTruthView view;
  view.depth.width = camera.width;
  view.depth.height = camera.height;
  view.depth.K = camera.K;
  view.depth.data.assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0f);
  view.mask = Mask(camera.width, camera.height);

  const PoseSim3d T_co = camera_from_object(T_wc, object.T_wo);
  const DecodedShape shape = decode_shape(object.z, object.spec);
  const double rho = T_co.scale() * object.spec.bounding_radius();
  const Eigen::Vector3d c = T_co.translation();

  int x0 = 0, y0 = 0, x1 = camera.width - 1, y1 = camera.height - 1;
  if (c.z() - rho > kDefaultNearPlane) {
    double u_min = 1e300, u_max = -1e300, v_min = 1e300, v_max = -1e300;
    for (int corner = 0; corner < 8; ++corner) {
      const Eigen::Vector3d p =
          c + rho * Eigen::Vector3d(corner & 1 ? 1 : -1, corner & 2 ? 1 : -1, corner & 4 ? 1 : -1);
      const Eigen::Vector2d uv = camera.project(p);
      u_min = std::min(u_min, uv.x());
      u_max = std::max(u_max, uv.x());
      v_min = std::min(v_min, uv.y());
      v_max = std::max(v_max, uv.y());
    }
    x0 = std::max(x0, static_cast<int>(std::floor(u_min)));
    y0 = std::max(y0, static_cast<int>(std::floor(v_min)));
    x1 = std::min(x1, static_cast<int>(std::ceil(u_max)));
    y1 = std::min(y1, static_cast<int>(std::ceil(v_max)));
  } else if (c.z() + rho <= kDefaultNearPlane) {
    return view;
  }

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const RayHit h = sphere_trace(camera, Eigen::Vector2d(x, y), T_co, shape, object.spec);
      if (!h.hit) continue;
      view.mask.set(x, y);
      view.depth.at(x, y) = static_cast<float>(h.depth);
    }
  }
  view.bbox = view.mask.bounding_box();
  return view;
}

SurfaceSamples sample_surface_points(const SceneObject& object, const PoseSE3d& T_wc,
                                     const Camera& camera, int n, double depth_noise,
                                     std::uint64_t seed) {
  return sample_surface_points(object, render_gt(object, T_wc, camera), T_wc, camera, n,
                               depth_noise, seed);
}

SurfaceSamples sample_surface_points(const SceneObject& object, const GroundTruthView& view,
                                     const PoseSE3d& T_wc, const Camera& camera, int n,
                                     double depth_noise, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample_surface_points: n must be >= 1");
  SurfaceSamples out;
  const PoseSim3d T_co = camera_from_object(T_wc, object.T_wo);
  const PoseSim3d T_oc = T_co.inverse();
  const DecodedShape shape = decode_shape(object.z, object.spec);

  std::vector<SurfaceObservation> candidates;
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      if (!view.mask.at(x, y)) continue;
      const Eigen::Vector2d px(x, y);
      // Re-trace in double precision; the depth image stores floats.
      const RayHit h = sphere_trace(camera, px, T_co, shape, object.spec);
      if (!h.hit) continue;
      const Eigen::Vector3d x_obj = T_oc * (h.depth * camera.ray(px));
      if (!object.sample_regions.empty() &&
          std::none_of(object.sample_regions.begin(), object.sample_regions.end(),
                       [&](const Eigen::AlignedBox3d& box) { return box.contains(x_obj); })) {
        continue;
      }
      candidates.push_back({px, h.depth});
    }
  }
  if (candidates.empty()) {
    out.warning = "sample_surface_points: object not visible";
    return out;
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(n), candidates.size());
  for (std::size_t i = 0; i < count; ++i) {
    SurfaceObservation obs = candidates[i];
    const double e = noise(rng);
    if (depth_noise > 0.0) obs.depth += depth_noise * e;
    out.samples.push_back(obs);
  }
  return out;
}

std::pair<PoseSim3d, PoseSim3d> pca_init_pose(const std::vector<Eigen::Vector3d>& points,
                                              const DecoderSpec& spec) {
  if (points.size() < 4) throw ParameterError("pca_init_pose: need at least 4 points");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - centroid) * (p - centroid).transpose();
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d values = eig.eigenvalues();  // ascending
  if (values(0) <= 1e-9 * std::max(values(2), 1e-300)) {
    throw ParameterError("pca_init_pose: degenerate (rank < 3) point set");
  }

  // Object axes ordered by decreasing base half extent receive principal axes by decreasing variance.
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return spec.base(a) > spec.base(b); });
  Eigen::Matrix3d R;
  for (int rank = 0; rank < 3; ++rank) R.col(order[rank]) = eig.eigenvectors().col(2 - rank);
  if (R.determinant() < 0.0) R.col(order[2]) *= -1.0;

  double lo = 1e300, hi = -1e300;
  const Eigen::Vector3d axis = R.col(order[0]);
  for (const auto& p : points) {
    const double proj = axis.dot(p - centroid);
    lo = std::min(lo, proj);
    hi = std::max(hi, proj);
  }
  const double scale = 0.5 * (hi - lo) / spec.base(order[0]);
  const PoseSim3d pose(R, centroid, scale);
  const Eigen::Matrix3d flip = Eigen::AngleAxisd(std::numbers::pi, R.col(1)).toRotationMatrix();
  return {pose, PoseSim3d(flip * R, centroid, scale)};
}

std::vector<Eigen::Vector3d> object_landmarks(const SceneObject& object, int count,
                                              std::uint64_t seed) {
  std::vector<Eigen::Vector3d> out;
  const DecodedShape shape = decode_shape(object.z, object.spec);
  const double R = object.spec.bounding_radius() * 1.01;
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 20 * count && static_cast<int>(out.size()) < count; ++attempt) {
    const Eigen::Vector3d u = random_unit(rng);
    const RayHit h = trace_object_frame(shape, object.spec.lipschitz_bound(), R * u, -u, 0.0, R);
    if (!h.hit) continue;
    out.push_back(object.T_wo * (R * u - h.depth * u));
  }
  return out;
}

std::vector<Landmark> all_landmarks(const SceneSpec& scene) {
  std::vector<Landmark> out = scene.landmarks;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    for (const auto& p : object_landmarks(scene.objects[j], scene.object_landmarks,
                                          scene.seed * 7919 + 104729 * (j + 1))) {
      out.push_back({p, Eigen::Vector3d::Zero(), 180.0});
    }
  }
  return out;
}

Vector6d sample_twist(const Vector6d& sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector6d v;
  for (int i = 0; i < 6; ++i) {
    const double e = n(rng);
    v(i) = sigma(i) > 0.0 ? sigma(i) * e : 0.0;
  }
  return v;
}

std::vector<FrameObservation> make_frames(const SceneSpec& scene) {
  scene.validate();
  const std::vector<Landmark> landmarks = all_landmarks(scene);
  const std::size_t explicit_count = scene.landmarks.size();
  std::vector<DecodedShape> shapes;
  for (const auto& obj : scene.objects) shapes.push_back(decode_shape(obj.z, obj.spec));

  std::vector<FrameObservation> frames;
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i) {
    const PoseSE3d& T_wc = scene.trajectory[i];
    const PoseSE3d T_cw = T_wc.inverse();
    FrameObservation frame;
    frame.camera_id = static_cast<int>(i);
    if (i > 0) {
      auto rng = make_rng(scene.seed, i, 0, 1);
      const PoseSE3d gt = scene.trajectory[i - 1].inverse() * T_wc;
      frame.odometry = gt * exp_se3<double>(sample_twist(scene.noise.odometry, rng));
    }

    // Landmark observations, also used to label detections with shared landmark ids.
    std::vector<std::vector<int>> seen_by_object(scene.objects.size());
    {
      auto rng = make_rng(scene.seed, i, 0, 3);
      std::normal_distribution<double> n(0.0, 1.0);
      for (std::size_t l = 0; l < landmarks.size(); ++l) {
        const Landmark& lm = landmarks[l];
        const Eigen::Vector3d p_c = T_cw * lm.position;
        if (p_c.z() <= kDefaultNearPlane) continue;
        const Eigen::Vector2d px = scene.camera.project(p_c);
        if (!scene.camera.contains(px)) continue;
        if (lm.normal.squaredNorm() > 0.0) {
          const Eigen::Vector3d view_dir = (T_wc.translation() - lm.position).normalized();
          if (view_dir.dot(lm.normal) < std::cos(deg2rad(lm.cone_deg))) continue;
        }
        if (l >= explicit_count) {
          const std::size_t j =
              (l - explicit_count) / static_cast<std::size_t>(scene.object_landmarks);
          const PoseSim3d T_co = camera_from_object(T_wc, scene.objects[j].T_wo);
          const RayHit h = sphere_trace(scene.camera, px, T_co, shapes[j], scene.objects[j].spec);
          if (!h.hit || std::abs(h.depth - p_c.z()) > 1e-4 * p_c.z()) continue;
          seen_by_object[j].push_back(static_cast<int>(l));
        }
        PointObservation obs{static_cast<int>(l), px, p_c.z()};
        const double eu = n(rng), ev = n(rng), ed = n(rng);
        if (scene.noise.pixel > 0.0) obs.pixel += scene.noise.pixel * Eigen::Vector2d(eu, ev);
        if (scene.noise.depth > 0.0) obs.depth += scene.noise.depth * ed;
        frame.points.push_back(obs);
      }
    }

    for (std::size_t j = 0; j < scene.objects.size(); ++j) {
      const SceneObject& obj = scene.objects[j];
      const PoseSim3d T_co = camera_from_object(T_wc, obj.T_wo);
      if (T_co.translation().z() <= kDefaultNearPlane) continue;
      const GroundTruthView view = render_gt(obj, T_wc, scene.camera);
      if (view.mask.count() < scene.min_mask_pixels) continue;
      const SurfaceSamples samples =
          sample_surface_points(obj, view, T_wc, scene.camera, scene.surface_points,
                                scene.noise.depth, scene.seed * 1000003 + 31 * i + j + 1);
      if (samples.samples.size() < 10) continue;
      Detection det;
      det.bbox = view.bbox;
      det.mask = view.mask;
      det.surface = samples.samples;
      auto rng = make_rng(scene.seed, i, j + 1, 2);
      det.init_pose = perturb_init(T_co, scene.noise, scene.init_scale_bias, scene.init_anchor, rng);
      if (scene.ground_normal) det.ground_normal = T_cw.rotation() * Eigen::Vector3d::UnitY();
      det.landmark_ids = seen_by_object[j];
      frame.detections.push_back(std::move(det));
      frame.gt_associations.push_back(static_cast<int>(j));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

DecoderSpec car_spec(int code_dim) {
  return DecoderSpec::rounded_box(Eigen::Vector3d(1.0, 0.33, 0.40), 0.08, code_dim, 0.3);
}

SceneSpec single_object_scene(const SingleObjectOptions& options) {
  SceneSpec scene;
  scene.seed = options.seed;
  scene.camera = Camera::from_intrinsics(250.0, 250.0, 160.0, 120.0, 320, 240);
  scene.noise = options.noise;
  scene.surface_points = options.surface_points;
  scene.object_landmarks = 0;

  auto rng = make_rng(options.seed, 0, 0, 9);
  std::uniform_real_distribution<double> uyaw(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> ncode(0.0, 1.0);
  SceneObject obj;
  obj.spec = car_spec();
  obj.z = ShapeCode::Zero(obj.spec.code_dim());
  for (int i = 0; i < obj.z.size(); ++i) {
    const double e = ncode(rng);
    obj.z(i) = options.code_sigma * e;
  }
  const double yaw = uyaw(rng);
  const DecodedShape shape = decode_shape(obj.z, obj.spec);
  const Eigen::Vector3d center(0.0, shape.params(1) * options.scale, 0.0);
  obj.T_wo = PoseSim3d(yaw_rotation(yaw), center, options.scale);
  if (options.partial) {
    const Eigen::Vector3d half = shape.params.head<3>();
    // Face interiors only: the fillets would reveal the size.
    const Eigen::Vector3d band(0.0, 0.75 * half.y(), 0.0);
    obj.sample_regions.emplace_back(Eigen::Vector3d(-2.0 * half.x(), -band.y(), -0.75 * half.z()),
                                    Eigen::Vector3d(-0.9 * half.x(), band.y(), 0.75 * half.z()));
    obj.sample_regions.emplace_back(Eigen::Vector3d(-0.9 * half.x(), -band.y(), 0.9 * half.z()),
                                    Eigen::Vector3d(0.9 * half.x(), band.y(), 2.0 * half.z()));
    scene.init_anchor = Eigen::Vector3d(-half.x(), 0.0, half.z());
  }
  scene.objects.push_back(obj);

  const double a = deg2rad(options.azimuth_deg);
  const double e = deg2rad(options.elevation_deg);
  const Eigen::Vector3d dir_obj(-std::cos(a) * std::cos(e), std::sin(e), std::sin(a) * std::cos(e));
  const Eigen::Vector3d eye = center + options.distance * (obj.T_wo.rotation() * dir_obj);
  scene.trajectory.push_back(look_at(eye, center));
  return scene;
}

SceneSpec loop_scene(const LoopOptions& options) {
  SceneSpec scene;
  scene.seed = options.seed;
  scene.camera = Camera::from_intrinsics(250.0, 250.0, 160.0, 120.0, 320, 240);
  scene.noise = options.noise;
  scene.ground_normal = true;

  auto rng = make_rng(options.seed, 0, 0, 10);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> ncode(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  for (int j = 0; j < options.objects; ++j) {
    SceneObject obj;
    obj.spec = car_spec();
    obj.z = ShapeCode::Zero(obj.spec.code_dim());
    for (int i = 0; i < obj.z.size(); ++i) {
      const double e = ncode(rng);
      obj.z(i) = 0.3 * e;
    }
    const double scale = 2.25 * (0.9 + 0.2 * u01(rng));
    const double angle = two_pi * j / options.objects + 0.5 * u01(rng);
    const double yaw = two_pi * u01(rng);
    const DecodedShape shape = decode_shape(obj.z, obj.spec);
    const Eigen::Vector3d center(2.5 * std::cos(angle), shape.params(1) * scale,
                                 2.5 * std::sin(angle));
    obj.T_wo = PoseSim3d(yaw_rotation(yaw), center, scale);
    scene.objects.push_back(obj);
  }

  for (int l = 0; l < options.wall_landmarks; ++l) {
    const double angle = two_pi * u01(rng);
    const double radius = 5.0 + 5.0 * u01(rng);
    const double height = 4.0 * u01(rng);
    const double tilt = deg2rad(60.0) * (u01(rng) - 0.5);
    Landmark lm;
    lm.position = Eigen::Vector3d(radius * std::cos(angle), height, radius * std::sin(angle));
    lm.normal = Eigen::Vector3d(std::cos(angle + tilt), 0.0, std::sin(angle + tilt));
    lm.cone_deg = options.landmark_cone_deg;
    scene.landmarks.push_back(lm);
  }

  const Eigen::Vector3d target(0.0, 0.8, 0.0);
  for (int i = 0; i < options.cameras; ++i) {
    const double angle = two_pi * i / options.cameras;
    const Eigen::Vector3d eye(options.radius * std::cos(angle), 1.6,
                              options.radius * std::sin(angle));
    scene.trajectory.push_back(look_at(eye, target));
  }
  return scene;
}

}  // namespace objslam
