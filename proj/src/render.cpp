#include "objslam/render.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "objslam/error.hpp"

namespace objslam {

Camera Camera::from_intrinsics(double fx, double fy, double cx, double cy, int width, int height) {
  Camera cam;
  cam.K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  cam.width = width;
  cam.height = height;
  cam.validate();
  return cam;
}

Eigen::Vector3d Camera::ray(const Eigen::Vector2d& pixel) const {
  return Eigen::Vector3d((pixel.x() - cx()) / fx(), (pixel.y() - cy()) / fy(), 1.0);
}

Eigen::Vector2d Camera::project(const Eigen::Vector3d& x) const {
  return Eigen::Vector2d(fx() * x.x() / x.z() + cx(), fy() * x.y() / x.z() + cy());
}

bool Camera::contains(const Eigen::Vector2d& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width - 1 &&
         pixel.y() <= height - 1;
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw ParameterError("camera: image size must be positive");
  if (!(fx() > 0.0 && fy() > 0.0)) throw ParameterError("camera: focal lengths must be positive");
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
    throw ParameterError("camera: K must be upper triangular with K(2,2) = 1");
  }
  if (cx() < 0.0 || cy() < 0.0 || cx() > width || cy() > height) {
    throw ParameterError("camera: principal point outside the image");
  }
}

DepthRange depth_range(const PoseSim3d& T_co, const DecoderSpec& spec, double near_plane) {
  const double center = T_co.translation().z();
  const double radius = T_co.scale() * spec.bounding_radius();
  DepthRange range;
  range.d_max = center + radius;
  range.d_min = std::max(near_plane, center - radius);
  if (center <= 0.0 || range.d_max <= range.d_min) {
    throw ParameterError("depth_range: object is behind the camera");
  }
  return range;
}

double occupancy(double s, double sigma) {
  if (s < -sigma) return 1.0;
  if (s > sigma) return 0.0;
  return 0.5 - s / (2.0 * sigma);
}

double occupancy_grad(double s, double sigma) {
  return std::abs(s) < sigma ? -1.0 / (2.0 * sigma) : 0.0;
}

Eigen::VectorXd event_probabilities(const Eigen::VectorXd& occ) {
  const Eigen::Index M = occ.size();
  Eigen::VectorXd phi(M + 1);
  double transmittance = 1.0;
  for (Eigen::Index i = 0; i < M; ++i) {
    phi(i) = occ(i) * transmittance;
    transmittance *= 1.0 - occ(i);
  }
  phi(M) = transmittance;
  return phi;
}

double render_depth(const Eigen::VectorXd& phi, const Eigen::VectorXd& depths, double d_escape) {
  const Eigen::Index M = depths.size();
  return phi.head(M).dot(depths) + phi(M) * d_escape;
}

namespace {

// grad_k = T_{k-1} * A_k with A_k = c_k + (1 - o_{k+1}) A_{k+1}, c_k = d_{k+1} - d_k.
template <typename Spacing>
Eigen::VectorXd occ_grad_impl(const Eigen::VectorXd& occ, Spacing spacing) {
  const Eigen::Index M = occ.size();
  Eigen::VectorXd grad(M);
  if (M == 0) return grad;
  Eigen::VectorXd tail(M);
  tail(M - 1) = spacing(M - 1);
  for (Eigen::Index k = M - 2; k >= 0; --k) {
    tail(k) = spacing(k) + (1.0 - occ(k + 1)) * tail(k + 1);
  }
  double transmittance = 1.0;
  for (Eigen::Index k = 0; k < M; ++k) {
    grad(k) = transmittance * tail(k);
    transmittance *= 1.0 - occ(k);
  }
  return grad;
}

}  // namespace

Eigen::VectorXd depth_residual_occ_grad(const Eigen::VectorXd& occ, double delta_d) {
  return occ_grad_impl(occ, [delta_d](Eigen::Index) { return delta_d; });
}

Eigen::VectorXd depth_residual_occ_grad(const Eigen::VectorXd& occ, const Eigen::VectorXd& depths,
                                        double d_escape) {
  const Eigen::Index M = depths.size();
  return occ_grad_impl(occ, [&](Eigen::Index k) {
    return (k + 1 < M ? depths(k + 1) : d_escape) - depths(k);
  });
}

RayBundle trace_ray(const Camera& camera, const Eigen::Vector2d& pixel, const PoseSim3d& T_oc,
                    const DecodedShape& shape, const DepthRange& range, int samples,
                    double sigma) {
  if (samples < 2) throw ParameterError("trace_ray: need at least two samples per ray");
  RayBundle b;
  b.pixel = pixel;
  b.depths.resize(samples);
  b.points_obj.resize(samples, 3);
  b.sdf.resize(samples);
  b.occ.resize(samples);
  const Eigen::Vector3d dir = camera.ray(pixel);
  const double step = range.spacing(samples);
  for (int i = 0; i < samples; ++i) {
    const double d = range.d_min + i * step;
    const Eigen::Vector3d x_obj = T_oc * (d * dir);
    b.depths(i) = d;
    b.points_obj.row(i) = x_obj.transpose();
    b.sdf(i) = sdf(shape, x_obj);
    b.occ(i) = occupancy(b.sdf(i), sigma);
  }
  b.event_prob = event_probabilities(b.occ);
  b.d_escape = range.escape_depth();
  return b;
}

RayBundle trace_ray(const Camera& camera, const Eigen::Vector2d& pixel, const PoseSim3d& T_oc,
                    const ShapeCode& z, const DecoderSpec& spec, int samples, double sigma,
                    double near_plane) {
  const DepthRange range = depth_range(T_oc.inverse(), spec, near_plane);
  return trace_ray(camera, pixel, T_oc, decode_shape(z, spec), range, samples, sigma);
}

DepthImage render_depth_image(const Camera& camera, const PoseSim3d& T_co, const ShapeCode& z,
                              const DecoderSpec& spec, int samples, double sigma) {
  DepthImage img;
  img.width = camera.width;
  img.height = camera.height;
  img.K = camera.K;
  img.data.assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0f);
  const PoseSim3d T_oc = T_co.inverse();
  const DepthRange range = depth_range(T_co, spec);
  const DecodedShape shape = decode_shape(z, spec);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const RayBundle b =
          trace_ray(camera, Eigen::Vector2d(x, y), T_oc, shape, range, samples, sigma);
      const double escape = b.event_prob(samples);
      if (escape < 1.0) img.at(x, y) = static_cast<float>(b.rendered_depth());
    }
  }
  return img;
}

}  // namespace objslam
