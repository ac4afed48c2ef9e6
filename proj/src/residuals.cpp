#include "objslam/residuals.hpp"

namespace objslam {

namespace {

Eigen::RowVectorXd sdf_row(const SdfGradients& g, const Eigen::Vector3d& x_obj) {
  Eigen::RowVectorXd row(kSim3Dof + g.d_code.size());
  row.head<kSim3Dof>() = g.d_x.transpose() * point_jacobian_sim3(x_obj);
  row.tail(g.d_code.size()) = g.d_code.transpose();
  return row;
}

}  // namespace

ScalarResidual surface_term(const SurfaceObservation& obs, const PoseSim3d& T_oc,
                            const DecodedShape& shape, const Camera& camera) {
  const Eigen::Vector3d x_obj = T_oc * (obs.depth * camera.ray(obs.pixel));
  const SdfGradients g = sdf_gradients(shape, x_obj);
  return {g.value, sdf_row(g, x_obj)};
}

double surface_residual(const SurfaceObservation& obs, const PoseSim3d& T_oc, const ShapeCode& z,
                        const DecoderSpec& spec, const Camera& camera) {
  return decode_sdf(T_oc * (obs.depth * camera.ray(obs.pixel)), z, spec);
}

Eigen::RowVectorXd surface_jacobian(const SurfaceObservation& obs, const PoseSim3d& T_oc,
                                    const ShapeCode& z, const DecoderSpec& spec,
                                    const Camera& camera) {
  return surface_term(obs, T_oc, decode_shape(z, spec), camera).J;
}

RenderTerm render_term(const Eigen::Vector2d& pixel, std::optional<double> observed_depth,
                       const PoseSim3d& T_oc, const DecodedShape& shape, const DepthRange& range,
                       const Camera& camera, int samples, double sigma, bool with_jacobian,
                       JacobianAssembly assembly) {
  const RayBundle ray = trace_ray(camera, pixel, T_oc, shape, range, samples, sigma);
  RenderTerm out;
  out.r = observed_depth.value_or(ray.d_escape) - ray.rendered_depth();
  for (int k = 0; k < samples; ++k) {
    if (std::abs(ray.sdf(k)) < sigma) {
      out.touches_band = true;
      break;
    }
  }
  if (!with_jacobian) return out;

  const int cols = kSim3Dof + static_cast<int>(shape.dparams_dcode.cols());
  out.J = Eigen::RowVectorXd::Zero(cols);
  const Eigen::VectorXd de_do = depth_residual_occ_grad(ray.occ, ray.depths, ray.d_escape);
  for (int k = 0; k < samples; ++k) {
    const double coeff = de_do(k) * occupancy_grad(ray.sdf(k), sigma);
    if (coeff == 0.0 && assembly == JacobianAssembly::kSparse) continue;
    const Eigen::Vector3d x_obj = ray.points_obj.row(k).transpose();
    ++out.gradient_calls;
    out.J += coeff * sdf_row(sdf_gradients(shape, x_obj), x_obj);
  }
  return out;
}

double render_residual(const Eigen::Vector2d& pixel, std::optional<double> observed_depth,
                       const PoseSim3d& T_oc, const ShapeCode& z, const DecoderSpec& spec,
                       const Camera& camera, int samples, double sigma) {
  const DepthRange range = depth_range(T_oc.inverse(), spec);
  return render_term(pixel, observed_depth, T_oc, decode_shape(z, spec), range, camera, samples,
                     sigma, false)
      .r;
}

Eigen::RowVectorXd render_jacobian(const Eigen::Vector2d& pixel,
                                   std::optional<double> observed_depth, const PoseSim3d& T_oc,
                                   const ShapeCode& z, const DecoderSpec& spec,
                                   const Camera& camera, int samples, double sigma) {
  const DepthRange range = depth_range(T_oc.inverse(), spec);
  return render_term(pixel, observed_depth, T_oc, decode_shape(z, spec), range, camera, samples,
                     sigma, true)
      .J;
}

ResidualBlock code_prior_block(const ShapeCode& z) {
  const Eigen::Index k = z.size();
  ResidualBlock block;
  block.r = z;
  block.J = Eigen::MatrixXd::Zero(k, kSim3Dof + k);
  block.J.rightCols(k).setIdentity();
  return block;
}

double rotation_prior_residual(const PoseSim3d& T_oc, const Eigen::Vector3d& ground_normal) {
  return 1.0 - (T_oc.rotation() * ground_normal).y();
}

Eigen::RowVectorXd rotation_prior_jacobian(const PoseSim3d& T_oc,
                                           const Eigen::Vector3d& ground_normal, int code_dim) {
  Eigen::RowVectorXd J = Eigen::RowVectorXd::Zero(kSim3Dof + code_dim);
  J.segment<3>(3) = skew(T_oc.rotation() * ground_normal).row(1);
  return J;
}

}  // namespace objslam
