#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace objslam {

using ShapeCode = Eigen::VectorXd;

enum class ShapeFamily { kRoundedBox, kSuperellipsoid };

const char* to_string(ShapeFamily family);
ShapeFamily shape_family_from_string(const std::string& name);

/**
 * Analytic latent shape prior.
 *
 * A code z of dimension k is mapped to p shape parameters by
 *
 *   y = W z
 *   p_i = base_i + (hi_i - lo_i) * (sigmoid(y_i + c_i) - sigmoid(c_i)),
 *   c_i = logit((base_i - lo_i) / (hi_i - lo_i)),
 *
 * so z = 0 gives the base parameters exactly and every p_i stays in (lo_i, hi_i).
 * A parameter with lo_i == hi_i is frozen at its base value.
 *
 * Parameters are [half_x, half_y, half_z, roundness] for the rounded box and
 * [radius_x, radius_y, radius_z, exponent] for the superellipsoid.
 */
struct DecoderSpec {
  ShapeFamily family = ShapeFamily::kRoundedBox;
  Eigen::VectorXd base;    // p
  Eigen::VectorXd lower;   // p
  Eigen::VectorXd upper;   // p
  Eigen::MatrixXd mixing;  // p x k

  int code_dim() const { return static_cast<int>(mixing.cols()); }
  int param_count() const { return static_cast<int>(base.size()); }

  /// Radius of a sphere around the object origin that contains the shape for every code.
  double bounding_radius() const;
  /// Upper bound of |grad G| (1 for exact distance families).
  double lipschitz_bound() const;

  /// Throws ParameterError when the spec is inconsistent.
  void validate() const;

  /// Default mixing: identity on the first p code entries plus a fixed pseudo-random blend.
  static Eigen::MatrixXd default_mixing(int params, int code_dim, std::uint64_t seed = 7);

  static DecoderSpec rounded_box(const Eigen::Vector3d& half_extents, double roundness,
                                 int code_dim = 8, double relative_range = 0.3);
  static DecoderSpec superellipsoid(const Eigen::Vector3d& radii, double exponent,
                                    int code_dim = 8, double relative_range = 0.3);
};

/// Decoded shape parameters with their code Jacobian.
struct DecodedShape {
  ShapeFamily family = ShapeFamily::kRoundedBox;
  Eigen::Vector4d params = Eigen::Vector4d::Zero();
  Eigen::MatrixXd dparams_dcode;  // p x k
};

struct SdfGradients {
  double value = 0.0;
  Eigen::Vector3d d_x = Eigen::Vector3d::Zero();
  Eigen::VectorXd d_code;
};

DecodedShape decode_shape(const ShapeCode& z, const DecoderSpec& spec);

double sdf(const DecodedShape& shape, const Eigen::Vector3d& x);
SdfGradients sdf_gradients(const DecodedShape& shape, const Eigen::Vector3d& x);

double decode_sdf(const Eigen::Vector3d& x, const ShapeCode& z, const DecoderSpec& spec);
SdfGradients decode_gradients(const Eigen::Vector3d& x, const ShapeCode& z,
                              const DecoderSpec& spec);

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;

  double area() const;
  Eigen::Vector3d min_corner() const;
  Eigen::Vector3d max_corner() const;
  /// Every undirected edge is shared by exactly two faces.
  bool is_watertight() const;
};

/**
 * Zero level set on a regular grid covering the decoded shape, extracted with
 * marching tetrahedra (six tetrahedra per cell sharing the main diagonal).
 * `resolution` is the number of cells along the longest axis; must be >= 8.
 */
TriangleMesh decode_mesh(const ShapeCode& z, const DecoderSpec& spec, int resolution);

}  // namespace objslam
