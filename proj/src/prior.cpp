#include "objslam/prior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <unordered_map>

#include <Eigen/Geometry>

#include "objslam/error.hpp"

namespace objslam {

namespace {

// 3^(1/24): slack of the smooth-min radius used by the superellipsoid.
constexpr int kSmoothMinPower = 24;
const double kSmoothMinGain = std::pow(3.0, 1.0 / kSmoothMinPower);

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Index of the largest entry, lowest index on ties.
int argmax3(const Eigen::Vector3d& v) {
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

double sign_nonneg(double v) { return v < 0.0 ? -1.0 : 1.0; }

// Rounded box: q = |x| - (h - r); d = |max(q,0)| + min(max_i q_i, 0) - r.
SdfGradients rounded_box(const Eigen::Vector4d& p, const Eigen::Vector3d& x, bool want_grad) {
  const Eigen::Vector3d h = p.head<3>();
  const double r = p(3);
  const Eigen::Vector3d q = x.cwiseAbs() - h + Eigen::Vector3d::Constant(r);
  const Eigen::Vector3d qpos = q.cwiseMax(0.0);
  const double outside = qpos.norm();
  const int k = argmax3(q);
  const double inside = std::min(q(k), 0.0);

  SdfGradients g;
  g.value = outside + inside - r;
  if (!want_grad) return g;

  // d value / d q
  Eigen::Vector3d dq = Eigen::Vector3d::Zero();
  if (outside > 0.0) {
    dq = qpos / outside;
  } else {
    dq(k) = 1.0;
  }
  for (int i = 0; i < 3; ++i) g.d_x(i) = dq(i) * sign_nonneg(x(i));
  // Parameter gradient stored temporarily in d_code (size 4).
  g.d_code.resize(4);
  g.d_code.head<3>() = -dq;
  g.d_code(3) = dq.sum() - 1.0;
  return g;
}

// Superellipsoid distance bound: m * (F - 1), F = (sum |x_i/a_i|^e)^(1/e),
// m = 3^(1/24) * (sum a_i^-24)^(-1/24).
SdfGradients superellipsoid(const Eigen::Vector4d& p, const Eigen::Vector3d& x, bool want_grad) {
  const Eigen::Vector3d a = p.head<3>();
  const double e = p(3);

  double inv_pow_sum = 0.0;
  for (int i = 0; i < 3; ++i) inv_pow_sum += std::pow(a(i), -kSmoothMinPower);
  const double m = kSmoothMinGain * std::pow(inv_pow_sum, -1.0 / kSmoothMinPower);

  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v(i) = std::abs(x(i)) / a(i);
  double S = 0.0;
  for (int i = 0; i < 3; ++i) S += std::pow(v(i), e);
  const double F = S > 0.0 ? std::pow(S, 1.0 / e) : 0.0;

  SdfGradients g;
  g.value = m * (F - 1.0);
  if (!want_grad) return g;

  g.d_code.resize(4);
  // dm/da_i = m * a_i^-25 / sum a_j^-24
  Eigen::Vector3d dm_da;
  for (int i = 0; i < 3; ++i) {
    dm_da(i) = m * std::pow(a(i), -kSmoothMinPower - 1) / inv_pow_sum;
  }

  if (F <= 0.0) {
    // Origin: subgradient toward the nearest face direction (smallest radius, lowest index).
    int k = 0;
    for (int i = 1; i < 3; ++i) {
      if (a(i) < a(k)) k = i;
    }
    g.d_x.setZero();
    g.d_x(k) = m / a(k);
    g.d_code.head<3>() = -dm_da;
    g.d_code(3) = 0.0;
    return g;
  }

  // dF/dv_i = v_i^(e-1) * F^(1-e)
  const double F1e = std::pow(F, 1.0 - e);
  Eigen::Vector3d dF_dv;
  for (int i = 0; i < 3; ++i) dF_dv(i) = std::pow(v(i), e - 1.0) * F1e;
  for (int i = 0; i < 3; ++i) {
    g.d_x(i) = m * dF_dv(i) * sign_nonneg(x(i)) / a(i);
    // dv_i/da_i = -v_i / a_i
    g.d_code(i) = dm_da(i) * (F - 1.0) + m * dF_dv(i) * (-v(i) / a(i));
  }
  // dF/de = F * (sum v^e ln v / (e S) - ln S / e^2)
  double weighted_log = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (v(i) > 0.0) weighted_log += std::pow(v(i), e) * std::log(v(i));
  }
  const double dF_de = F * (weighted_log / (e * S) - std::log(S) / (e * e));
  g.d_code(3) = m * dF_de;
  return g;
}

SdfGradients evaluate(const DecodedShape& shape, const Eigen::Vector3d& x, bool want_grad) {
  SdfGradients g = shape.family == ShapeFamily::kRoundedBox
                       ? rounded_box(shape.params, x, want_grad)
                       : superellipsoid(shape.params, x, want_grad);
  if (want_grad) {
    const Eigen::Vector4d d_params = g.d_code;
    g.d_code = shape.dparams_dcode.transpose() * d_params;
  }
  return g;
}

}  // namespace

const char* to_string(ShapeFamily family) {
  return family == ShapeFamily::kRoundedBox ? "rounded-box" : "superellipsoid";
}

ShapeFamily shape_family_from_string(const std::string& name) {
  if (name == "rounded-box") return ShapeFamily::kRoundedBox;
  if (name == "superellipsoid") return ShapeFamily::kSuperellipsoid;
  throw ParameterError("unknown shape family '" + name + "'");
}

double DecoderSpec::bounding_radius() const {
  // Both families fit inside the box of their (upper-bounded) half extents.
  return upper.head<3>().norm();
}

double DecoderSpec::lipschitz_bound() const {
  return family == ShapeFamily::kRoundedBox ? 1.0 : kSmoothMinGain;
}

void DecoderSpec::validate() const {
  if (base.size() != 4 || lower.size() != 4 || upper.size() != 4) {
    throw ParameterError("decoder spec: expected 4 shape parameters");
  }
  if (mixing.rows() != 4 || mixing.cols() < 1) {
    throw ParameterError("decoder spec: mixing matrix must be 4 x k with k >= 1");
  }
  for (int i = 0; i < 4; ++i) {
    const bool frozen = lower(i) == upper(i);
    if (frozen ? base(i) != lower(i) : !(lower(i) < base(i) && base(i) < upper(i))) {
      throw ParameterError("decoder spec: base parameter " + std::to_string(i) +
                           " outside its bounds");
    }
  }
  if (lower.head<3>().minCoeff() <= 0.0) {
    throw ParameterError("decoder spec: extents must be positive");
  }
  if (family == ShapeFamily::kRoundedBox) {
    if (lower(3) < 0.0 || upper(3) >= lower.head<3>().minCoeff()) {
      throw ParameterError("decoder spec: roundness must lie in [0, min extent)");
    }
  } else if (lower(3) < 2.0) {
    throw ParameterError("decoder spec: superellipsoid exponent must be >= 2");
  }
  if (!mixing.allFinite()) throw ParameterError("decoder spec: non-finite mixing matrix");
}

Eigen::MatrixXd DecoderSpec::default_mixing(int params, int code_dim, std::uint64_t seed) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(params, code_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  for (int i = 0; i < params; ++i) {
    for (int j = 0; j < code_dim; ++j) {
      W(i, j) = (i == j) ? 1.0 : (j >= params ? unif(rng) : 0.0);
    }
  }
  return W;
}

DecoderSpec DecoderSpec::rounded_box(const Eigen::Vector3d& half_extents, double roundness,
                                     int code_dim, double relative_range) {
  DecoderSpec spec;
  spec.family = ShapeFamily::kRoundedBox;
  spec.base.resize(4);
  spec.base << half_extents, roundness;
  spec.lower = spec.base;
  spec.upper = spec.base;
  spec.lower.head<3>() = (1.0 - relative_range) * half_extents;
  spec.upper.head<3>() = (1.0 + relative_range) * half_extents;
  if (roundness > 0.0) {
    spec.lower(3) = 0.5 * roundness;
    spec.upper(3) = std::min(2.0 * roundness, 0.9 * spec.lower.head<3>().minCoeff());
  }
  spec.mixing = default_mixing(4, code_dim);
  spec.validate();
  return spec;
}

DecoderSpec DecoderSpec::superellipsoid(const Eigen::Vector3d& radii, double exponent,
                                        int code_dim, double relative_range) {
  DecoderSpec spec;
  spec.family = ShapeFamily::kSuperellipsoid;
  spec.base.resize(4);
  spec.base << radii, exponent;
  spec.lower = spec.base;
  spec.upper = spec.base;
  spec.lower.head<3>() = (1.0 - relative_range) * radii;
  spec.upper.head<3>() = (1.0 + relative_range) * radii;
  if (exponent > 2.0) {
    spec.lower(3) = 2.0;
    spec.upper(3) = 2.0 * exponent;
  }
  spec.mixing = default_mixing(4, code_dim);
  spec.validate();
  return spec;
}

DecodedShape decode_shape(const ShapeCode& z, const DecoderSpec& spec) {
  if (z.size() != spec.code_dim()) {
    throw ParameterError("shape code dimension " + std::to_string(z.size()) +
                         " does not match decoder (" + std::to_string(spec.code_dim()) + ")");
  }
  DecodedShape shape;
  shape.family = spec.family;
  shape.dparams_dcode = Eigen::MatrixXd::Zero(4, spec.code_dim());
  const Eigen::VectorXd y = spec.mixing * z;
  for (int i = 0; i < 4; ++i) {
    const double range = spec.upper(i) - spec.lower(i);
    if (range == 0.0) {
      shape.params(i) = spec.base(i);
      continue;
    }
    const double q = (spec.base(i) - spec.lower(i)) / range;
    const double c = std::log(q / (1.0 - q));
    const double s = sigmoid(y(i) + c);
    shape.params(i) = spec.base(i) + range * (s - sigmoid(c));
    shape.dparams_dcode.row(i) = range * s * (1.0 - s) * spec.mixing.row(i);
  }
  return shape;
}

double sdf(const DecodedShape& shape, const Eigen::Vector3d& x) {
  return evaluate(shape, x, false).value;
}

SdfGradients sdf_gradients(const DecodedShape& shape, const Eigen::Vector3d& x) {
  return evaluate(shape, x, true);
}

double decode_sdf(const Eigen::Vector3d& x, const ShapeCode& z, const DecoderSpec& spec) {
  return sdf(decode_shape(z, spec), x);
}

SdfGradients decode_gradients(const Eigen::Vector3d& x, const ShapeCode& z,
                              const DecoderSpec& spec) {
  return sdf_gradients(decode_shape(z, spec), x);
}

// ---------------------------------------------------------------------------
// Mesh extraction

double TriangleMesh::area() const {
  double total = 0.0;
  for (const auto& f : faces) {
    total += 0.5 * (vertices[f(1)] - vertices[f(0)]).cross(vertices[f(2)] - vertices[f(0)]).norm();
  }
  return total;
}

Eigen::Vector3d TriangleMesh::min_corner() const {
  Eigen::Vector3d m = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) m = m.cwiseMin(v);
  return m;
}

Eigen::Vector3d TriangleMesh::max_corner() const {
  Eigen::Vector3d m = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) m = m.cwiseMax(v);
  return m;
}

bool TriangleMesh::is_watertight() const {
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      int a = f(e), b = f((e + 1) % 3);
      if (a > b) std::swap(a, b);
      ++edge_use[{a, b}];
    }
  }
  if (edge_use.empty()) return false;
  return std::all_of(edge_use.begin(), edge_use.end(),
                     [](const auto& kv) { return kv.second == 2; });
}

namespace {

// Kuhn decomposition; corner index bits are (x, y, z).
constexpr std::array<std::array<int, 4>, 6> kTets = {{
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
}};

}  // namespace

TriangleMesh decode_mesh(const ShapeCode& z, const DecoderSpec& spec, int resolution) {
  if (resolution < 8) throw ParameterError("decode_mesh: resolution must be >= 8");
  const DecodedShape shape = decode_shape(z, spec);
  const Eigen::Vector3d half = shape.params.head<3>();
  const double cell = 2.0 * half.maxCoeff() / resolution;
  Eigen::Vector3i n;
  Eigen::Vector3d origin;
  for (int i = 0; i < 3; ++i) {
    n(i) = static_cast<int>(std::ceil(2.0 * half(i) / cell)) + 4;  // cells
    origin(i) = -0.5 * n(i) * cell;
  }
  const int nx = n(0) + 1, ny = n(1) + 1, nz = n(2) + 1;  // grid vertices
  auto index = [&](int i, int j, int k) -> std::int64_t {
    return (static_cast<std::int64_t>(k) * ny + j) * nx + i;
  };
  auto position = [&](std::int64_t id) {
    const int i = static_cast<int>(id % nx);
    const int j = static_cast<int>((id / nx) % ny);
    const int k = static_cast<int>(id / (static_cast<std::int64_t>(nx) * ny));
    return Eigen::Vector3d(origin(0) + i * cell, origin(1) + j * cell, origin(2) + k * cell);
  };

  std::vector<double> values(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        values[index(i, j, k)] = sdf(shape, position(index(i, j, k)));
      }
    }
  }

  TriangleMesh mesh;
  std::unordered_map<std::int64_t, int> edge_vertex;
  const std::int64_t total = static_cast<std::int64_t>(nx) * ny * nz;
  auto vertex_on_edge = [&](std::int64_t a, std::int64_t b) {
    if (a > b) std::swap(a, b);
    const std::int64_t key = a * total + b;
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double va = values[a], vb = values[b];
    const double t = va / (va - vb);
    mesh.vertices.push_back(position(a) + t * (position(b) - position(a)));
    const int id = static_cast<int>(mesh.vertices.size()) - 1;
    edge_vertex.emplace(key, id);
    return id;
  };
  // Orients (a, b, c) so that the normal points from `inside_pt` outward.
  auto emit = [&](int a, int b, int c, const Eigen::Vector3d& inside_pt) {
    const Eigen::Vector3d& pa = mesh.vertices[a];
    const Eigen::Vector3d normal = (mesh.vertices[b] - pa).cross(mesh.vertices[c] - pa);
    if (normal.dot(pa - inside_pt) < 0.0) std::swap(b, c);
    mesh.faces.emplace_back(a, b, c);
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        std::array<std::int64_t, 8> corner;
        for (int c = 0; c < 8; ++c) {
          corner[c] = index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        }
        for (const auto& tet : kTets) {
          std::array<std::int64_t, 4> v;
          std::array<bool, 4> in;
          int count = 0;
          for (int t = 0; t < 4; ++t) {
            v[t] = corner[tet[t]];
            in[t] = values[v[t]] < 0.0;
            count += in[t];
          }
          if (count == 0 || count == 4) continue;
          std::vector<std::int64_t> inner, outer;
          for (int t = 0; t < 4; ++t) (in[t] ? inner : outer).push_back(v[t]);
          Eigen::Vector3d inside_pt = Eigen::Vector3d::Zero();
          for (auto id : inner) inside_pt += position(id);
          inside_pt /= static_cast<double>(inner.size());
          if (inner.size() == 1 || outer.size() == 1) {
            const bool single_inside = inner.size() == 1;
            const std::int64_t apex = single_inside ? inner[0] : outer[0];
            const auto& others = single_inside ? outer : inner;
            const int a = vertex_on_edge(apex, others[0]);
            const int b = vertex_on_edge(apex, others[1]);
            const int c = vertex_on_edge(apex, others[2]);
            emit(a, b, c, inside_pt);
          } else {
            const int a = vertex_on_edge(inner[0], outer[0]);
            const int b = vertex_on_edge(inner[0], outer[1]);
            const int c = vertex_on_edge(inner[1], outer[1]);
            const int d = vertex_on_edge(inner[1], outer[0]);
            emit(a, b, c, inside_pt);
            emit(a, c, d, inside_pt);
          }
        }
      }
    }
  }
  return mesh;
}

}  // namespace objslam
