#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "objslam/error.hpp"

/**
 * Sim(3) / SE(3) / SO(3) for the object and camera poses.
 *
 * Tangent layout
 * --------------
 * Sim(3): [nu(3) | phi(3) | sigma(1)]   translation, rotation, log-scale
 * SE(3):  [nu(3) | phi(3)]
 *
 * Lie algebra matrix form
 * -----------------------
 *   [ phi_x + sigma*I   nu ]
 *   [       0           0  ]
 *
 * All increments are applied on the left: T <- exp(delta) * T.
 */
namespace objslam {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Vector7 = Eigen::Matrix<Scalar, 7, 1>;
template <typename Scalar>
using Matrix6 = Eigen::Matrix<Scalar, 6, 6>;

template <typename Derived>
Matrix3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> m;
  m << Scalar(0), -v(2), v(1),
       v(2), Scalar(0), -v(0),
       -v(1), v(0), Scalar(0);
  return m;
}

template <typename Derived>
Vector3<typename Derived::Scalar> vee(const Eigen::MatrixBase<Derived>& m) {
  return Vector3<typename Derived::Scalar>(m(2, 1), m(0, 2), m(1, 0));
}

template <typename Scalar>
struct TwistSim3 {
  Vector3<Scalar> nu = Vector3<Scalar>::Zero();
  Vector3<Scalar> phi = Vector3<Scalar>::Zero();
  Scalar sigma = Scalar(0);

  static TwistSim3 from_vector(const Vector7<Scalar>& v) {
    return {v.template head<3>(), v.template segment<3>(3), v(6)};
  }

  Vector7<Scalar> vector() const {
    Vector7<Scalar> v;
    v << nu, phi, sigma;
    return v;
  }
};

template <typename Scalar>
Matrix4<Scalar> hat_sim3(const TwistSim3<Scalar>& xi) {
  Matrix4<Scalar> m = Matrix4<Scalar>::Zero();
  m.template topLeftCorner<3, 3>() = skew(xi.phi) + xi.sigma * Matrix3<Scalar>::Identity();
  m.template topRightCorner<3, 1>() = xi.nu;
  return m;
}

/// Rodrigues' formula.
template <typename Scalar>
Matrix3<Scalar> exp_so3(const Vector3<Scalar>& phi) {
  using std::cos;
  using std::sin;
  const Scalar theta2 = phi.squaredNorm();
  const Matrix3<Scalar> W = skew(phi);
  if (theta2 < Scalar(1e-16)) {
    return Matrix3<Scalar>::Identity() + W + Scalar(0.5) * W * W;
  }
  const Scalar theta = std::sqrt(theta2);
  return Matrix3<Scalar>::Identity() + (sin(theta) / theta) * W +
         ((Scalar(1) - cos(theta)) / theta2) * W * W;
}

/// Principal-branch logarithm. Throws BranchError within 1e-6 of pi.
template <typename Scalar>
Vector3<Scalar> log_so3(const Matrix3<Scalar>& R) {
  const Vector3<Scalar> w = Scalar(0.5) * vee(R - R.transpose());
  const Scalar s = w.norm();
  const Scalar c = Scalar(0.5) * (R.trace() - Scalar(1));
  const Scalar theta = std::atan2(s, c);
  if (theta > Scalar(std::numbers::pi) - Scalar(1e-6)) {
    throw BranchError("log_so3: rotation angle too close to pi");
  }
  if (theta < Scalar(1e-8)) {
    return w * (Scalar(1) + theta * theta / Scalar(6));
  }
  return w * (theta / s);
}

/// Left Jacobian of SO(3).
template <typename Scalar>
Matrix3<Scalar> left_jacobian_so3(const Vector3<Scalar>& phi) {
  const Scalar theta2 = phi.squaredNorm();
  const Matrix3<Scalar> W = skew(phi);
  if (theta2 < Scalar(1e-12)) {
    return Matrix3<Scalar>::Identity() + Scalar(0.5) * W + W * W / Scalar(6);
  }
  const Scalar theta = std::sqrt(theta2);
  return Matrix3<Scalar>::Identity() + ((Scalar(1) - std::cos(theta)) / theta2) * W +
         ((theta - std::sin(theta)) / (theta2 * theta)) * W * W;
}

template <typename Scalar>
Matrix3<Scalar> left_jacobian_so3_inverse(const Vector3<Scalar>& phi) {
  const Scalar theta2 = phi.squaredNorm();
  const Matrix3<Scalar> W = skew(phi);
  if (theta2 < Scalar(1e-12)) {
    return Matrix3<Scalar>::Identity() - Scalar(0.5) * W + W * W / Scalar(12);
  }
  const Scalar theta = std::sqrt(theta2);
  const Scalar half = Scalar(0.5) * theta;
  const Scalar coef = (Scalar(1) - half * std::cos(half) / std::sin(half)) / theta2;
  return Matrix3<Scalar>::Identity() - Scalar(0.5) * W + coef * W * W;
}

template <typename Scalar>
class PoseSE3;

/// Similarity transform x -> s*R*x + t.
template <typename Scalar>
class PoseSim3 {
 public:
  PoseSim3() = default;
  PoseSim3(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation, Scalar scale)
      : rotation_(rotation), translation_(translation), scale_(scale) {}

  static PoseSim3 Identity() { return PoseSim3(); }

  const Matrix3<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }
  Scalar scale() const { return scale_; }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = scale_ * rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  PoseSim3 inverse() const {
    const Matrix3<Scalar> Rt = rotation_.transpose();
    const Scalar inv_s = Scalar(1) / scale_;
    return PoseSim3(Rt, -inv_s * (Rt * translation_), inv_s);
  }

  PoseSim3 operator*(const PoseSim3& other) const {
    return PoseSim3(rotation_ * other.rotation_,
                    scale_ * (rotation_ * other.translation_) + translation_,
                    scale_ * other.scale_);
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const {
    return scale_ * (rotation_ * x) + translation_;
  }

  /// Drops the scale.
  PoseSE3<Scalar> se3() const;

 private:
  Matrix3<Scalar> rotation_ = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation_ = Vector3<Scalar>::Zero();
  Scalar scale_ = Scalar(1);
};

/// Rigid transform x -> R*x + t.
template <typename Scalar>
class PoseSE3 {
 public:
  PoseSE3() = default;
  PoseSE3(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation)
      : rotation_(rotation), translation_(translation) {}

  static PoseSE3 Identity() { return PoseSE3(); }

  const Matrix3<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  PoseSE3 inverse() const {
    const Matrix3<Scalar> Rt = rotation_.transpose();
    return PoseSE3(Rt, -(Rt * translation_));
  }

  PoseSE3 operator*(const PoseSE3& other) const {
    return PoseSE3(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const { return rotation_ * x + translation_; }

  PoseSim3<Scalar> sim3(Scalar scale = Scalar(1)) const {
    return PoseSim3<Scalar>(rotation_, translation_, scale);
  }

  /// Adjoint for the [nu; phi] layout.
  Matrix6<Scalar> adjoint() const {
    Matrix6<Scalar> A = Matrix6<Scalar>::Zero();
    A.template topLeftCorner<3, 3>() = rotation_;
    A.template topRightCorner<3, 3>() = skew(translation_) * rotation_;
    A.template bottomRightCorner<3, 3>() = rotation_;
    return A;
  }

 private:
  Matrix3<Scalar> rotation_ = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation_ = Vector3<Scalar>::Zero();
};

template <typename Scalar>
PoseSE3<Scalar> PoseSim3<Scalar>::se3() const {
  return PoseSE3<Scalar>(rotation_, translation_);
}

using TwistSim3d = TwistSim3<double>;
using PoseSim3d = PoseSim3<double>;
using PoseSE3d = PoseSE3<double>;

template <typename Scalar>
Vector3<Scalar> transform_point(const PoseSim3<Scalar>& T, const Vector3<Scalar>& x) {
  return T * x;
}

namespace detail {

// \int_0^1 t^n e^{sigma t} dt
template <typename Scalar>
Scalar exp_moment(int n, Scalar sigma) {
  using std::abs;
  if (abs(sigma) <= Scalar(2)) {
    Scalar sum = Scalar(0);
    Scalar term = Scalar(1);  // sigma^m / m!
    for (int m = 0; m < 40; ++m) {
      sum += term / Scalar(n + m + 1);
      term *= sigma / Scalar(m + 1);
    }
    return sum;
  }
  const Scalar e = std::exp(sigma);
  Scalar value = (e - Scalar(1)) / sigma;
  for (int i = 1; i <= n; ++i) value = (e - Scalar(i) * value) / sigma;
  return value;
}

}  // namespace detail

/**
 * Closed-form exponential of sim(3).
 *
 * Top-left block is e^sigma * exp_so3(phi); the translation is V*nu with
 * V = \int_0^1 e^{sigma t} exp_so3(t phi) dt = a I + b W + c W^2.
 */
template <typename Scalar>
PoseSim3<Scalar> exp_sim3(const TwistSim3<Scalar>& xi) {
  using std::cos;
  using std::sin;
  const Scalar sigma = xi.sigma;
  const Scalar theta2 = xi.phi.squaredNorm();
  const Matrix3<Scalar> W = skew(xi.phi);
  const Scalar a = detail::exp_moment(0, sigma);
  Scalar b;
  Scalar c;
  if (theta2 < Scalar(1e-12)) {
    b = detail::exp_moment(1, sigma) - theta2 / Scalar(6) * detail::exp_moment(3, sigma);
    c = Scalar(0.5) * detail::exp_moment(2, sigma) -
        theta2 / Scalar(24) * detail::exp_moment(4, sigma);
  } else {
    const Scalar theta = std::sqrt(theta2);
    const Scalar e = std::exp(sigma);
    const Scalar denom = sigma * sigma + theta2;
    const Scalar int_sin = (e * (sigma * sin(theta) - theta * cos(theta)) + theta) / denom;
    const Scalar int_cos = (e * (sigma * cos(theta) + theta * sin(theta)) - sigma) / denom;
    b = int_sin / theta;
    c = (a - int_cos) / theta2;
  }
  const Matrix3<Scalar> V = a * Matrix3<Scalar>::Identity() + b * W + c * W * W;
  return PoseSim3<Scalar>(exp_so3(xi.phi), V * xi.nu, std::exp(sigma));
}

template <typename Scalar>
PoseSE3<Scalar> exp_se3(const Vector6<Scalar>& xi) {
  const Vector3<Scalar> phi = xi.template tail<3>();
  return PoseSE3<Scalar>(exp_so3(phi), left_jacobian_so3(phi) * xi.template head<3>());
}

/// Principal-branch logarithm, [nu; phi]. Throws BranchError near pi.
template <typename Scalar>
Vector6<Scalar> log_se3(const PoseSE3<Scalar>& T) {
  const Vector3<Scalar> phi = log_so3(T.rotation());
  Vector6<Scalar> xi;
  xi << left_jacobian_so3_inverse(phi) * T.translation(), phi;
  return xi;
}

/**
 * Left Jacobian of SE(3) in the [nu; phi] layout:
 *   [ J  Q ]
 *   [ 0  J ]
 */
template <typename Scalar>
Matrix6<Scalar> left_jacobian_se3(const Vector6<Scalar>& xi) {
  const Vector3<Scalar> rho = xi.template head<3>();
  const Vector3<Scalar> phi = xi.template tail<3>();
  const Matrix3<Scalar> P = skew(phi);
  const Matrix3<Scalar> Rh = skew(rho);
  const Scalar theta2 = phi.squaredNorm();
  Scalar c1, c2, c3;
  if (theta2 < Scalar(1e-8)) {
    c1 = Scalar(1) / Scalar(6) - theta2 / Scalar(120);
    c2 = Scalar(1) / Scalar(24) - theta2 / Scalar(720);
    c3 = Scalar(1) / Scalar(120) - theta2 / Scalar(2520);
  } else {
    const Scalar theta = std::sqrt(theta2);
    const Scalar s = std::sin(theta);
    const Scalar c = std::cos(theta);
    c1 = (theta - s) / (theta2 * theta);
    c2 = (theta2 + Scalar(2) * c - Scalar(2)) / (Scalar(2) * theta2 * theta2);
    c3 = (Scalar(2) * theta - Scalar(3) * s + theta * c) / (Scalar(2) * theta2 * theta2 * theta);
  }
  const Matrix3<Scalar> Q = Scalar(0.5) * Rh + c1 * (P * Rh + Rh * P + P * Rh * P) +
                            c2 * (P * P * Rh + Rh * P * P - Scalar(3) * P * Rh * P) +
                            c3 * (P * Rh * P * P + P * P * Rh * P);
  const Matrix3<Scalar> J = left_jacobian_so3(phi);
  Matrix6<Scalar> out = Matrix6<Scalar>::Zero();
  out.template topLeftCorner<3, 3>() = J;
  out.template topRightCorner<3, 3>() = Q;
  out.template bottomRightCorner<3, 3>() = J;
  return out;
}

template <typename Scalar>
Matrix6<Scalar> right_jacobian_se3_inverse(const Vector6<Scalar>& xi) {
  const Matrix6<Scalar> Jr = left_jacobian_se3<Scalar>(-xi);
  const Matrix3<Scalar> Jinv = Jr.template topLeftCorner<3, 3>().inverse();
  Matrix6<Scalar> out = Matrix6<Scalar>::Zero();
  out.template topLeftCorner<3, 3>() = Jinv;
  out.template topRightCorner<3, 3>() = -Jinv * Jr.template topRightCorner<3, 3>() * Jinv;
  out.template bottomRightCorner<3, 3>() = Jinv;
  return out;
}

/// d(exp(delta) * x)/d(delta) at delta = 0, for x already in the target frame: [I | -x_x | x].
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 7> point_jacobian_sim3(const Vector3<Scalar>& x) {
  Eigen::Matrix<Scalar, 3, 7> J;
  J.template leftCols<3>().setIdentity();
  J.template middleCols<3>(3) = -skew(x);
  J.col(6) = x;
  return J;
}

/// Projects a near-rotation back onto SO(3).
template <typename Scalar>
Matrix3<Scalar> orthonormalize(const Matrix3<Scalar>& R) {
  return Eigen::Quaternion<Scalar>(R).normalized().toRotationMatrix();
}

}  // namespace objslam
