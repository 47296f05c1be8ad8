#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "errors.hpp"

namespace hinf {

template<typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template<typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;

/// Threshold on |v| below which exp/log switch to series expansions.
inline constexpr double kSmallAngle = 1e-8;
/// log_so3 raises NearPiRotation at or above pi minus this margin.
inline constexpr double kNearPiMargin = 1e-6;

// ---------------------------------------------------------------------------
// Unit directions
// ---------------------------------------------------------------------------

/**
 * @brief A 3-vector of unit length.
 *
 * Reference directions are stored with this type so that every filter can
 * rely on |r_i| = 1 without re-normalizing.
 */
template<typename Scalar>
class UnitVector3
{
public:
  static constexpr Scalar kTolerance = Scalar(1e-9);

  UnitVector3() : v_(Vector3<Scalar>::UnitX()) {}

  /// Throws NotUnitVector if |v| deviates from 1 by more than 1e-9.
  explicit UnitVector3(const Vector3<Scalar>& v) : v_(v)
  {
    if (!v.allFinite() || std::abs(v.norm() - Scalar(1)) > kTolerance) {
      throw NotUnitVector("direction must have unit norm");
    }
  }

  /// Normalizes v; throws NotUnitVector for (near) zero input.
  static UnitVector3 normalized(const Vector3<Scalar>& v)
  {
    const Scalar n = v.norm();
    if (!(n > Scalar(1e-12)) || !std::isfinite(n)) { throw NotUnitVector("cannot normalize a zero vector"); }
    return UnitVector3(Vector3<Scalar>(v / n));
  }

  const Vector3<Scalar>& vector() const noexcept { return v_; }
  operator const Vector3<Scalar>&() const noexcept { return v_; }

  bool operator==(const UnitVector3&) const = default;

private:
  Vector3<Scalar> v_;
};

using Direction = UnitVector3<double>;

// ---------------------------------------------------------------------------
// Operators on R^3 and 3x3 matrices
// ---------------------------------------------------------------------------

/// Skew-symmetric matrix with hat(v) * w == v.cross(w).
template<typename Derived>
Matrix3<typename Derived::Scalar> hat(const Eigen::MatrixBase<Derived>& v)
{
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> m;
  // clang-format off
  m << Scalar(0), -v(2),       v(1),
       v(2),       Scalar(0), -v(0),
      -v(1),       v(0),       Scalar(0);
  // clang-format on
  return m;
}

/// Inverse of hat. Throws NotSkewSymmetric when max |M + M^T| > tol.
template<typename Derived>
Vector3<typename Derived::Scalar> vee(const Eigen::MatrixBase<Derived>& m,
                                      typename Derived::Scalar tol = typename Derived::Scalar(1e-8))
{
  EIGEN_STATIC_ASSERT_MATRIX_SPECIFIC_SIZE(Derived, 3, 3);
  if ((m + m.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw NotSkewSymmetric("vee: matrix is not skew-symmetric");
  }
  return Vector3<typename Derived::Scalar>(m(2, 1), m(0, 2), m(1, 0));
}

/// (M + M^T) / 2
template<typename Derived>
Matrix3<typename Derived::Scalar> sym_proj(const Eigen::MatrixBase<Derived>& m)
{
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> out = m;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const Scalar s = (m(i, j) + m(j, i)) / Scalar(2);
      out(i, j)      = s;
      out(j, i)      = s;
    }
  }
  return out;
}

/// E(M) = tr(M) I - M^T
template<typename Derived>
Matrix3<typename Derived::Scalar> e_map(const Eigen::MatrixBase<Derived>& m)
{
  using Scalar = typename Derived::Scalar;
  return m.trace() * Matrix3<Scalar>::Identity() - m.transpose();
}

// ---------------------------------------------------------------------------
// Rotation matrices
// ---------------------------------------------------------------------------

/**
 * @brief Element of SO(3) stored as a 3x3 matrix.
 *
 * Construction through from_matrix() checks R^T R = I and det R = 1 within
 * 1e-9. Products of valid rotations are not re-checked; long products should
 * be passed through project_to_so3().
 */
template<typename Scalar>
class Rotation
{
public:
  using Matrix = Matrix3<Scalar>;
  using Vector = Vector3<Scalar>;

  static constexpr Scalar kTolerance = Scalar(1e-9);

  Rotation() : m_(Matrix::Identity()) {}

  static Rotation identity() { return Rotation(); }

  /// Checked construction; throws NotARotation.
  static Rotation from_matrix(const Matrix& m, Scalar tol = kTolerance)
  {
    if (!m.allFinite()) { throw NotARotation("rotation has non-finite entries"); }
    if ((m.transpose() * m - Matrix::Identity()).norm() > tol) {
      throw NotARotation("matrix is not orthogonal");
    }
    if (std::abs(m.determinant() - Scalar(1)) > tol) { throw NotARotation("determinant is not +1"); }
    return Rotation(m, Unchecked{});
  }

  /// Wraps m without checking. Caller guarantees membership in SO(3).
  static Rotation unchecked(const Matrix& m) noexcept { return Rotation(m, Unchecked{}); }

  const Matrix& matrix() const noexcept { return m_; }
  Scalar operator()(int i, int j) const { return m_(i, j); }

  Rotation inverse() const { return Rotation(m_.transpose(), Unchecked{}); }
  Rotation transpose() const { return inverse(); }

  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, Unchecked{}); }
  Vector operator*(const Vector& v) const { return m_ * v; }

  /// Frobenius norm of R^T R - I plus |det R - 1|.
  Scalar defect() const
  {
    return (m_.transpose() * m_ - Matrix::Identity()).norm() + std::abs(m_.determinant() - Scalar(1));
  }

private:
  struct Unchecked
  {};
  Rotation(const Matrix& m, Unchecked) : m_(m) {}

  Matrix m_;
};

using RotationMatrix = Rotation<double>;

template<typename Scalar>
struct AxisAngle
{
  Vector3<Scalar> axis = Vector3<Scalar>::UnitX();
  Scalar angle         = Scalar(0);
};

/// Rodrigues formula with a second-order series for |v| < 1e-8.
template<typename Derived>
Rotation<typename Derived::Scalar> exp_so3(const Eigen::MatrixBase<Derived>& v)
{
  using Scalar                = typename Derived::Scalar;
  const Matrix3<Scalar> K     = hat(v);
  const Matrix3<Scalar> K2    = K * K;
  const Scalar theta          = v.norm();
  Matrix3<Scalar> m;
  if (theta < Scalar(kSmallAngle)) {
    m = Matrix3<Scalar>::Identity() + K + K2 / Scalar(2);
  } else {
    m = Matrix3<Scalar>::Identity() + (std::sin(theta) / theta) * K
      + ((Scalar(1) - std::cos(theta)) / (theta * theta)) * K2;
  }
  return Rotation<Scalar>::unchecked(m);
}

/// Rotation angle in [0, pi].
template<typename Scalar>
Scalar rotation_angle(const Rotation<Scalar>& r)
{
  const auto& m   = r.matrix();
  const Scalar c  = std::clamp((m.trace() - Scalar(1)) / Scalar(2), Scalar(-1), Scalar(1));
  const Vector3<Scalar> s(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(s.norm() / Scalar(2), c);
}

/**
 * @brief Axis-angle form of a rotation.
 *
 * The axis of the identity is reported as (1, 0, 0). Throws NearPiRotation
 * when the angle is within 1e-6 of pi.
 */
template<typename Scalar>
AxisAngle<Scalar> log_so3(const Rotation<Scalar>& r)
{
  const auto& m        = r.matrix();
  const Scalar angle   = rotation_angle(r);
  if (angle >= std::numbers::pi_v<Scalar> - Scalar(kNearPiMargin)) { throw NearPiRotation(angle); }

  const Vector3<Scalar> s(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  AxisAngle<Scalar> out;
  out.angle = angle;
  if (angle < std::numbers::pi_v<Scalar> / Scalar(2)) {
    const Scalar n = s.norm();
    if (n > Scalar(0)) { out.axis = s / n; }
    return out;
  }

  // R + R^T = 2 cos(a) I + 2 (1 - cos(a)) e e^T; pick the best conditioned column.
  const Scalar c         = std::cos(angle);
  const Matrix3<Scalar> B = (m + m.transpose() - Scalar(2) * c * Matrix3<Scalar>::Identity())
                          / (Scalar(2) * (Scalar(1) - c));
  int k = 0;
  B.diagonal().maxCoeff(&k);
  Vector3<Scalar> e = B.col(k) / std::sqrt(B(k, k));
  if (e.dot(s) < Scalar(0)) { e = -e; }
  out.axis = e.normalized();
  return out;
}

/// Geodesic distance angle(R1^T R2), in radians.
template<typename Scalar>
Scalar geodesic_angle(const Rotation<Scalar>& r1, const Rotation<Scalar>& r2)
{
  return rotation_angle(Rotation<Scalar>::unchecked(r1.matrix().transpose() * r2.matrix()));
}

/// z = vee((R - R^T) / 2) = e sin(theta).
template<typename Scalar>
Vector3<Scalar> config_error(const Rotation<Scalar>& r_tilde)
{
  const auto& m = r_tilde.matrix();
  return Vector3<Scalar>(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) / Scalar(2);
}

/**
 * @brief Nearest rotation in the Frobenius norm.
 *
 * Computes the orthogonal polar factor with the Newton iteration
 * X <- (X + X^-T) / 2, which converges quadratically near SO(3). Throws
 * NotNearRotation if the input is singular, has negative determinant, or
 * lies farther than 0.5 (Frobenius) from the result.
 */
template<typename Derived>
Rotation<typename Derived::Scalar> project_to_so3(const Eigen::MatrixBase<Derived>& m)
{
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> x = m;
  if (!x.allFinite() || !(x.determinant() > Scalar(0))) {
    throw NotNearRotation("project_to_so3: matrix is singular or reflects");
  }
  for (int it = 0; it < 64; ++it) {
    const Matrix3<Scalar> next = (x + x.inverse().transpose()) / Scalar(2);
    const Scalar step           = (next - x).norm();
    x                           = next;
    if (step < Scalar(1e-14)) { break; }
  }
  if ((x - m).norm() > Scalar(0.5)) { throw NotNearRotation("project_to_so3: input too far from SO(3)"); }
  return Rotation<Scalar>::unchecked(x);
}

/// Intrinsic Z-Y-X composition Rz(yaw) Ry(pitch) Rx(roll).
template<typename Scalar>
Rotation<Scalar> euler_to_rotation(Scalar yaw, Scalar pitch, Scalar roll)
{
  return exp_so3(Vector3<Scalar>(0, 0, yaw)) * exp_so3(Vector3<Scalar>(0, pitch, 0))
       * exp_so3(Vector3<Scalar>(roll, 0, 0));
}

}  // namespace hinf
