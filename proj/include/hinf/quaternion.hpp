#pragma once

#include <cmath>

#include "so3.hpp"

namespace hinf {

/**
 * @brief Hamilton unit quaternion (vector part first, scalar last).
 *
 * to_rotation() returns the matrix R with R = (qs^2 - qv.qv) I + 2 qv qv^T
 * + 2 qs qv^x, so that q1 * q2 maps to R(q1) R(q2) and the kinematics
 * d/dt q = q * (0, w) / 2 correspond to d/dt R = R w^x.
 */
class UnitQuaternion
{
public:
  static constexpr double kTolerance = 1e-9;

  UnitQuaternion() = default;

  /// Throws NotUnitVector if |q| deviates from 1 by more than 1e-9.
  UnitQuaternion(const Vec3& qv, double qs) : qv_(qv), qs_(qs)
  {
    if (std::abs(std::sqrt(qv.squaredNorm() + qs * qs) - 1.0) > kTolerance) {
      throw NotUnitVector("quaternion must have unit norm");
    }
  }

  static UnitQuaternion identity() { return {}; }

  static UnitQuaternion normalized(const Vec3& qv, double qs)
  {
    const double n = std::sqrt(qv.squaredNorm() + qs * qs);
    if (!(n > 0.0)) { throw NotUnitVector("cannot normalize a zero quaternion"); }
    UnitQuaternion q;
    q.qv_ = qv / n;
    q.qs_ = qs / n;
    return q;
  }

  /// exp of the pure quaternion (0, phi): rotation by angle 2|phi|.
  static UnitQuaternion exp(const Vec3& phi)
  {
    const double a = phi.norm();
    UnitQuaternion q;
    q.qs_ = std::cos(a);
    q.qv_ = a < kSmallAngle ? Vec3(phi * (1.0 - a * a / 6.0)) : Vec3(phi * (std::sin(a) / a));
    return normalized(q.qv_, q.qs_);
  }

  /// The quaternion with to_rotation() == r (scalar part kept non-negative).
  static UnitQuaternion from_rotation(const RotationMatrix& r)
  {
    const Mat3& m   = r.matrix();
    const double tr = m.trace();
    Vec3 v;
    double s;
    if (tr > 0.0) {
      const double w = std::sqrt(tr + 1.0) * 2.0;
      s              = 0.25 * w;
      v              = Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) / w;
    } else {
      int i = 0;
      m.diagonal().maxCoeff(&i);
      const int j    = (i + 1) % 3;
      const int k    = (i + 2) % 3;
      const double w = std::sqrt(1.0 + m(i, i) - m(j, j) - m(k, k)) * 2.0;
      v(i)           = 0.25 * w;
      v(j)           = (m(j, i) + m(i, j)) / w;
      v(k)           = (m(k, i) + m(i, k)) / w;
      s              = (m(k, j) - m(j, k)) / w;
    }
    if (s < 0.0) {
      v = -v;
      s = -s;
    }
    return normalized(v, s);
  }

  const Vec3& vec() const noexcept { return qv_; }
  double scalar() const noexcept { return qs_; }

  UnitQuaternion operator*(const UnitQuaternion& o) const
  {
    const Vec3 v   = qs_ * o.qv_ + o.qs_ * qv_ + qv_.cross(o.qv_);
    const double s = qs_ * o.qs_ - qv_.dot(o.qv_);
    return normalized(v, s);
  }

  RotationMatrix to_rotation() const
  {
    const Mat3 m = (qs_ * qs_ - qv_.squaredNorm()) * Mat3::Identity() + 2.0 * qv_ * qv_.transpose()
                 + 2.0 * qs_ * hat(qv_);
    return RotationMatrix::unchecked(m);
  }

private:
  Vec3 qv_  = Vec3::Zero();
  double qs_ = 1.0;
};

}  // namespace hinf
