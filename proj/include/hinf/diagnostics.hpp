#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/LU>

#include "filters.hpp"
#include "so3.hpp"

namespace hinf {

/// Storage function V = gamma^2 z^T P^-1 z.
inline double storage_function(const Vec3& z, const Mat3& p, double gamma)
{
  return gamma * gamma * z.dot(p.inverse() * z);
}

/// Same value written through the axis-angle pair: gamma^2 sin^2(theta) e^T P^-1 e.
inline double storage_function(const AxisAngle<double>& err, const Mat3& p, double gamma)
{
  const double s = std::sin(err.angle);
  return gamma * gamma * s * s * err.axis.dot(p.inverse() * err.axis);
}

/// delta* = (g / 2) E(R_tilde)^T P^-1 z
inline Vec3 worst_case_disturbance(const RotationMatrix& r_tilde, const Mat3& p, const FilterParams& params)
{
  const Vec3 z = config_error(r_tilde);
  return 0.5 * params.g * e_map(r_tilde.matrix()).transpose() * p.inverse() * z;
}

/// Small-error gain block G_{q,i} = P (y_hat_i^x)^T k_i^-2 with y_hat_i = R_hat^T r_i.
inline Mat3 measurement_gain_block(std::size_t i, const RotationMatrix& r_hat, const Mat3& p,
                                   const FilterParams& params)
{
  const Vec3 y_hat = r_hat.matrix().transpose() * params.r_list.at(i).vector();
  const double k   = params.k_list.at(i);
  return p * hat(y_hat).transpose() / (k * k);
}

/// eps_i* = -(k_i / 2) G_{q,i}^T E(R_tilde) P^-1 z
inline Vec3 worst_case_meas_error(std::size_t i, const RotationMatrix& r_tilde, const RotationMatrix& r_hat,
                                  const Mat3& p, const FilterParams& params)
{
  const Vec3 z   = config_error(r_tilde);
  const Mat3 gqi = measurement_gain_block(i, r_hat, p, params);
  return -0.5 * params.k_list.at(i) * gqi.transpose() * e_map(r_tilde.matrix()) * p.inverse() * z;
}

/**
 * @brief Left-hand side of the dissipation inequality before the
 * disturbances are eliminated, as a function of (delta, eps_1..eps_p).
 *
 * The inequality requires this value to be <= 0. It is concave and
 * quadratic in each disturbance, so the worst-case disturbances are its
 * stationary points.
 */
class DissipationQuadratic
{
public:
  DissipationQuadratic(RotationMatrix r_tilde, RotationMatrix r_hat, Mat3 p, Mat3 p_dot, Vec3 omega,
                       FilterParams params)
      : r_tilde_(std::move(r_tilde)),
        r_hat_(std::move(r_hat)),
        p_(std::move(p)),
        p_dot_(std::move(p_dot)),
        omega_(std::move(omega)),
        params_(std::move(params))
  {
    p_inv_ = p_.inverse();
    z_     = config_error(r_tilde_);
  }

  double operator()(const Vec3& delta, std::span<const Vec3> eps) const
  {
    const double g2   = params_.gamma * params_.gamma;
    const Mat3 e      = e_map(r_tilde_.matrix());
    const Vec3 a      = p_inv_ * z_;  // P^-1 z
    const Vec3 b      = e * a;        // E(R_tilde) P^-1 z, so z^T P^-1 E^T = b^T
    const Mat3 rt_t   = r_tilde_.matrix().transpose();

    double v = -g2 * a.dot(p_dot_ * a) - 2.0 * g2 * a.dot(hat(omega_) * z_);
    v += params_.g * g2 * a.dot(e * delta);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Mat3 gqi   = measurement_gain_block(i, r_hat_, p_, params_);
      const Vec3 y_hat = r_hat_.matrix().transpose() * params_.r_list[i].vector();
      const Vec3 diff  = rt_t * y_hat - y_hat;  // R^T r_i - R_hat^T r_i
      v -= g2 * b.dot(gqi * diff);
      v -= g2 * b.dot(gqi * (params_.k_list[i] * eps[i]));
      v -= g2 * eps[i].squaredNorm();
    }
    v -= g2 * delta.squaredNorm();
    v += z_.squaredNorm();
    return v;
  }

  const Vec3& penalty() const noexcept { return z_; }

private:
  RotationMatrix r_tilde_;
  RotationMatrix r_hat_;
  Mat3 p_;
  Mat3 p_dot_;
  Vec3 omega_;
  FilterParams params_;
  Mat3 p_inv_;
  Vec3 z_;
};

/// Per-step record fed to dissipation_audit().
struct AuditSample
{
  Vec3 z;
  Vec3 delta;
  std::vector<Vec3> eps;
  double angle = 0.0;  ///< geodesic estimation error, rad
};

struct AuditReport
{
  double lhs           = 0.0;  ///< integral of |z|^2
  double rhs           = 0.0;  ///< gamma^2 |z_0|^2 + gamma^2 integral of (|delta|^2 + sum |eps_i|^2)
  bool satisfied       = true;
  double max_angle     = 0.0;
  /// The bound only carries a guarantee while the error stays below pi/2.
  bool in_valid_region = true;
};

/// Trapezoidal audit of the energy-gain bound over a uniformly sampled trace.
inline AuditReport dissipation_audit(std::span<const AuditSample> trace, double dt, double gamma)
{
  AuditReport report;
  if (trace.empty()) { return report; }
  const auto disturbance_energy = [](const AuditSample& s) {
    double e = s.delta.squaredNorm();
    for (const auto& x : s.eps) { e += x.squaredNorm(); }
    return e;
  };

  double penalty_integral     = 0.0;
  double disturbance_integral = 0.0;
  for (std::size_t k = 0; k + 1 < trace.size(); ++k) {
    penalty_integral += 0.5 * dt * (trace[k].z.squaredNorm() + trace[k + 1].z.squaredNorm());
    disturbance_integral += 0.5 * dt * (disturbance_energy(trace[k]) + disturbance_energy(trace[k + 1]));
  }
  for (const auto& s : trace) { report.max_angle = std::max(report.max_angle, s.angle); }

  const double g2        = gamma * gamma;
  report.lhs             = penalty_integral;
  report.rhs             = g2 * trace.front().z.squaredNorm() + g2 * disturbance_integral;
  report.satisfied       = report.lhs <= report.rhs;
  report.in_valid_region = report.max_angle < std::numbers::pi / 2.0;
  return report;
}

}  // namespace hinf
