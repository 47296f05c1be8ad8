#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "quaternion.hpp"
#include "so3.hpp"

namespace hinf {

inline constexpr double kInfiniteGamma = std::numeric_limits<double>::infinity();

/**
 * @brief Tuning of the recursive filters.
 *
 * g scales the process disturbance (rad/s), k_list[i] scales the error on
 * the i-th direction measurement (rad) and gamma bounds the energy gain.
 * The MEKF reads g as sigma_omega and k_list as sigma_i and ignores gamma.
 */
struct FilterParams
{
  double g = 1.0;
  std::vector<double> k_list;
  double gamma = kInfiniteGamma;
  std::vector<Direction> r_list;

  std::size_t size() const noexcept { return r_list.size(); }

  void validate() const
  {
    if (!(g >= 0.0) || !std::isfinite(g)) { throw InvalidParams("g must be finite and >= 0"); }
    if (!(gamma > 0.0)) { throw InvalidParams("gamma must be > 0"); }
    if (r_list.empty()) { throw InvalidParams("at least one reference direction is required"); }
    if (k_list.size() != r_list.size()) { throw InvalidParams("k_list and r_list lengths differ"); }
    for (double k : k_list) {
      if (!(k > 0.0) || !std::isfinite(k)) { throw InvalidParams("k_i must be finite and > 0"); }
    }
  }
};

/**
 * @brief Symmetric positive definite 3x3 gain.
 *
 * Positive definiteness is checked with the three leading principal minors.
 */
class GainMatrix
{
public:
  static constexpr double kSymmetryTolerance = 1e-10;

  static bool is_valid(const Mat3& p)
  {
    if (!p.allFinite()) { return false; }
    if ((p - p.transpose()).cwiseAbs().maxCoeff() >= kSymmetryTolerance) { return false; }
    const double m1 = p(0, 0);
    const double m2 = p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0);
    const double m3 = p.determinant();
    return m1 > 0.0 && m2 > 0.0 && m3 > 0.0;
  }

  GainMatrix() : p_(0.5 * Mat3::Identity()) {}

  explicit GainMatrix(const Mat3& p) : p_(p)
  {
    if (!is_valid(p)) { throw InvalidParams("gain must be symmetric positive definite"); }
  }

  const Mat3& matrix() const noexcept { return p_; }

private:
  Mat3 p_;
};

/// H-infinity and GAME state.
struct GroupFilterState
{
  RotationMatrix R_hat;
  GainMatrix P;
  double t = 0.0;
};

/// MEKF state.
struct QuaternionFilterState
{
  UnitQuaternion q_hat;
  GainMatrix P;
  double t = 0.0;
};

enum class PIntegrator
{
  Euler,
  Rk4,
};

/// Which outer product enters the GAME curvature term E(sum P_s(k^-2 (y_hat - y) v^T)).
enum class GameCurvature
{
  /// v = y_hat, second-order expansion of the measurement cost. Default.
  EstimatedOuter,
  /// v = y, the measured direction.
  MeasuredOuter,
};

struct StepOptions
{
  PIntegrator integrator    = PIntegrator::Euler;
  double divergence_limit   = 1e6;
  GameCurvature curvature   = GameCurvature::EstimatedOuter;
};

namespace detail {

inline void check_sizes(std::span<const Vec3> y, const FilterParams& params)
{
  if (y.size() != params.size()) { throw InvalidParams("measurement count does not match reference count"); }
}

inline std::vector<Vec3> predicted_directions(const RotationMatrix& r_hat, const FilterParams& params)
{
  std::vector<Vec3> out;
  out.reserve(params.size());
  for (const auto& r : params.r_list) { out.push_back(r_hat.matrix().transpose() * r.vector()); }
  return out;
}

/// sum_i k_i^-2 y_hat_i^x y_hat_i^x
inline Mat3 information_term(std::span<const Vec3> y_hat, const FilterParams& params)
{
  Mat3 s = Mat3::Zero();
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    const Mat3 h = hat(y_hat[i]);
    s += (h * h) / (params.k_list[i] * params.k_list[i]);
  }
  return s;
}

inline Mat3 checked_gain(const Mat3& p, const StepOptions& opts, std::string_view filter, double t)
{
  if (!p.allFinite()) { throw FilterDiverged(std::string(filter), t, "gain has non-finite entries"); }
  if (p.cwiseAbs().maxCoeff() > opts.divergence_limit) {
    throw FilterDiverged(std::string(filter), t, "gain entry exceeds divergence limit");
  }
  if (!GainMatrix::is_valid(p)) { throw FilterDiverged(std::string(filter), t, "gain lost positive definiteness"); }
  return p;
}

template<typename Rhs>
Mat3 integrate_gain(const Mat3& p, double dt, PIntegrator integrator, Rhs&& rhs)
{
  if (integrator == PIntegrator::Euler) { return sym_proj(p + dt * rhs(p)); }
  const Mat3 k1 = rhs(p);
  const Mat3 k2 = rhs(Mat3(p + 0.5 * dt * k1));
  const Mat3 k3 = rhs(Mat3(p + 0.5 * dt * k2));
  const Mat3 k4 = rhs(Mat3(p + dt * k3));
  return sym_proj(p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace detail

/// l = sum_i k_i^-2 (y_hat_i x y_i), y_hat_i = R_hat^T r_i.
inline Vec3 innovation(const RotationMatrix& r_hat, std::span<const Vec3> y, const FilterParams& params)
{
  detail::check_sizes(y, params);
  Vec3 l = Vec3::Zero();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Vec3 y_hat = r_hat.matrix().transpose() * params.r_list[i].vector();
    l += y_hat.cross(y[i]) / (params.k_list[i] * params.k_list[i]);
  }
  return l;
}

/**
 * Right-hand side of the H-infinity gain equation
 *   P_s(2 P w^x) + P (sum k_i^-2 y_hat_i^x y_hat_i^x) P + g^2 I + P^2 / gamma^2.
 * With gamma = +inf the last term drops and this is the MEKF Riccati equation.
 */
inline Mat3 hinf_riccati_rhs(const Mat3& p, const Vec3& omega, std::span<const Vec3> y_hat,
                             const FilterParams& params)
{
  Mat3 rhs = sym_proj(Mat3(2.0 * p * hat(omega))) + p * detail::information_term(y_hat, params) * p
           + params.g * params.g * Mat3::Identity();
  if (std::isfinite(params.gamma)) { rhs += (p * p) / (params.gamma * params.gamma); }
  return sym_proj(rhs);
}

inline Mat3 mekf_riccati_rhs(const Mat3& p, const Vec3& omega, std::span<const Vec3> y_hat,
                             const FilterParams& params)
{
  FilterParams no_gamma = params;
  no_gamma.gamma        = kInfiniteGamma;
  return hinf_riccati_rhs(p, omega, y_hat, no_gamma);
}

/**
 * Right-hand side of the GAME gain equation: the MEKF terms plus the
 * curvature corrections -P_s(P (P l)^x) + P E(sum_i P_s(k_i^-2 (y_hat_i - y_i) v_i^T)) P,
 * with v_i selected by @p curvature.
 */
inline Mat3 game_riccati_rhs(const Mat3& p, const Vec3& omega, std::span<const Vec3> y_hat,
                             std::span<const Vec3> y, const Vec3& l, const FilterParams& params,
                             GameCurvature curvature = GameCurvature::EstimatedOuter)
{
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Vec3& v = curvature == GameCurvature::EstimatedOuter ? y_hat[i] : y[i];
    m += sym_proj(Mat3((y_hat[i] - y[i]) * v.transpose())) / (params.k_list[i] * params.k_list[i]);
  }
  Mat3 rhs = mekf_riccati_rhs(p, omega, y_hat, params) - sym_proj(Mat3(p * hat(Vec3(p * l))))
           + p * e_map(m) * p;
  return sym_proj(rhs);
}

/**
 * @brief One step of the H-infinity filter on SO(3).
 *
 * Attitude: R_hat <- project(R_hat exp(dt (w - P l))). Gain: one explicit
 * step of the Riccati equation (Euler or RK4 with the attitude frozen).
 * Throws FilterDiverged if the new gain is not SPD or exceeds the limit.
 */
inline GroupFilterState hinf_step(const GroupFilterState& state, const Vec3& omega, std::span<const Vec3> y,
                                  const FilterParams& params, double dt, const StepOptions& opts = {})
{
  detail::check_sizes(y, params);
  const Mat3& p                  = state.P.matrix();
  const std::vector<Vec3> y_hat  = detail::predicted_directions(state.R_hat, params);
  const Vec3 l                   = innovation(state.R_hat, y, params);
  const Vec3 omega_corr          = omega - p * l;

  GroupFilterState next{project_to_so3((state.R_hat * exp_so3(Vec3(dt * omega_corr))).matrix()), state.P,
                        state.t + dt};
  const Mat3 p_next = detail::integrate_gain(
      p, dt, opts.integrator, [&](const Mat3& x) { return hinf_riccati_rhs(x, omega, y_hat, params); });
  next.P = GainMatrix(detail::checked_gain(p_next, opts, "hinf", next.t));
  return next;
}

/// One step of the GAME filter; same attitude update as hinf_step.
inline GroupFilterState game_step(const GroupFilterState& state, const Vec3& omega, std::span<const Vec3> y,
                                  const FilterParams& params, double dt, const StepOptions& opts = {})
{
  detail::check_sizes(y, params);
  const Mat3& p                  = state.P.matrix();
  const std::vector<Vec3> y_hat  = detail::predicted_directions(state.R_hat, params);
  const Vec3 l                   = innovation(state.R_hat, y, params);
  const Vec3 omega_corr          = omega - p * l;

  GroupFilterState next{project_to_so3((state.R_hat * exp_so3(Vec3(dt * omega_corr))).matrix()), state.P,
                        state.t + dt};
  const Mat3 p_next = detail::integrate_gain(p, dt, opts.integrator, [&](const Mat3& x) {
    return game_riccati_rhs(x, omega, y_hat, y, l, params, opts.curvature);
  });
  next.P = GainMatrix(detail::checked_gain(p_next, opts, "game", next.t));
  return next;
}

/**
 * @brief One step of the continuous-time quaternion MEKF.
 *
 * q <- q * exp(dt w_ref / 2) with w_ref = w - P sum sigma_i^-2 (y_hat_i x y_i)
 * and y_hat_i taken from the quaternion's rotation matrix.
 */
inline QuaternionFilterState mekf_step(const QuaternionFilterState& state, const Vec3& omega,
                                       std::span<const Vec3> y, const FilterParams& params, double dt,
                                       const StepOptions& opts = {})
{
  detail::check_sizes(y, params);
  const Mat3& p                  = state.P.matrix();
  const RotationMatrix r_hat     = state.q_hat.to_rotation();
  const std::vector<Vec3> y_hat  = detail::predicted_directions(r_hat, params);
  const Vec3 omega_ref           = omega - p * innovation(r_hat, y, params);

  QuaternionFilterState next{state.q_hat * UnitQuaternion::exp(Vec3(0.5 * dt * omega_ref)), state.P,
                             state.t + dt};
  const Mat3 p_next = detail::integrate_gain(
      p, dt, opts.integrator, [&](const Mat3& x) { return mekf_riccati_rhs(x, omega, y_hat, params); });
  next.P = GainMatrix(detail::checked_gain(p_next, opts, "mekf", next.t));
  return next;
}

/**
 * @brief TRIAD attitude from two direction pairs.
 *
 * Builds orthonormal triads anchored on the first pair and returns R_hat
 * with R_hat^T r_i ~= y_i (exact when the measurements are noiseless).
 */
inline RotationMatrix triad_estimate(const Vec3& y1, const Vec3& y2, const Vec3& r1, const Vec3& r2)
{
  constexpr double kMinCross = 1e-6;
  const auto triad           = [&](const Vec3& a, const Vec3& b) -> Mat3 {
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) { throw DegenerateDirections("triad: zero-length direction"); }
    const Vec3 t1 = a / na;
    Vec3 t2       = t1.cross(b / nb);
    if (!(t2.norm() > kMinCross)) { throw DegenerateDirections("triad: directions are collinear"); }
    t2.normalize();
    Mat3 m;
    m.col(0) = t1;
    m.col(1) = t2;
    m.col(2) = t1.cross(t2);
    return m;
  };
  const Mat3 body      = triad(y1, y2);
  const Mat3 reference = triad(r1, r2);
  return RotationMatrix::unchecked(reference * body.transpose());
}

// ---------------------------------------------------------------------------
// Common stepping interface
// ---------------------------------------------------------------------------

/**
 * A filter is advanced over a uniform grid. At grid point t_k the harness
 * first reads estimate() for the frame at t_k, then calls advance() with
 * the same frame to move the state to t_{k+1}.
 */
class AttitudeFilter
{
public:
  virtual ~AttitudeFilter() = default;

  virtual std::string_view name() const = 0;
  virtual RotationMatrix estimate(const Vec3& omega, std::span<const Vec3> y) const = 0;
  virtual void advance(const Vec3& omega, std::span<const Vec3> y, double dt) = 0;
  virtual std::optional<Mat3> gain() const { return std::nullopt; }
};

class HInfFilter final : public AttitudeFilter
{
public:
  HInfFilter(FilterParams params, GroupFilterState init, StepOptions opts = {})
      : params_(std::move(params)), state_(std::move(init)), opts_(opts)
  {
    params_.validate();
  }

  std::string_view name() const override { return "hinf"; }
  RotationMatrix estimate(const Vec3&, std::span<const Vec3>) const override { return state_.R_hat; }
  void advance(const Vec3& omega, std::span<const Vec3> y, double dt) override
  {
    state_ = hinf_step(state_, omega, y, params_, dt, opts_);
  }
  std::optional<Mat3> gain() const override { return state_.P.matrix(); }
  const GroupFilterState& state() const noexcept { return state_; }

private:
  FilterParams params_;
  GroupFilterState state_;
  StepOptions opts_;
};

class GameFilter final : public AttitudeFilter
{
public:
  GameFilter(FilterParams params, GroupFilterState init, StepOptions opts = {})
      : params_(std::move(params)), state_(std::move(init)), opts_(opts)
  {
    params_.validate();
  }

  std::string_view name() const override { return "game"; }
  RotationMatrix estimate(const Vec3&, std::span<const Vec3>) const override { return state_.R_hat; }
  void advance(const Vec3& omega, std::span<const Vec3> y, double dt) override
  {
    state_ = game_step(state_, omega, y, params_, dt, opts_);
  }
  std::optional<Mat3> gain() const override { return state_.P.matrix(); }
  const GroupFilterState& state() const noexcept { return state_; }

private:
  FilterParams params_;
  GroupFilterState state_;
  StepOptions opts_;
};

class MekfFilter final : public AttitudeFilter
{
public:
  MekfFilter(FilterParams params, QuaternionFilterState init, StepOptions opts = {})
      : params_(std::move(params)), state_(std::move(init)), opts_(opts)
  {
    params_.validate();
  }

  std::string_view name() const override { return "mekf"; }
  RotationMatrix estimate(const Vec3&, std::span<const Vec3>) const override { return state_.q_hat.to_rotation(); }
  void advance(const Vec3& omega, std::span<const Vec3> y, double dt) override
  {
    state_ = mekf_step(state_, omega, y, params_, dt, opts_);
  }
  std::optional<Mat3> gain() const override { return state_.P.matrix(); }
  const QuaternionFilterState& state() const noexcept { return state_; }

private:
  FilterParams params_;
  QuaternionFilterState state_;
  StepOptions opts_;
};

/// Memoryless TRIAD on the first two directions; keeps the last good answer on degenerate input.
class TriadFilter final : public AttitudeFilter
{
public:
  explicit TriadFilter(std::vector<Direction> r_list) : r_list_(std::move(r_list))
  {
    if (r_list_.size() < 2) { throw InvalidParams("TRIAD needs at least two reference directions"); }
  }

  std::string_view name() const override { return "triad"; }
  RotationMatrix estimate(const Vec3&, std::span<const Vec3> y) const override
  {
    if (y.size() < 2) { throw InvalidParams("TRIAD needs at least two measured directions"); }
    try {
      last_ = triad_estimate(y[0], y[1], r_list_[0], r_list_[1]);
    } catch (const DegenerateDirections&) {
    }
    return last_;
  }
  void advance(const Vec3&, std::span<const Vec3>, double) override {}

private:
  std::vector<Direction> r_list_;
  mutable RotationMatrix last_;
};

}  // namespace hinf
