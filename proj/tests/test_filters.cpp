#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <hinf/filters.hpp>
#include <hinf/sim.hpp>

#include "test_util.hpp"

using namespace hinf;
using hinf::testing::random_rotation;
using hinf::testing::random_spd;
using hinf::testing::random_unit;
using hinf::testing::random_vector;

namespace {

FilterParams params_for(const Scenario& s, double gamma)
{
  FilterParams p;
  p.g      = s.sigma_process;
  p.k_list = std::vector<double>(s.r_list.size(), s.sigma_meas);
  p.gamma  = gamma;
  p.r_list = s.r_list;
  return p;
}

FilterParams simple_params(double gamma = 1.0)
{
  FilterParams p;
  p.g      = 0.3;
  p.k_list = {0.5, 0.8};
  p.gamma  = gamma;
  p.r_list = {Direction(Vec3::UnitX()), Direction(Vec3::UnitZ())};
  return p;
}

std::vector<Vec3> predicted(const RotationMatrix& r_hat, const FilterParams& p)
{
  std::vector<Vec3> out;
  for (const auto& r : p.r_list) { out.push_back(r_hat.matrix().transpose() * r.vector()); }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(FilterParams, Validation)
{
  FilterParams p = simple_params();
  EXPECT_NO_THROW(p.validate());
  p.k_list = {0.5};
  EXPECT_THROW(p.validate(), InvalidParams);
  p        = simple_params();
  p.gamma  = 0.0;
  EXPECT_THROW(p.validate(), InvalidParams);
  p        = simple_params();
  p.k_list = {0.5, 0.0};
  EXPECT_THROW(p.validate(), InvalidParams);
  p   = simple_params();
  p.g = -1.0;
  EXPECT_THROW(p.validate(), InvalidParams);
  p       = simple_params();
  p.gamma = kInfiniteGamma;
  EXPECT_NO_THROW(p.validate());
}

TEST(GainMatrix, LeadingMinorCheck)
{
  EXPECT_TRUE(GainMatrix::is_valid(Mat3::Identity()));
  Mat3 m = Mat3::Identity();
  m(2, 2) = -0.1;
  EXPECT_FALSE(GainMatrix::is_valid(m));
  m = Mat3::Identity();
  m(0, 1) = 1e-9;
  EXPECT_FALSE(GainMatrix::is_valid(m));  // not symmetric
  Mat3 indefinite;
  indefinite << 1, 2, 0, 2, 1, 0, 0, 0, 1;
  EXPECT_FALSE(GainMatrix::is_valid(indefinite));
  EXPECT_THROW(GainMatrix{indefinite}, InvalidParams);
}

// ---------------------------------------------------------------------------

TEST(Innovation, ZeroWhenMeasurementsAgree)
{
  std::mt19937_64 rng(1);
  const FilterParams p   = simple_params();
  const RotationMatrix r = random_rotation(rng);
  const auto y           = predicted(r, p);
  EXPECT_LT(innovation(r, y, p).norm(), 1e-15);
}

TEST(Innovation, SingleDirectionByHand)
{
  FilterParams p;
  p.k_list       = {1.0};
  p.r_list       = {Direction(Vec3::UnitZ())};
  const double a = 0.1;
  const std::vector<Vec3> y{Vec3(std::sin(a), 0, std::cos(a))};
  const Vec3 l = innovation(RotationMatrix::identity(), y, p);
  EXPECT_LT((l - Vec3(0, std::sin(a), 0)).norm(), 1e-12);
  EXPECT_NEAR(l(1), 0.0998, 1e-4);

  p.k_list = {2.0};
  EXPECT_LT((innovation(RotationMatrix::identity(), y, p) - l / 4.0).norm(), 1e-16);
}

TEST(Innovation, LeftInvariance)
{
  std::mt19937_64 rng(2);
  const FilterParams p = simple_params();
  for (int i = 0; i < 200; ++i) {
    const RotationMatrix r     = random_rotation(rng);
    const RotationMatrix r_hat = random_rotation(rng);
    const RotationMatrix q     = random_rotation(rng);
    std::vector<Vec3> y;
    for (const auto& ri : p.r_list) { y.push_back(r.matrix().transpose() * ri.vector() + 0.1 * random_vector(rng, 1.0)); }

    FilterParams moved = p;
    for (auto& ri : moved.r_list) { ri = Direction::normalized(q * ri.vector()); }
    // (Q R)^T (Q r_i) = R^T r_i, so the measurements are unchanged
    EXPECT_LT((innovation(q * r_hat, y, moved) - innovation(r_hat, y, p)).norm(), 1e-12);
  }
}

TEST(Innovation, RejectsLengthMismatch)
{
  const FilterParams p = simple_params();
  const std::vector<Vec3> y{Vec3::UnitX()};
  EXPECT_THROW(innovation(RotationMatrix::identity(), y, p), InvalidParams);
}

// ---------------------------------------------------------------------------

TEST(RiccatiRhs, HandEvaluatedExample)
{
  FilterParams p;
  p.g      = 1.0;
  p.gamma  = 1.0;
  p.k_list = {1.0};
  p.r_list = {Direction(Vec3::UnitZ())};
  const std::vector<Vec3> y_hat{Vec3::UnitZ()};
  const Mat3 rhs = hinf_riccati_rhs(Mat3::Identity(), Vec3::Zero(), y_hat, p);
  EXPECT_LT((rhs - Vec3(1, 1, 2).asDiagonal().toDenseMatrix()).norm(), 1e-15);
}

TEST(RiccatiRhs, InfiniteGammaIsMekf)
{
  std::mt19937_64 rng(4);
  FilterParams p = simple_params(kInfiniteGamma);
  for (int i = 0; i < 100; ++i) {
    const Mat3 pm  = random_spd(rng);
    const Vec3 w   = random_vector(rng, 2.0);
    const auto yh  = predicted(random_rotation(rng), p);
    EXPECT_EQ(hinf_riccati_rhs(pm, w, yh, p), mekf_riccati_rhs(pm, w, yh, p));
  }
}

TEST(RiccatiRhs, GammaTermIsPSquaredOverGammaSquared)
{
  std::mt19937_64 rng(5);
  for (double gamma : {0.5, 0.9, 3.0}) {
    const FilterParams p = simple_params(gamma);
    for (int i = 0; i < 100; ++i) {
      const Mat3 pm = random_spd(rng);
      const Vec3 w  = random_vector(rng, 2.0);
      const auto yh = predicted(random_rotation(rng), p);
      const Mat3 d  = hinf_riccati_rhs(pm, w, yh, p) - mekf_riccati_rhs(pm, w, yh, p);
      EXPECT_LT((d - pm * pm / (gamma * gamma)).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + (pm * pm).norm()));
    }
  }
}

TEST(RiccatiRhs, OutputExactlySymmetric)
{
  std::mt19937_64 rng(6);
  const FilterParams p = simple_params(0.9);
  for (int i = 0; i < 200; ++i) {
    const Mat3 pm = random_spd(rng);
    const Vec3 w  = random_vector(rng, 2.0);
    const RotationMatrix r_hat = random_rotation(rng);
    const auto yh = predicted(r_hat, p);
    std::vector<Vec3> y;
    for (const auto& v : yh) { y.push_back(v + 0.3 * random_vector(rng, 1.0)); }
    const Mat3 h = hinf_riccati_rhs(pm, w, yh, p);
    EXPECT_EQ(h, h.transpose());
    const Mat3 g = game_riccati_rhs(pm, w, yh, y, innovation(r_hat, y, p), p);
    EXPECT_EQ(g, g.transpose());
  }
}

TEST(GameRhs, ZeroInnovationReducesToMekf)
{
  std::mt19937_64 rng(7);
  const FilterParams p = simple_params();
  for (int i = 0; i < 100; ++i) {
    const Mat3 pm = random_spd(rng);
    const Vec3 w  = random_vector(rng, 2.0);
    const RotationMatrix r_hat = random_rotation(rng);
    const auto yh = predicted(r_hat, p);
    const Vec3 l  = innovation(r_hat, yh, p);
    for (auto c : {GameCurvature::EstimatedOuter, GameCurvature::MeasuredOuter}) {
      EXPECT_LT((game_riccati_rhs(pm, w, yh, yh, l, p, c) - mekf_riccati_rhs(pm, w, yh, p)).norm(),
                1e-12 * (1.0 + pm.squaredNorm()));
    }
  }
}

TEST(GameRhs, CurvatureTermMatchesCostHessian)
{
  // Second derivative of c(e) = sum k^-2 |y - exp(e)^T R_hat^T r|^2 / 2 at e = 0
  // (right perturbation R_hat exp(e^x)), computed by central differences.
  std::mt19937_64 rng(8);
  const FilterParams p       = simple_params();
  const RotationMatrix r_hat = random_rotation(rng);
  const auto yh              = predicted(r_hat, p);
  std::vector<Vec3> y;
  for (const auto& v : yh) { y.push_back(v + 0.4 * random_vector(rng, 1.0)); }

  const auto cost = [&](const Vec3& e) {
    const RotationMatrix r = r_hat * exp_so3(e);
    double c               = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      c += (y[i] - r.matrix().transpose() * p.r_list[i].vector()).squaredNorm() / (2.0 * p.k_list[i] * p.k_list[i]);
    }
    return c;
  };
  Mat3 hess;
  const double h = 1e-4;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const Vec3 ea = h * Vec3::Unit(a), eb = h * Vec3::Unit(b);
      hess(a, b) = (cost(ea + eb) - cost(ea - eb) - cost(Vec3(-ea + eb)) + cost(Vec3(-ea - eb))) / (4 * h * h);
    }
  }
  // -P Hess_sym P must equal (GAME rhs) - (MEKF rhs) + P_s(P (P l)^x)
  const Mat3 pm = Mat3::Identity();
  const Vec3 l  = innovation(r_hat, y, p);
  const Mat3 curvature = game_riccati_rhs(pm, Vec3::Zero(), yh, y, l, p) - mekf_riccati_rhs(pm, Vec3::Zero(), yh, p)
                       + sym_proj(Mat3(pm * hat(Vec3(pm * l))));
  const Mat3 info = pm * detail::information_term(yh, p) * pm;
  EXPECT_LT((-(sym_proj(hess)) - (info + curvature)).norm(), 1e-5);
}

// ---------------------------------------------------------------------------

TEST(HinfStep, NoiselessConstantRateTracksExactly)
{
  Scenario s      = builtin_scenario("caseA");
  s.sigma_process = 0.0;
  s.sigma_meas    = 0.0;
  s.duration      = 5.0;
  s.profile       = RateProfile::constant(Vec3(0.3, -0.2, 0.5));
  const auto frames = simulate(s);
  const FilterParams p = params_for(builtin_scenario("caseA"), 0.9);
  std::mt19937_64 rng(3);
  GroupFilterState st{frames[0].R_true, GainMatrix(random_spd(rng)), 0.0};
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    EXPECT_LT(innovation(st.R_hat, frames[k].y_list, p).norm(), 1e-9);
    st = hinf_step(st, frames[k].omega_meas, frames[k].y_list, p, s.dt);
    EXPECT_LT(geodesic_angle(st.R_hat, frames[k + 1].R_true), 1e-9);
  }
}

TEST(HinfStep, NoiselessVaryingRateStaysClose)
{
  // the truth integrates the midpoint rate and the filter the left-point
  // rate; the O(dt) rate bias is held in check by the correction term
  Scenario s      = builtin_scenario("caseA");
  s.sigma_process = 0.0;
  s.sigma_meas    = 0.0;
  const auto frames = simulate(s);
  GroupFilterState st{frames[0].R_true, GainMatrix(), 0.0};
  const FilterParams p = params_for(builtin_scenario("caseA"), 0.9);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    st    = hinf_step(st, frames[k].omega_meas, frames[k].y_list, p, s.dt);
    worst = std::max(worst, geodesic_angle(st.R_hat, frames[k + 1].R_true));
  }
  EXPECT_LT(worst, 0.01);
}

TEST(HinfStep, CaseAGammaPointNineStaysBounded)
{
  const Scenario s  = builtin_scenario("caseA");
  const auto frames = simulate(s);
  HInfFilter f(params_for(s, 0.9), GroupFilterState{});
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    ASSERT_NO_THROW(f.advance(frames[k].omega_meas, frames[k].y_list, s.dt)) << k;
  }
  EXPECT_TRUE(GainMatrix::is_valid(f.state().P.matrix()));
  EXPECT_LT(f.state().R_hat.defect(), 1e-12);
  EXPECT_NEAR(f.state().t, 29.99, 1e-9);
}

TEST(HinfStep, TinyGammaDiverges)
{
  const Scenario s  = builtin_scenario("caseA");
  const auto frames = simulate(s);
  HInfFilter f(params_for(s, 1e-3), GroupFilterState{});
  bool diverged = false;
  for (std::size_t k = 0; k + 1 < frames.size() && !diverged; ++k) {
    try {
      f.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
    } catch (const FilterDiverged& e) {
      diverged = true;
      EXPECT_EQ(e.filter(), "hinf");
      EXPECT_LT(e.time(), 1.0);
    }
  }
  EXPECT_TRUE(diverged);
}

TEST(HinfStep, Rk4GainIntegratorAgreesWithEuler)
{
  const Scenario s  = builtin_scenario("caseA");
  const auto frames = simulate(s);
  StepOptions rk4;
  rk4.integrator = PIntegrator::Rk4;
  HInfFilter euler(params_for(s, 0.9), GroupFilterState{});
  HInfFilter rk(params_for(s, 0.9), GroupFilterState{}, rk4);
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    euler.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
    rk.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
  }
  EXPECT_LT((euler.state().P.matrix() - rk.state().P.matrix()).norm(), 0.05 * euler.state().P.matrix().norm());
  EXPECT_NE(euler.state().P.matrix(), rk.state().P.matrix());
}

// ---------------------------------------------------------------------------

TEST(UnitQuaternion, IdentityAndRotationFormula)
{
  EXPECT_EQ(UnitQuaternion::identity().to_rotation().matrix(), Mat3::Identity());
  for (double theta : {0.1, 1.0, 2.5}) {
    const UnitQuaternion q(Vec3(0, 0, std::sin(theta / 2)), std::cos(theta / 2));
    EXPECT_LT((q.to_rotation().matrix() - exp_so3(Vec3(0, 0, theta)).matrix()).norm(), 1e-15);
  }
  EXPECT_THROW(UnitQuaternion(Vec3(1, 1, 0), 0.0), NotUnitVector);
}

TEST(UnitQuaternion, ProductMatchesMatrixProduct)
{
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const RotationMatrix a = random_rotation(rng);
    const RotationMatrix b = random_rotation(rng);
    const UnitQuaternion qa = UnitQuaternion::from_rotation(a);
    const UnitQuaternion qb = UnitQuaternion::from_rotation(b);
    EXPECT_LT((qa.to_rotation().matrix() - a.matrix()).norm(), 1e-13);
    EXPECT_LT(((qa * qb).to_rotation().matrix() - (a * b).matrix()).norm(), 1e-13);
    const Vec3 v = random_vector(rng, 1.5);
    EXPECT_LT((UnitQuaternion::exp(Vec3(0.5 * v)).to_rotation().matrix() - exp_so3(v).matrix()).norm(), 1e-14);
  }
}

TEST(MekfStep, MatchesHinfWithInfiniteGamma)
{
  const Scenario s  = builtin_scenario("caseA");
  const auto frames = simulate(s);
  const FilterParams p = params_for(s, kInfiniteGamma);
  HInfFilter hinf(p, GroupFilterState{});
  MekfFilter mekf(p, QuaternionFilterState{});
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    hinf.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
    mekf.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
    worst = std::max(worst, geodesic_angle(hinf.state().R_hat, mekf.state().q_hat.to_rotation()));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(MekfStep, KeepsUnitNorm)
{
  const Scenario s  = builtin_scenario("caseB");
  const auto frames = simulate(s);
  MekfFilter mekf(params_for(s, kInfiniteGamma), QuaternionFilterState{});
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) { mekf.advance(frames[k].omega_meas, frames[k].y_list, s.dt); }
  const auto& q = mekf.state().q_hat;
  EXPECT_NEAR(q.vec().squaredNorm() + q.scalar() * q.scalar(), 1.0, 1e-12);
}

// ---------------------------------------------------------------------------

TEST(GameStep, ConvergesFasterThanHinfOnCaseA)
{
  const Scenario s  = builtin_scenario("caseA");
  const auto frames = simulate(s);
  GameFilter game(params_for(s, 0.9), GroupFilterState{});
  HInfFilter hinf(params_for(s, 0.9), GroupFilterState{});
  double sum_game = 0.0, sum_hinf = 0.0;
  for (std::size_t k = 0; k + 1 < 1000; ++k) {
    sum_game += std::pow(geodesic_angle(frames[k].R_true, game.estimate({}, {})), 2);
    sum_hinf += std::pow(geodesic_angle(frames[k].R_true, hinf.estimate({}, {})), 2);
    game.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
    hinf.advance(frames[k].omega_meas, frames[k].y_list, s.dt);
  }
  EXPECT_LT(sum_game, sum_hinf);
}

// ---------------------------------------------------------------------------

TEST(Triad, ExactOnNoiselessMeasurements)
{
  std::mt19937_64 rng(10);
  for (int i = 0; i < 500; ++i) {
    const RotationMatrix r = random_rotation(rng);
    const Vec3 r1          = random_unit(rng);
    const Vec3 r2          = random_unit(rng);
    const RotationMatrix est =
        triad_estimate(r.matrix().transpose() * r1, r.matrix().transpose() * r2, r1, r2);
    EXPECT_LT(geodesic_angle(est, r), 1e-9);
    EXPECT_LT(est.defect(), 1e-12);
  }
}

TEST(Triad, DegenerateDirectionsRaise)
{
  EXPECT_THROW(triad_estimate(Vec3::UnitX(), Vec3(2, 0, 0), Vec3::UnitX(), Vec3::UnitY()), DegenerateDirections);
  EXPECT_THROW(triad_estimate(Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), Vec3(0, 0, -1)), DegenerateDirections);
  EXPECT_THROW(triad_estimate(Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitY()), DegenerateDirections);
  // swapped measurements are not degenerate, just wrong
  EXPECT_NO_THROW(triad_estimate(Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitY()));
}

TEST(Triad, FilterKeepsLastEstimateOnDegenerateInput)
{
  TriadFilter f({Direction(Vec3::UnitX()), Direction(Vec3::UnitZ())});
  const RotationMatrix r = exp_so3(Vec3(0.1, 0.2, 0.3));
  const std::vector<Vec3> good{r.matrix().transpose() * Vec3::UnitX(), r.matrix().transpose() * Vec3::UnitZ()};
  const std::vector<Vec3> bad{Vec3::UnitX(), Vec3::UnitX()};
  EXPECT_LT(geodesic_angle(f.estimate({}, good), r), 1e-12);
  EXPECT_LT(geodesic_angle(f.estimate({}, bad), r), 1e-12);
}
