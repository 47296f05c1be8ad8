#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "so3.hpp"

namespace hinf {

// ---------------------------------------------------------------------------
// Angular rate profiles
// ---------------------------------------------------------------------------

/**
 * @brief Named analytic angular-rate profile.
 *
 * Registered tags:
 *   caseA            (cos 3t, 0.1 sin 2t, -cos t)
 *   constant:wx,wy,wz
 *   zero
 */
struct RateProfile
{
  enum class Kind
  {
    CaseA,
    Constant,
    Zero,
  };

  Kind kind   = Kind::CaseA;
  Vec3 coeffs = Vec3::Zero();

  static RateProfile case_a() { return {}; }
  static RateProfile constant(const Vec3& w) { return {Kind::Constant, w}; }
  static RateProfile zero() { return {Kind::Zero, Vec3::Zero()}; }

  static RateProfile parse(std::string_view tag);
  std::string to_string() const;

  bool operator==(const RateProfile&) const = default;
};

/// True angular velocity (rad/s) of the profile at time t.
inline Vec3 omega_true(const RateProfile& profile, double t)
{
  switch (profile.kind) {
  case RateProfile::Kind::CaseA: return {std::cos(3.0 * t), 0.1 * std::sin(2.0 * t), -std::cos(t)};
  case RateProfile::Kind::Constant: return profile.coeffs;
  case RateProfile::Kind::Zero: return Vec3::Zero();
  }
  throw UnknownProfile("unregistered rate profile");
}

// ---------------------------------------------------------------------------
// Number formatting shared by the config and results writers
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) { s.remove_prefix(1); }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) { s.remove_suffix(1); }
  if (!s.empty() && s.front() == '+') { s.remove_prefix(1); }
  double x       = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InvalidScenario("cannot parse number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return x;
}

inline std::vector<double> parse_list(std::string_view s, std::string_view what)
{
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(parse_double(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start), what));
    if (comma == std::string_view::npos) { break; }
    start = comma + 1;
  }
  return out;
}

inline Vec3 parse_vec3(std::string_view s, std::string_view what)
{
  const auto v = parse_list(s, what);
  if (v.size() != 3) { throw InvalidScenario(std::string(what) + " needs three comma-separated values"); }
  return {v[0], v[1], v[2]};
}

inline std::string format_vec3(const Vec3& v)
{
  return format_double(v(0)) + "," + format_double(v(1)) + "," + format_double(v(2));
}

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) { return {}; }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline RateProfile RateProfile::parse(std::string_view tag)
{
  const std::string t = detail::trim(tag);
  if (t == "caseA") { return case_a(); }
  if (t == "zero") { return zero(); }
  if (t.rfind("constant:", 0) == 0) {
    try {
      return constant(detail::parse_vec3(std::string_view(t).substr(9), "profile"));
    } catch (const InvalidScenario& e) {
      throw UnknownProfile(std::string("bad constant profile: ") + e.what());
    }
  }
  throw UnknownProfile("unknown rate profile '" + t + "'");
}

inline std::string RateProfile::to_string() const
{
  switch (kind) {
  case Kind::CaseA: return "caseA";
  case Kind::Zero: return "zero";
  case Kind::Constant: return "constant:" + detail::format_vec3(coeffs);
  }
  return "caseA";
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/**
 * @brief Everything needed to regenerate a simulated run.
 *
 * Noise is injected i.i.d. per sample with exactly sigma_process (rad/s,
 * per gyro axis) and sigma_meas (per component of each measured direction).
 * The initial attitude is stored as yaw-pitch-roll so that config files
 * round-trip exactly.
 */
struct Scenario
{
  double duration      = 30.0;
  double dt            = 0.01;
  std::vector<Direction> r_list{Direction(Vec3::UnitX()), Direction(Vec3::UnitZ())};
  double sigma_process = 0.0;
  double sigma_meas    = 0.0;
  Vec3 euler0          = Vec3::Zero();  ///< yaw, pitch, roll (rad)
  RateProfile profile;
  std::uint64_t seed = 1;

  RotationMatrix initial_attitude() const { return euler_to_rotation(euler0(0), euler0(1), euler0(2)); }

  /// Number of sample frames, t_k = k dt for k = 0 .. n-1.
  std::size_t frame_count() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

  void validate() const
  {
    if (!(duration > 0.0) || !std::isfinite(duration)) { throw InvalidScenario("duration must be > 0"); }
    if (!(dt > 0.0) || dt > duration) { throw InvalidScenario("dt must satisfy 0 < dt <= duration"); }
    if (r_list.empty()) { throw InvalidScenario("at least one reference direction is required"); }
    if (!(sigma_process >= 0.0) || !(sigma_meas >= 0.0)) { throw InvalidScenario("noise sigmas must be >= 0"); }
    if (!euler0.allFinite()) { throw InvalidScenario("euler0 must be finite"); }
    for (std::size_t i = 0; i < r_list.size(); ++i) {
      for (std::size_t j = i + 1; j < r_list.size(); ++j) {
        if (r_list[i].vector().cross(r_list[j].vector()).norm() <= 1e-6) {
          throw InvalidScenario("reference directions must be pairwise non-collinear");
        }
      }
    }
  }

  bool operator==(const Scenario&) const = default;
};

/// One sample of the simulated sensors together with the truth.
struct SampleFrame
{
  double t = 0.0;
  Vec3 omega_meas;
  std::vector<Vec3> y_list;
  RotationMatrix R_true;
};

inline const double kCaseSigma = std::sqrt(std::numbers::pi / 12.0);

/// "caseA" or "caseB"; throws UnknownScenario otherwise.
inline Scenario builtin_scenario(std::string_view name)
{
  Scenario s;
  s.duration = 30.0;
  s.dt       = 0.01;
  s.euler0   = Vec3(std::numbers::pi, -std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  s.profile  = RateProfile::case_a();
  if (name == "caseA") {
    s.sigma_process = kCaseSigma;
    s.sigma_meas    = kCaseSigma;
  } else if (name == "caseB") {
    s.sigma_process = 2.0 * kCaseSigma;
    s.sigma_meas    = 0.5 * kCaseSigma;
  } else {
    throw UnknownScenario("unknown scenario '" + std::string(name) + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Truth and measurement synthesis
// ---------------------------------------------------------------------------

/**
 * Integrates dR/dt = R w^x with a midpoint-evaluated exponential step:
 * R_{k+1} = R_k exp(dt w(t_k + dt/2)). Returns frame_count() attitudes.
 */
inline std::vector<RotationMatrix> propagate_truth(const Scenario& scenario)
{
  scenario.validate();
  const std::size_t n = scenario.frame_count();
  std::vector<RotationMatrix> out;
  out.reserve(n);
  RotationMatrix r = scenario.initial_attitude();
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(r);
    const double t_mid = (static_cast<double>(k) + 0.5) * scenario.dt;
    r = project_to_so3((r * exp_so3(Vec3(scenario.dt * omega_true(scenario.profile, t_mid)))).matrix());
  }
  return out;
}

/**
 * @brief Gaussian noise stream for one run.
 *
 * Engine: std::mt19937_64 seeded with the run seed; samples drawn with
 * std::normal_distribution<double>. Draw order per frame is the three gyro
 * axes followed by the three components of each direction in order.
 */
class NoiseSource
{
public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  double standard_normal() { return normal_(engine_); }
  Vec3 standard_normal3()
  {
    const double a = standard_normal();
    const double b = standard_normal();
    const double c = standard_normal();
    return {a, b, c};
  }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Noisy gyro and direction samples; y_i = R^T r_i + sigma_meas n (not renormalized).
inline std::vector<SampleFrame> synthesize_measurements(const std::vector<RotationMatrix>& truth,
                                                        const Scenario& scenario)
{
  NoiseSource noise(scenario.seed);
  std::vector<SampleFrame> frames;
  frames.reserve(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    SampleFrame f;
    f.t          = static_cast<double>(k) * scenario.dt;
    f.R_true     = truth[k];
    f.omega_meas = omega_true(scenario.profile, f.t) + scenario.sigma_process * noise.standard_normal3();
    f.y_list.reserve(scenario.r_list.size());
    for (const auto& r : scenario.r_list) {
      f.y_list.push_back(truth[k].matrix().transpose() * r.vector() + scenario.sigma_meas * noise.standard_normal3());
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

inline std::vector<SampleFrame> simulate(const Scenario& scenario)
{
  return synthesize_measurements(propagate_truth(scenario), scenario);
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

/// key = value text; r1, r2, ... are reference directions, vectors comma-separated.
inline std::string serialize_scenario(const Scenario& s)
{
  using detail::format_double;
  std::ostringstream os;
  os << "duration = " << format_double(s.duration) << '\n';
  os << "dt = " << format_double(s.dt) << '\n';
  os << "sigma_process = " << format_double(s.sigma_process) << '\n';
  os << "sigma_meas = " << format_double(s.sigma_meas) << '\n';
  for (std::size_t i = 0; i < s.r_list.size(); ++i) {
    os << 'r' << (i + 1) << " = " << detail::format_vec3(s.r_list[i].vector()) << '\n';
  }
  os << "euler0 = " << detail::format_vec3(s.euler0) << '\n';
  os << "profile = " << s.profile.to_string() << '\n';
  os << "seed = " << s.seed << '\n';
  return os.str();
}

/**
 * Parses a scenario config. Missing keys keep the caseA defaults; unknown
 * keys are rejected. Reference directions are normalized on load.
 */
inline Scenario parse_scenario(std::string_view text)
{
  Scenario s = builtin_scenario("caseA");
  std::map<int, Direction> refs;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) { line.erase(hash); }
    const std::string body = detail::trim(line);
    if (body.empty()) { continue; }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InvalidScenario("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key   = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));

    if (key == "duration") {
      s.duration = detail::parse_double(value, key);
    } else if (key == "dt") {
      s.dt = detail::parse_double(value, key);
    } else if (key == "sigma_process") {
      s.sigma_process = detail::parse_double(value, key);
    } else if (key == "sigma_meas") {
      s.sigma_meas = detail::parse_double(value, key);
    } else if (key == "euler0") {
      s.euler0 = detail::parse_vec3(value, key);
    } else if (key == "profile") {
      s.profile = RateProfile::parse(value);
    } else if (key == "seed") {
      std::uint64_t seed = 0;
      const auto res     = std::from_chars(value.data(), value.data() + value.size(), seed);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw InvalidScenario("seed must be a non-negative integer");
      }
      s.seed = seed;
    } else if (key.size() > 1 && key[0] == 'r' && key.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int idx = std::stoi(key.substr(1));
      if (idx < 1) { throw InvalidScenario("reference keys start at r1"); }
      const Vec3 v = detail::parse_vec3(value, key);
      refs.insert_or_assign(idx, std::abs(v.norm() - 1.0) <= Direction::kTolerance ? Direction(v)
                                                                                   : Direction::normalized(v));
    } else {
      throw InvalidScenario("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!refs.empty()) {
    s.r_list.clear();
    int expected = 1;
    for (const auto& [idx, dir] : refs) {
      if (idx != expected++) { throw InvalidScenario("reference directions must be numbered r1, r2, ... without gaps"); }
      s.r_list.push_back(dir);
    }
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open scenario file '" + path + "'"); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

inline void save_scenario(const Scenario& s, const std::string& path)
{
  std::ofstream out(path);
  if (!out) { throw IoError("cannot write scenario file '" + path + "'"); }
  out << serialize_scenario(s);
  if (!out) { throw IoError("write failed for '" + path + "'"); }
}

}  // namespace hinf
