#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "filters.hpp"
#include "sim.hpp"
#include "so3.hpp"

#ifndef HINF_VERSION
#define HINF_VERSION "0.1.0"
#endif

namespace hinf {

enum class FilterKind
{
  HInf,
  Mekf,
  Game,
  Triad,
};

inline std::string_view filter_name(FilterKind k)
{
  switch (k) {
  case FilterKind::HInf: return "hinf";
  case FilterKind::Mekf: return "mekf";
  case FilterKind::Game: return "game";
  case FilterKind::Triad: return "triad";
  }
  return "?";
}

inline std::optional<FilterKind> parse_filter_name(std::string_view s)
{
  for (auto k : {FilterKind::HInf, FilterKind::Mekf, FilterKind::Game, FilterKind::Triad}) {
    if (filter_name(k) == s) { return k; }
  }
  return std::nullopt;
}

/// Comma-separated filter names; throws InvalidParams on unknown or repeated names.
inline std::vector<FilterKind> parse_filter_list(std::string_view list)
{
  std::vector<FilterKind> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma      = list.find(',', start);
    const std::string tok = detail::trim(list.substr(start, comma == list.npos ? list.npos : comma - start));
    const auto k          = parse_filter_name(tok);
    if (!k) { throw InvalidParams("unknown filter '" + tok + "' (expected hinf, mekf, game, triad)"); }
    if (std::find(out.begin(), out.end(), *k) != out.end()) { throw InvalidParams("filter '" + tok + "' listed twice"); }
    out.push_back(*k);
    if (comma == list.npos) { break; }
    start = comma + 1;
  }
  return out;
}

struct BenchmarkOptions
{
  std::vector<FilterKind> filters{FilterKind::HInf, FilterKind::Mekf, FilterKind::Game, FilterKind::Triad};
  int n_runs            = 50;
  double gamma          = 0.9;
  StepOptions step;
  Mat3 p0               = 0.5 * Mat3::Identity();
  RotationMatrix initial_estimate;
  /// Filter tuning; defaults to the scenario noise levels.
  std::optional<double> g;
  std::optional<double> k;
  double transient_end = 10.0;
  bool record_gain     = false;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct RunRecord
{
  int run_id = 0;
  FilterKind filter = FilterKind::HInf;
  double t          = 0.0;
  double error_deg  = 0.0;
  std::optional<Vec3> p_diag;

  bool operator==(const RunRecord&) const = default;
};

struct SummaryRow
{
  FilterKind filter = FilterKind::HInf;
  double transient_rms_deg = 0.0;
  double steady_rms_deg    = 0.0;
  int n_runs               = 0;
};

struct Divergence
{
  int run_id = 0;
  FilterKind filter = FilterKind::HInf;
  double t          = 0.0;
  std::string reason;
};

struct BenchmarkResult
{
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summaries;
  std::vector<Divergence> divergences;

  const SummaryRow* summary(FilterKind k) const
  {
    for (const auto& s : summaries) {
      if (s.filter == k) { return &s; }
    }
    return nullptr;
  }
};

inline FilterParams filter_params_for(const Scenario& scenario, const BenchmarkOptions& opts)
{
  FilterParams p;
  p.g      = opts.g.value_or(scenario.sigma_process);
  p.k_list = std::vector<double>(scenario.r_list.size(), opts.k.value_or(scenario.sigma_meas));
  p.gamma  = opts.gamma;
  p.r_list = scenario.r_list;
  return p;
}

inline std::unique_ptr<AttitudeFilter> make_filter(FilterKind kind, const Scenario& scenario,
                                                   const BenchmarkOptions& opts)
{
  FilterParams params = filter_params_for(scenario, opts);
  const GainMatrix p0(opts.p0);
  switch (kind) {
  case FilterKind::HInf:
    return std::make_unique<HInfFilter>(params, GroupFilterState{opts.initial_estimate, p0, 0.0}, opts.step);
  case FilterKind::Game:
    return std::make_unique<GameFilter>(params, GroupFilterState{opts.initial_estimate, p0, 0.0}, opts.step);
  case FilterKind::Mekf:
    params.gamma = kInfiniteGamma;
    return std::make_unique<MekfFilter>(
        params, QuaternionFilterState{UnitQuaternion::from_rotation(opts.initial_estimate), p0, 0.0}, opts.step);
  case FilterKind::Triad: return std::make_unique<TriadFilter>(scenario.r_list);
  }
  throw InvalidParams("unknown filter kind");
}

inline double rad_to_deg(double x) { return x * 180.0 / std::numbers::pi; }

namespace detail {

struct RunOutput
{
  std::vector<RunRecord> records;
  std::vector<Divergence> divergences;
};

inline RunOutput run_one(const Scenario& base, const BenchmarkOptions& opts, int run_id)
{
  Scenario sc = base;
  sc.seed     = base.seed + static_cast<std::uint64_t>(run_id);
  const std::vector<SampleFrame> frames = simulate(sc);

  RunOutput out;
  out.records.reserve(frames.size() * opts.filters.size());
  for (FilterKind kind : opts.filters) {
    auto filter = make_filter(kind, sc, opts);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const SampleFrame& f = frames[k];
      RunRecord rec{run_id, kind, f.t, rad_to_deg(geodesic_angle(f.R_true, filter->estimate(f.omega_meas, f.y_list))),
                    std::nullopt};
      if (opts.record_gain) {
        if (const auto p = filter->gain()) { rec.p_diag = p->diagonal(); }
      }
      out.records.push_back(std::move(rec));
      if (k + 1 == frames.size()) { break; }
      try {
        filter->advance(f.omega_meas, f.y_list, sc.dt);
      } catch (const FilterDiverged& e) {
        out.divergences.push_back({run_id, kind, f.t + sc.dt, e.reason()});
        break;
      }
    }
  }
  return out;
}

inline std::int64_t step_index(double t, double dt) { return std::llround(t / dt); }

}  // namespace detail

/**
 * @brief RMS error per filter, split at transient_end.
 *
 * Squared errors are pooled over runs and time inside each window before
 * taking the root. (run, filter) pairs listed in @p diverged are left out.
 */
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, const std::vector<FilterKind>& filters,
                                         double dt, double transient_end, const std::vector<Divergence>& diverged = {})
{
  const auto excluded = [&](const RunRecord& r) {
    return std::any_of(diverged.begin(), diverged.end(),
                       [&](const Divergence& d) { return d.run_id == r.run_id && d.filter == r.filter; });
  };
  const std::int64_t split = detail::step_index(transient_end, dt);

  std::vector<SummaryRow> rows;
  for (FilterKind kind : filters) {
    double sum_t = 0.0, sum_s = 0.0;
    std::size_t n_t = 0, n_s = 0;
    std::vector<int> runs;
    for (const auto& r : records) {
      if (r.filter != kind || excluded(r)) { continue; }
      if (runs.empty() || runs.back() != r.run_id) { runs.push_back(r.run_id); }
      const double e2 = r.error_deg * r.error_deg;
      if (detail::step_index(r.t, dt) < split) {
        sum_t += e2;
        ++n_t;
      } else {
        sum_s += e2;
        ++n_s;
      }
    }
    std::sort(runs.begin(), runs.end());
    runs.erase(std::unique(runs.begin(), runs.end()), runs.end());
    rows.push_back({kind, n_t ? std::sqrt(sum_t / static_cast<double>(n_t)) : 0.0,
                    n_s ? std::sqrt(sum_s / static_cast<double>(n_s)) : 0.0, static_cast<int>(runs.size())});
  }
  return rows;
}

/**
 * @brief Monte-Carlo benchmark.
 *
 * Run r uses seed scenario.seed + r and a fresh truth/noise realization
 * shared by every filter in the set. Runs may execute on several threads;
 * results are stored per run and concatenated in run order, so the output
 * does not depend on the thread count. Diverged (run, filter) pairs are
 * reported in BenchmarkResult::divergences and excluded from the summary.
 */
inline BenchmarkResult run_benchmark(const Scenario& scenario, const BenchmarkOptions& opts)
{
  scenario.validate();
  if (opts.n_runs < 1) { throw InvalidParams("n_runs must be >= 1"); }
  if (opts.filters.empty()) { throw InvalidParams("at least one filter is required"); }
  filter_params_for(scenario, opts).validate();

  std::vector<detail::RunOutput> outputs(static_cast<std::size_t>(opts.n_runs));
  unsigned n_threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads          = std::min<unsigned>(n_threads, static_cast<unsigned>(opts.n_runs));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (int r = next++; r < opts.n_runs; r = next++) {
      try {
        outputs[static_cast<std::size_t>(r)] = detail::run_one(scenario, opts, r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) { failure = std::current_exception(); }
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_threads; ++i) { pool.emplace_back(worker); }
  }
  if (failure) { std::rethrow_exception(failure); }

  BenchmarkResult result;
  std::size_t total = 0;
  for (const auto& o : outputs) { total += o.records.size(); }
  result.records.reserve(total);
  for (auto& o : outputs) {
    std::move(o.records.begin(), o.records.end(), std::back_inserter(result.records));
    std::move(o.divergences.begin(), o.divergences.end(), std::back_inserter(result.divergences));
  }
  result.summaries = summarize(result.records, opts.filters, scenario.dt, opts.transient_end, result.divergences);
  return result;
}

/// Mean absolute error across runs at each grid time, per filter.
struct ErrorCurvePoint
{
  FilterKind filter;
  double t;
  double mean_abs_error_deg;
};

inline std::vector<ErrorCurvePoint> mean_error_curve(const BenchmarkResult& result, const std::vector<FilterKind>& filters,
                                                     double dt)
{
  std::vector<ErrorCurvePoint> out;
  for (FilterKind kind : filters) {
    std::vector<double> sum;
    std::vector<int> count;
    for (const auto& r : result.records) {
      if (r.filter != kind) { continue; }
      const bool diverged = std::any_of(result.divergences.begin(), result.divergences.end(), [&](const Divergence& d) {
        return d.run_id == r.run_id && d.filter == kind;
      });
      if (diverged) { continue; }
      const auto k = static_cast<std::size_t>(detail::step_index(r.t, dt));
      if (k >= sum.size()) {
        sum.resize(k + 1, 0.0);
        count.resize(k + 1, 0);
      }
      sum[k] += std::abs(r.error_deg);
      ++count[k];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) {
      if (count[k] > 0) { out.push_back({kind, static_cast<double>(k) * dt, sum[k] / count[k]}); }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRecordsHeader = "run,filter,t,error_deg";

inline void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records)
{
  os << kRecordsHeader << '\n';
  for (const auto& r : records) {
    os << r.run_id << ',' << filter_name(r.filter) << ',' << detail::format_double(r.t) << ','
       << detail::format_double(r.error_deg) << '\n';
  }
}

/// Inverse of write_records_csv. Throws IoError on malformed input.
inline std::vector<RunRecord> read_records_csv(std::istream& is)
{
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kRecordsHeader) { throw IoError("records CSV: bad header"); }
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) { continue; }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) { cols.push_back(cell); }
    if (cols.size() != 4) { throw IoError("records CSV line " + std::to_string(line_no) + ": expected 4 columns"); }
    const auto kind = parse_filter_name(detail::trim(cols[1]));
    if (!kind) { throw IoError("records CSV line " + std::to_string(line_no) + ": unknown filter"); }
    try {
      out.push_back({std::stoi(cols[0]), *kind, detail::parse_double(cols[2], "t"),
                     detail::parse_double(cols[3], "error_deg"), std::nullopt});
    } catch (const std::exception& e) {
      throw IoError("records CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const BenchmarkResult& result, const Scenario& scenario,
                                           const BenchmarkOptions& opts)
{
  nlohmann::ordered_json j;
  j["version"] = HINF_VERSION;

  nlohmann::ordered_json sc;
  sc["duration"]      = scenario.duration;
  sc["dt"]            = scenario.dt;
  sc["sigma_process"] = scenario.sigma_process;
  sc["sigma_meas"]    = scenario.sigma_meas;
  sc["r_list"]        = nlohmann::ordered_json::array();
  for (const auto& r : scenario.r_list) { sc["r_list"].push_back({r.vector()(0), r.vector()(1), r.vector()(2)}); }
  sc["euler0"]  = {scenario.euler0(0), scenario.euler0(1), scenario.euler0(2)};
  sc["profile"] = scenario.profile.to_string();
  sc["seed"]    = scenario.seed;
  j["scenario"] = sc;

  j["gamma"]        = opts.gamma;
  j["n_runs"]       = opts.n_runs;
  j["p_integrator"] = opts.step.integrator == PIntegrator::Euler ? "euler" : "rk4";

  nlohmann::ordered_json filters = nlohmann::ordered_json::object();
  for (const auto& s : result.summaries) {
    filters[std::string(filter_name(s.filter))] = {
        {"transient_rms_deg", s.transient_rms_deg},
        {"steady_rms_deg", s.steady_rms_deg},
        {"n_runs", s.n_runs},
    };
  }
  j["filters"] = filters;

  j["diverged"] = nlohmann::ordered_json::array();
  for (const auto& d : result.divergences) {
    j["diverged"].push_back({{"run", d.run_id}, {"filter", filter_name(d.filter)}, {"t", d.t}, {"reason", d.reason}});
  }
  return j;
}

struct ResultPaths
{
  std::filesystem::path records;
  std::filesystem::path summary;
  std::filesystem::path curve;
};

/**
 * Writes errors.csv (run,filter,t,error_deg), summary.json and
 * mean_error.csv (filter,t,mean_abs_error_deg) into @p out_dir.
 */
inline ResultPaths emit_results(const BenchmarkResult& result, const Scenario& scenario, const BenchmarkOptions& opts,
                                const std::filesystem::path& out_dir)
{
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) { throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message()); }

  const ResultPaths paths{out_dir / "errors.csv", out_dir / "summary.json", out_dir / "mean_error.csv"};
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) { throw IoError("cannot open '" + p.string() + "' for writing"); }
    return os;
  };
  const auto finish = [](std::ofstream& os, const std::filesystem::path& p) {
    os.flush();
    if (!os) { throw IoError("write failed for '" + p.string() + "'"); }
  };

  {
    auto os = open(paths.records);
    write_records_csv(os, result.records);
    finish(os, paths.records);
  }
  {
    auto os = open(paths.summary);
    os << summary_json(result, scenario, opts).dump(2) << '\n';
    finish(os, paths.summary);
  }
  {
    auto os = open(paths.curve);
    os << "filter,t,mean_abs_error_deg\n";
    for (const auto& p : mean_error_curve(result, opts.filters, scenario.dt)) {
      os << filter_name(p.filter) << ',' << detail::format_double(p.t) << ','
         << detail::format_double(p.mean_abs_error_deg) << '\n';
    }
    finish(os, paths.curve);
  }
  return paths;
}

}  // namespace hinf
