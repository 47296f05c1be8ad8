#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harness.hpp"

namespace hinf {

inline constexpr int kExitOk       = 0;
inline constexpr int kExitUsage    = 1;
inline constexpr int kExitDiverged = 2;

inline void print_summary(std::ostream& os, const BenchmarkResult& result)
{
  os << std::left << std::setw(8) << "filter" << std::right << std::setw(14) << "transient" << std::setw(14)
     << "steady" << std::setw(8) << "runs" << '\n';
  os << std::left << std::setw(8) << "" << std::right << std::setw(14) << "RMS (deg)" << std::setw(14)
     << "RMS (deg)" << '\n';
  for (const auto& s : result.summaries) {
    os << std::left << std::setw(8) << filter_name(s.filter) << std::right << std::fixed << std::setprecision(2)
       << std::setw(14) << s.transient_rms_deg << std::setw(14) << s.steady_rms_deg << std::setw(8) << s.n_runs
       << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

/**
 * Benchmark command line. Exit codes: 0 success, 1 usage or input error,
 * 2 when any filter run diverged.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Monte-Carlo benchmark of attitude filters on SO(3)"};
  app.name("hinf_bench");

  std::string scenario_arg = "caseA";
  std::string filters_arg  = "hinf,mekf,game,triad";
  int runs                 = 50;
  double gamma             = 0.9;
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::string out_dir      = "results";
  std::string integrator   = "euler";
  unsigned threads         = 0;

  app.add_option("--scenario", scenario_arg, "caseA, caseB or a scenario config file")->capture_default_str();
  app.add_option("--filters", filters_arg, "comma list from {hinf,mekf,game,triad}")->capture_default_str();
  app.add_option("--runs", runs, "Monte-Carlo runs")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--gamma", gamma, "H-infinity energy-gain bound")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--dt", dt, "override the scenario time step (s)")->check(CLI::PositiveNumber);
  app.add_option("--duration", duration, "override the scenario duration (s)")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "base seed; run r uses seed + r");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--p-integrator", integrator, "gain integrator")
      ->capture_default_str()
      ->check(CLI::IsMember({"euler", "rk4"}));
  app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  Scenario scenario;
  BenchmarkOptions opts;
  try {
    if (scenario_arg == "caseA" || scenario_arg == "caseB") {
      scenario = builtin_scenario(scenario_arg);
    } else {
      scenario = load_scenario(scenario_arg);
    }
    if (dt) { scenario.dt = *dt; }
    if (duration) { scenario.duration = *duration; }
    if (seed) { scenario.seed = *seed; }
    scenario.validate();

    opts.filters         = parse_filter_list(filters_arg);
    opts.n_runs          = runs;
    opts.gamma           = gamma;
    opts.threads         = threads;
    opts.step.integrator = integrator == "rk4" ? PIntegrator::Rk4 : PIntegrator::Euler;
    filter_params_for(scenario, opts).validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const auto start         = std::chrono::steady_clock::now();
    const BenchmarkResult res = run_benchmark(scenario, opts);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const ResultPaths paths = emit_results(res, scenario, opts, out_dir);

    print_summary(out, res);
    out << "runs: " << opts.n_runs << "  gamma: " << opts.gamma << "  elapsed: " << std::fixed
        << std::setprecision(2) << seconds << " s\n";
    out.unsetf(std::ios::floatfield);
    out << "wrote " << paths.records.string() << ", " << paths.summary.string() << ", " << paths.curve.string()
        << '\n';

    if (!res.divergences.empty()) {
      err << res.divergences.size() << " diverged run(s):\n";
      for (const auto& d : res.divergences) {
        err << "  run " << d.run_id << " filter " << filter_name(d.filter) << " t=" << d.t << ": " << d.reason
            << '\n';
      }
      return kExitDiverged;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace hinf
