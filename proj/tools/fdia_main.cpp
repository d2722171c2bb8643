// Command-line front end: runs the bundled cases or a scenario file, sweeps
// detector/scheduler parameters, and exposes the internal consistency checks.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fdia/fdia.hpp"

namespace {

struct CommonOpts {
  std::string out = "out";
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> horizon;
  std::optional<double> beta;
  std::optional<std::string> mode;
  std::optional<double> upsilon_inv;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Worker threads for Monte Carlo runs")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed override");
  cmd->add_option("--seeds,--runs", o.runs, "Monte Carlo repetition override");
  cmd->add_option("--horizon", o.horizon, "Horizon override (steps)");
  cmd->add_option("--beta", o.beta, "Scheduler history weight in [0, 1]");
  cmd->add_option("--mode", o.mode, "Scheduler policy to report: sampled, sorted or both");
  cmd->add_option("--upsilon-inv", o.upsilon_inv, "Detector sensitivity for every sensor (> 0)");
}

void apply_overrides(fdia::Scenario& sc, const CommonOpts& o) {
  if (o.seed) sc.run.master_seed = *o.seed;
  if (o.runs) sc.run.runs = *o.runs;
  if (o.horizon) sc.run.horizon = *o.horizon;
  if (o.beta) sc.scheduler.beta = *o.beta;
  if (o.mode) sc.scheduler.mode = *o.mode;
  if (o.upsilon_inv)
    for (std::size_t i = 1; i < sc.upsilon_inv.size(); ++i) sc.upsilon_inv[i] = *o.upsilon_inv;
}

double tail_mean(const std::vector<double>& curve) {
  if (curve.empty()) return 0.0;
  const std::size_t from = curve.size() - std::max<std::size_t>(curve.size() / 4, 1);
  double acc = 0.0;
  for (std::size_t k = from; k < curve.size(); ++k) acc += curve[k];
  return acc / static_cast<double>(curve.size() - from);
}

int run_one_case(fdia::Scenario sc, const CommonOpts& o) {
  apply_overrides(sc, o);
  const fdia::CaseResult res = fdia::run_case(sc, o.jobs);
  const auto files = fdia::write_outputs(res, o.out);

  std::cout << "scenario " << sc.name << ": " << res.runs.size() << " runs, horizon " << sc.run.horizon
            << ", " << sc.topology.sensor_count << " sensors, master seed " << sc.run.master_seed
            << "\n";
  auto report = [&](const char* label, fdia::SelectionMode mode) {
    const fdia::ModeAggregate a = fdia::aggregate_mode(res, mode);
    std::cout << "  " << label << ": optimization rate " << fdia::format_number(a.mean_optimization_rate)
              << ", fn " << (a.fn ? fdia::format_number(*a.fn) : std::string("na")) << ", fp "
              << (a.fp ? fdia::format_number(*a.fp) : std::string("na")) << ", bound violations "
              << a.bound_violations << ", worst regret margin " << fdia::format_number(a.worst_margin)
              << "\n";
  };
  if (sc.scheduler.mode == "sampled" || sc.scheduler.mode == "both")
    report("sampled", fdia::SelectionMode::kSampled);
  if (sc.scheduler.mode == "sorted" || sc.scheduler.mode == "both")
    report("sorted", fdia::SelectionMode::kSorted);
  std::cout << "  rmse tail (last quarter):";
  for (int p = 0; p < fdia::kPipelineCount; ++p)
    std::cout << ' ' << fdia::pipeline_name(p) << '=' << fdia::format_number(tail_mean(res.rmse[p]));
  std::cout << "\n";
  for (const auto& f : files) std::cout << "wrote " << o.out << '/' << f << "\n";
  return 0;
}

int run_sweep_cmd(fdia::Scenario sc, const CommonOpts& o, const std::vector<double>& betas,
                  const std::vector<double>& upsilons) {
  apply_overrides(sc, o);
  const auto cells = fdia::run_sweep(sc, betas, upsilons, o.jobs);
  std::filesystem::create_directories(o.out);
  const std::string path = o.out + "/fnfp.csv";
  fdia::write_sweep_csv(cells, path);
  std::cout << "scenario " << sc.name << ": swept " << cells.size() << " cells ("
            << betas.size() << " beta x " << upsilons.size() << " upsilon_inv), " << sc.run.runs
            << " runs each\n";
  for (const auto& c : cells) {
    std::cout << "  beta=" << fdia::format_number(c.beta)
              << " upsilon_inv=" << fdia::format_number(c.upsilon_inv) << " fn="
              << (c.fn ? fdia::format_number(*c.fn) : std::string("na")) << " fp="
              << (c.fp ? fdia::format_number(*c.fp) : std::string("na")) << " opt_rate="
              << fdia::format_number(c.mean_optimization_rate) << " rmse_tail="
              << fdia::format_number(c.rmse_tail) << "\n";
  }
  std::cout << "wrote " << path << "\n";
  return 0;
}

// Self-contained validity checks for the quantities the simulator relies on.
int run_oracle_check(std::uint64_t seed, int horizon, int trials) {
  bool all_ok = true;
  auto line = [&](bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << ": " << detail << "\n";
    all_ok = all_ok && ok;
  };

  {
    fdia::Scenario sc = fdia::presets::case1();
    sc.run.master_seed = seed;
    const fdia::RecursionCheck rc = fdia::check_error_recursion(sc, 0, horizon);
    line(rc.max_network_vs_delta <= 1e-10, "error recursion vs network pair",
         "max deviation " + fdia::format_number(rc.max_network_vs_delta) + " over " +
             std::to_string(horizon) + " steps");
    line(rc.max_delta_vs_stacked <= 1e-10, "stacked form vs per-sensor recursion",
         "max deviation " + fdia::format_number(rc.max_delta_vs_stacked));
    line(rc.rho_all_ones < 1.0, "all-accept error map is stable",
         "spectral radius " + fdia::format_number(rc.rho_all_ones));
  }

  {
    fdia::RngStream rng(seed, 0, fdia::Stream::kScheduler, 99);
    bool ok = true;
    for (int n : {3, 6, 10}) {
      fdia::ErrorSummary s;
      s.sensor = 1;
      for (int t = 0; t < n; ++t) {
        s.neighbors.push_back(t + 2);
        s.entries.push_back(rng.uniform(0.0, 10.0));
      }
      ok = ok && fdia::check_submodularity(s, trials, rng);
    }
    line(ok, "objective is monotone with diminishing returns",
         std::to_string(trials) + " nested set pairs per neighborhood size");
  }

  {
    fdia::ErrorSummary s;
    s.sensor = 5;
    s.neighbors = {3, 7, 10, 13, 23, 26};
    s.entries = {0.1, 4.0, 3.0, 0.2, 5.0, 0.3};
    const int q = 3;
    const int expected = q * 6 - q * (q - 1) / 2;
    fdia::RngStream rng(seed, 1, fdia::Stream::kScheduler, 99);
    bool ok = true;
    for (fdia::SelectionMode mode : {fdia::SelectionMode::kSorted, fdia::SelectionMode::kSampled}) {
      fdia::ExpertState expert = fdia::ExpertState::make(0.5, s.neighbors);
      const fdia::SelectionResult res = fdia::select_suspicious(s, expert, q, mode, rng);
      ok = ok && res.evaluations == expected && res.evaluations <= q * 6;
    }
    line(ok, "selection spends q*|N| - q(q-1)/2 objective evaluations",
         std::to_string(expected) + " of at most " + std::to_string(q * 6));
  }

  {
    fdia::RngStream rng(seed, 2, fdia::Stream::kScheduler, 99);
    bool ok = true;
    for (int trial = 0; trial < trials; ++trial) {
      fdia::ErrorSummary s;
      s.sensor = 1;
      const int n = 4 + static_cast<int>(rng.uniform01() * 8);
      for (int t = 0; t < n; ++t) {
        s.neighbors.push_back(t + 2);
        s.entries.push_back(rng.uniform(0.0, 5.0));
      }
      const int q = 1 + static_cast<int>(rng.uniform01() * (n / 2));
      const fdia::SuspiciousSet best = fdia::oracle_optimal(s, std::min(q, n / 2));
      std::vector<int> order(n);
      for (int t = 0; t < n; ++t) order[t] = t;
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return s.entries[a] > s.entries[b]; });
      std::vector<int> topq;
      for (int t = 0; t < std::min(q, n / 2); ++t) topq.push_back(s.neighbors[order[t]]);
      std::sort(topq.begin(), topq.end());
      ok = ok && fdia::objective(s, best.members) == fdia::objective(s, topq);
    }
    line(ok, "exhaustive optimum equals the top-q rule", std::to_string(trials) + " random summaries");
  }

  {
    const fdia::DetectorConfig cfg{0.5};
    const double residual = 2.0;
    const double expected = fdia::flag_probability(cfg, residual);
    fdia::RngStream rng(seed, 3, fdia::Stream::kDetector, 99);
    const int draws = 100000;
    int flags = 0;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1), b = Eigen::VectorXd::Constant(1, residual);
    for (int t = 0; t < draws; ++t)
      if (fdia::detect(cfg, a, b, rng) == 0) ++flags;
    const double freq = static_cast<double>(flags) / draws;
    const double sigma = std::sqrt(expected * (1.0 - expected) / draws);
    line(std::abs(freq - expected) <= 4.0 * sigma, "detector flag frequency matches its closed form",
         "observed " + fdia::format_number(freq) + " vs " + fdia::format_number(expected));
  }

  std::cout << (all_ok ? "oracle-check passed" : "oracle-check FAILED") << "\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False-data-injection attack scheduling simulator for distributed state estimation"};
  app.require_subcommand(1);

  std::string scenario_arg;
  CommonOpts run_opts, case1_opts, case2_opts, sweep_opts;
  std::string case1_family = "unstealthy";
  std::string case2_family = "unstealthy";
  std::string sweep_scenario = "cstr-case1";
  std::vector<double> beta_grid{0.0, 0.5, 1.0};
  std::vector<double> upsilon_grid{0.25, 0.5, 1.0, 2.0};
  std::uint64_t check_seed = 1;
  int check_horizon = 100;
  int check_trials = 200;

  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario file or preset name");
  run_cmd
      ->add_option("scenario", scenario_arg,
                   "Scenario JSON path or preset (cstr-case1[-stealthy], cstr-case2[-stealthy])")
      ->required();
  add_common(run_cmd, run_opts);

  CLI::App* case1_cmd = app.add_subcommand("case1", "Run the bundled single-target case");
  case1_cmd->add_option("--family", case1_family, "Injection family: unstealthy or stealthy")
      ->capture_default_str();
  add_common(case1_cmd, case1_opts);

  CLI::App* case2_cmd = app.add_subcommand("case2", "Run the bundled multi-target case");
  case2_cmd->add_option("--family", case2_family, "Injection family: unstealthy or stealthy")
      ->capture_default_str();
  add_common(case2_cmd, case2_opts);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep beta x upsilon_inv and tabulate fn/fp");
  sweep_cmd->add_option("scenario", sweep_scenario, "Scenario JSON path or preset")->capture_default_str();
  sweep_cmd->add_option("--beta-grid", beta_grid, "Beta values")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--upsilon-grid", upsilon_grid, "upsilon_inv values")
      ->delimiter(',')
      ->capture_default_str();
  add_common(sweep_cmd, sweep_opts);

  CLI::App* check_cmd = app.add_subcommand("oracle-check", "Validate the simulator's internal invariants");
  check_cmd->add_option("--seed", check_seed, "Seed for the checks")->capture_default_str();
  check_cmd->add_option("--horizon", check_horizon, "Steps for the recursion check")->capture_default_str();
  check_cmd->add_option("--trials", check_trials, "Random trials per property")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_one_case(fdia::load_scenario(scenario_arg), run_opts);
    if (case1_cmd->parsed()) return run_one_case(fdia::presets::case1(case1_family), case1_opts);
    if (case2_cmd->parsed()) return run_one_case(fdia::presets::case2(case2_family), case2_opts);
    if (sweep_cmd->parsed())
      return run_sweep_cmd(fdia::load_scenario(sweep_scenario), sweep_opts, beta_grid, upsilon_grid);
    if (check_cmd->parsed()) return run_oracle_check(check_seed, check_horizon, check_trials);
  } catch (const fdia::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
