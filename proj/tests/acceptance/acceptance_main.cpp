// Acceptance gate: one line per criterion, exit 0 only if every hard
// criterion holds. Each check pins its tolerance explicitly; soft criteria
// are reported but never gate the result.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fdia/presets.hpp"
#include "fdia/simulation.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Gate {
  int id = 0;
  bool pass = false;
  std::string label;
  std::string detail;
  double seconds = 0.0;
};

void print_gate(const Gate& g) {
  std::printf("criterion %2d [%s] %s (%s) [%.2fs]\n", g.id, g.pass ? "PASS" : "FAIL", g.label.c_str(),
              g.detail.c_str(), g.seconds);
  std::fflush(stdout);
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

fdia::ErrorSummary walkthrough_summary() {
  fdia::ErrorSummary s;
  s.sensor = 1;
  s.step = 1;
  s.neighbors = {1, 2, 3, 4};
  s.entries = {1.0, 2.0, 3.0, 4.0};
  return s;
}

std::string slurp(const std::string& path, bool* ok) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    *ok = false;
    return {};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::vector<Gate> gates;
  const Clock::time_point wall_start = Clock::now();

  // 1. Selection walkthrough on the four-entry neighborhood.
  {
    Gate g{1, false, "objective walkthrough on entries {1,2,3,4}", "", 0.0};
    const auto t0 = Clock::now();
    const fdia::ErrorSummary s = walkthrough_summary();
    const double f4 = fdia::objective(s, {4});
    const double f34 = fdia::objective(s, {3, 4});
    const double g1 = fdia::marginal_gain(s, {4}, 2);
    const double g2 = fdia::marginal_gain(s, {3, 4}, 2);
    const bool values_exact = std::abs(f4 - 4.0) <= 1e-12 && std::abs(f34 - 5.0) <= 1e-12 &&
                              std::abs(g1 - (std::sqrt(20.0) - 4.0)) <= 1e-12 &&
                              std::abs(g2 - (std::sqrt(29.0) - 5.0)) <= 1e-12;
    const bool two_decimals = std::floor(g1 * 100.0) / 100.0 == 0.47 &&
                              std::floor(g2 * 100.0) / 100.0 == 0.38;
    const bool band_g1 = std::abs(g1 - 0.47) <= 0.005;
    const bool diminishing = g1 >= g2;
    g.seconds = seconds_since(t0);
    g.pass = values_exact && two_decimals && band_g1 && diminishing && g.seconds < 1.0;
    g.detail = fmt("f({4})=%.0f f({3,4})=%.0f gains %.6f >= %.6f", f4, f34, g1, g2);
    print_gate(g);
    std::printf("    [note] |%.6f - 0.38| = %.6f exceeds the 0.005 band: the 2-decimal reference\n"
                "    value truncates sqrt(29)-5, so the gain is pinned to its closed form at 1e-12\n"
                "    and to the truncated decimals instead; the 0.005 band is applied to 0.47 only.\n",
                g2, std::abs(g2 - 0.38));
    gates.push_back(g);
  }

  // 2. Memoryless argmax selection equals exhaustive search.
  {
    Gate g{2, false, "argmax selection matches exhaustive search on 1000 instances", "", 0.0};
    const auto t0 = Clock::now();
    fdia::RngStream rng(101, 0, fdia::Stream::kScheduler);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 4 + static_cast<int>(rng.uniform(0.0, 9.0));
      fdia::ErrorSummary s;
      s.sensor = 1;
      s.step = trial + 1;
      for (int t = 0; t < n; ++t) {
        s.neighbors.push_back(t + 1);
        s.entries.push_back(rng.uniform(0.0, 5.0));
      }
      const int q = 1 + static_cast<int>(rng.uniform(0.0, static_cast<double>(n / 2)));
      auto expert = fdia::ExpertState::make(0.0, s.neighbors);
      const auto picked = fdia::select_suspicious(s, expert, q, fdia::SelectionMode::kSorted, rng);
      if (picked.set.members != fdia::oracle_optimal(s, q).members) ++mismatches;
    }
    g.seconds = seconds_since(t0);
    g.pass = mismatches == 0 && g.seconds < 10.0;
    g.detail = fmt("%0.f mismatches across 1000 instances", static_cast<double>(mismatches));
    print_gate(g);
    gates.push_back(g);
  }

  // 3. Monotonicity and diminishing returns on random nested triples.
  {
    Gate g{3, false, "submodularity audit over 10000 random triples", "", 0.0};
    const auto t0 = Clock::now();
    fdia::RngStream rng(102, 0, fdia::Stream::kScheduler);
    bool all_ok = true;
    for (int block = 0; block < 10 && all_ok; ++block) {
      fdia::ErrorSummary s;
      s.sensor = block + 1;
      const int n = 12;
      for (int t = 0; t < n; ++t) {
        s.neighbors.push_back(t + 1);
        s.entries.push_back(rng.uniform(0.0, 4.0));
      }
      all_ok = fdia::check_submodularity(s, 1000, rng);
    }
    g.seconds = seconds_since(t0);
    g.pass = all_ok;
    g.detail = all_ok ? std::string("no violation beyond the 1e-12 slack")
                      : std::string("violation found");
    print_gate(g);
    gates.push_back(g);
  }

  // 4 + 5. Single-target case, both injection families, 20 seeds.
  fdia::CaseResult res_u, res_s;
  {
    Gate g{4, false, "single-target optimization-rate floor and ordering", "", 0.0};
    const auto t0 = Clock::now();
    res_u = fdia::run_case(fdia::presets::case1(), 1);
    res_s = fdia::run_case(fdia::presets::case1("stealthy"), 1);
    const double u_sa = fdia::aggregate_mode(res_u, fdia::SelectionMode::kSampled).mean_optimization_rate;
    const double u_so = fdia::aggregate_mode(res_u, fdia::SelectionMode::kSorted).mean_optimization_rate;
    const double s_sa = fdia::aggregate_mode(res_s, fdia::SelectionMode::kSampled).mean_optimization_rate;
    const double s_so = fdia::aggregate_mode(res_s, fdia::SelectionMode::kSorted).mean_optimization_rate;
    g.seconds = seconds_since(t0);
    const double floor_val = 0.6321;
    g.pass = u_sa >= floor_val && u_so >= floor_val && s_sa >= floor_val && s_so >= floor_val &&
             u_so > u_sa && s_so > s_sa && u_sa >= s_sa && u_so >= s_so && g.seconds < 120.0;
    g.detail = fmt("unstealthy sampled/sorted %.5f/%.5f, stealthy %.5f/%.5f, floor 0.6321", u_sa, u_so,
                   s_sa, s_so);
    print_gate(g);
    gates.push_back(g);
  }
  {
    Gate g{5, false, "regret never exceeds its bound on any single-target run", "", 0.0};
    const auto t0 = Clock::now();
    int violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const fdia::CaseResult* res : {&res_u, &res_s}) {
      for (auto mode : {fdia::SelectionMode::kSampled, fdia::SelectionMode::kSorted}) {
        const auto agg = fdia::aggregate_mode(*res, mode);
        violations += agg.bound_violations;
        worst = std::max(worst, agg.worst_margin);
      }
    }
    g.seconds = seconds_since(t0);
    g.pass = violations == 0;
    g.detail = fmt("%.0f violations over 80 sensor-runs, worst lhs-rhs margin %.1f",
                   static_cast<double>(violations), worst);
    print_gate(g);
    gates.push_back(g);
  }

  // 6. Detector calibration against the closed-form flag probability.
  {
    Gate g{6, false, "detector flag rate matches 1-exp(-r/upsilon) on a 3x3 grid", "", 0.0};
    const auto t0 = Clock::now();
    const std::array<double, 3> upsilons = {0.2, 0.5, 1.0};
    const std::array<double, 3> residuals = {0.5, 1.5, 3.0};
    double max_gap = 0.0;
    int point = 0;
    for (double u : upsilons) {
      for (double r : residuals) {
        fdia::RngStream rng(301, 0, fdia::Stream::kDetector, static_cast<std::uint64_t>(point++));
        const fdia::DetectorConfig cfg{u};
        Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
        Eigen::VectorXd offset(2);
        offset << r, 0.0;
        const int trials = 100000;
        int flagged = 0;
        for (int t = 0; t < trials; ++t) flagged += 1 - fdia::detect(cfg, zero, offset, rng);
        const double emp = static_cast<double>(flagged) / trials;
        max_gap = std::max(max_gap, std::abs(emp - fdia::flag_probability(cfg, r)));
      }
    }
    g.seconds = seconds_since(t0);
    g.pass = max_gap <= 0.005;
    g.detail = fmt("max |empirical - closed form| = %.5f over 9 points x 1e5 trials", max_gap);
    print_gate(g);
    gates.push_back(g);
  }

  // 7. Sensitivity sweep trend on the stealthy single-target case.
  std::vector<fdia::SweepCell> cells;
  {
    Gate g{7, false, "fn falls and fp rises with detector sensitivity in every beta row", "", 0.0};
    const auto t0 = Clock::now();
    std::vector<double> betas = {0.2, 0.5, 1.0};
    std::vector<double> upsilons;
    for (int i = 1; i <= 10; ++i) upsilons.push_back(static_cast<double>(i) / 10.0);
    cells = fdia::run_sweep(fdia::presets::case1("stealthy"), betas, upsilons, 1);
    bool ok = cells.size() == betas.size() * upsilons.size();
    double worst_fn_jump = 0.0, worst_fp_drop = 0.0;
    for (std::size_t b = 0; ok && b < betas.size(); ++b) {
      for (std::size_t u = 0; u + 1 < upsilons.size(); ++u) {
        const auto& lo = cells[b * upsilons.size() + u];
        const auto& hi = cells[b * upsilons.size() + u + 1];
        if (lo.fn && hi.fn) {
          const double se = std::sqrt(*lo.fn * (1.0 - *lo.fn) / static_cast<double>(lo.attacked) +
                                      *hi.fn * (1.0 - *hi.fn) / static_cast<double>(hi.attacked));
          worst_fn_jump = std::max(worst_fn_jump, *hi.fn - *lo.fn);
          if (*hi.fn > *lo.fn + 2.0 * se) ok = false;
        }
        if (lo.fp && hi.fp) {
          const double se = std::sqrt(*lo.fp * (1.0 - *lo.fp) / static_cast<double>(lo.clean) +
                                      *hi.fp * (1.0 - *hi.fp) / static_cast<double>(hi.clean));
          worst_fp_drop = std::max(worst_fp_drop, *lo.fp - *hi.fp);
          if (*hi.fp < *lo.fp - 2.0 * se) ok = false;
        }
      }
    }
    g.seconds = seconds_since(t0);
    g.pass = ok;
    g.detail = fmt("30 cells, worst fn increase %.5f, worst fp decrease %.5f (2-se slack)", worst_fn_jump,
                   worst_fp_drop);
    print_gate(g);
    gates.push_back(g);
  }

  // 8. Multi-target case: defended RMSE stays near the clean baseline while
  // the undefended estimator diverges.
  {
    Gate g{8, false, "multi-target rmse: defended <= 2x clean, undefended > 10x clean", "", 0.0};
    const auto t0 = Clock::now();
    const fdia::CaseResult res2 = fdia::run_case(fdia::presets::case2(), 1);
    const auto& clean = res2.rmse[fdia::kPipeClean];
    const auto& no_det = res2.rmse[fdia::kPipeNoDetector];
    const auto& sorted = res2.rmse[fdia::kPipeSorted];
    double worst_ratio = 0.0;
    for (int k = 101; k <= 500; ++k)
      worst_ratio = std::max(worst_ratio, sorted[k - 1] / clean[k - 1]);
    const double final_ratio = no_det[499] / clean[499];
    g.seconds = seconds_since(t0);
    g.pass = worst_ratio <= 2.0 && final_ratio > 10.0 && g.seconds < 300.0;
    g.detail = fmt("max defended/clean %.4f on [101,500]; undefended/clean %.2f at k=500", worst_ratio,
                   final_ratio);
    print_gate(g);
    gates.push_back(g);
  }

  // 9. Error recursion: live-network difference, per-sensor recursion and the
  // stacked linear map agree to 1e-10.
  {
    Gate g{9, false, "error recursion tracks the live network and its stacked map", "", 0.0};
    const auto t0 = Clock::now();
    double worst_net = 0.0, worst_stack = 0.0;
    for (int run = 0; run < 10; ++run) {
      const auto rc = fdia::check_error_recursion(fdia::presets::case1(), run, 100);
      worst_net = std::max(worst_net, rc.max_network_vs_delta);
      worst_stack = std::max(worst_stack, rc.max_delta_vs_stacked);
    }

    // one-step agreement between delta_step and the assembled map on random
    // masks and injections
    const fdia::Scenario sc = fdia::presets::case1();
    const fdia::CaseEngine engine(sc);
    const int N = sc.topology.sensor_count;
    const int n = sc.state_dim();
    fdia::RngStream rng(401, 0, fdia::Stream::kScheduler);
    double worst_one_step = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Eigen::VectorXd> delta(N + 1);
      for (int i = 1; i <= N; ++i) {
        delta[i] = Eigen::VectorXd(n);
        for (int d = 0; d < n; ++d) delta[i][d] = rng.gaussian();
      }
      delta[0] = Eigen::VectorXd::Zero(n);
      fdia::InclusionMask mask = fdia::all_ones_mask(sc.topology);
      fdia::LinkInjections z = fdia::zero_injections(sc.topology, n);
      for (int i = 1; i <= N; ++i)
        for (std::size_t t = 0; t < mask.gamma[i].size(); ++t) {
          mask.gamma[i][t] = static_cast<std::uint8_t>(rng.uniform01() < 0.5 ? 1 : 0);
          for (int d = 0; d < n; ++d) z.z[i][t][d] = rng.gaussian();
        }
      const auto next = fdia::delta_step(sc.model, sc.sensors, sc.topology, engine.gains(), sc.lambda,
                                         delta, mask, z);
      const auto aug = fdia::assemble_F(sc.model, sc.sensors, sc.topology, engine.gains(), sc.lambda, mask);
      const Eigen::VectorXd stacked = aug.F * fdia::stack_deltas(delta, N, n) +
                                      fdia::injection_term(sc.model, sc.topology, sc.lambda, mask, z);
      const double dev =
          (fdia::stack_deltas(next, N, n) - stacked).lpNorm<Eigen::Infinity>();
      worst_one_step = std::max(worst_one_step, dev);
    }
    g.seconds = seconds_since(t0);
    g.pass = worst_net <= 1e-10 && worst_stack <= 1e-10 && worst_one_step <= 1e-10;
    g.detail = fmt("network %.2e, stacked %.2e over 10 seeds x 100 steps; one-step %.2e on 100 masks",
                   worst_net, worst_stack, worst_one_step);
    print_gate(g);
    gates.push_back(g);
  }

  // 10. Objective-evaluation budget on every recorded scheduler call.
  {
    Gate g{10, false, "evaluation counts honour q*|N| - q(q-1)/2 <= q*|N| everywhere", "", 0.0};
    const auto t0 = Clock::now();
    long checked = 0;
    bool ok = true;
    for (const fdia::CaseResult* res : {&res_u, &res_s}) {
      for (const fdia::RunResult& rr : res->runs) {
        for (const fdia::ModeRunResult* m : {&rr.sampled, &rr.sorted}) {
          for (const fdia::StepRecord& rec : m->steps) {
            const int n_i = 6;  // the targeted sensor has six neighbors
            const int expect = rec.q * n_i - rec.q * (rec.q - 1) / 2;
            if (rec.evaluations != expect || rec.evaluations > rec.q * n_i) ok = false;
            ++checked;
          }
        }
      }
    }
    fdia::RngStream rng(501, 0, fdia::Stream::kScheduler);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 4 + static_cast<int>(rng.uniform(0.0, 9.0));
      fdia::ErrorSummary s;
      for (int t = 0; t < n; ++t) {
        s.neighbors.push_back(t + 1);
        s.entries.push_back(rng.uniform(0.0, 5.0));
      }
      const int q = 1 + static_cast<int>(rng.uniform(0.0, static_cast<double>(n / 2)));
      auto expert = fdia::ExpertState::make(0.5, s.neighbors);
      const auto r = fdia::select_suspicious(s, expert, q, fdia::SelectionMode::kSampled, rng);
      if (r.evaluations != q * n - q * (q - 1) / 2 || r.evaluations > q * n) ok = false;
      ++checked;
    }
    g.seconds = seconds_since(t0);
    g.pass = ok && checked > 0;
    g.detail = fmt("%.0f calls checked (recorded steps + 200 sampled-mode calls)",
                   static_cast<double>(checked));
    print_gate(g);
    gates.push_back(g);
  }

  // 11. Byte-identical artifacts across invocations and worker counts.
  {
    Gate g{11, false, "identical seed gives byte-identical artifacts across jobs and reruns", "", 0.0};
    const auto t0 = Clock::now();
    namespace fs = std::filesystem;
    if (cli.empty()) {
      g.detail = "no CLI path supplied on the command line";
    } else {
      const std::string dir_a = "acceptance_out_a", dir_b = "acceptance_out_b", dir_c = "acceptance_out_c";
      for (const auto& d : {dir_a, dir_b, dir_c}) fs::remove_all(d);
      auto invoke = [&cli](const std::string& dir, int jobs) {
        const std::string cmd = cli + " run cstr-case1 --seeds 4 --jobs " + std::to_string(jobs) +
                                " --out " + dir + " > /dev/null";
        return std::system(cmd.c_str()) == 0;
      };
      bool ok = invoke(dir_a, 1) && invoke(dir_b, 8) && invoke(dir_c, 1);
      const std::vector<std::string> names = {
          "steps_sampled.csv", "summary_sampled.csv", "sensors_sampled.csv", "steps_sorted.csv",
          "summary_sorted.csv", "sensors_sorted.csv", "rmse.csv",           "manifest.json"};
      int compared = 0;
      for (const auto& f : names) {
        if (!ok) break;
        bool oa = true, ob = true, oc = true;
        const std::string a = slurp(dir_a + "/" + f, &oa);
        const std::string b = slurp(dir_b + "/" + f, &ob);
        const std::string c = slurp(dir_c + "/" + f, &oc);
        if (!oa || !ob || !oc || a.empty() || a != b || a != c) {
          ok = false;
        } else {
          ++compared;
        }
      }
      for (const auto& d : {dir_a, dir_b, dir_c}) fs::remove_all(d);
      g.pass = ok && compared == static_cast<int>(names.size());
      g.detail = fmt("%.0f files byte-compared across --jobs 1, --jobs 8 and a rerun",
                     static_cast<double>(compared));
    }
    g.seconds = seconds_since(t0);
    print_gate(g);
    gates.push_back(g);
  }

  // Soft criterion: the mid history weight is reported, never gated. On this
  // plant the optimization rate decreases monotonically in beta instead.
  {
    const std::size_t grid = 10;  // upsilon_inv = 0.5 sits at index 4 of each row
    if (cells.size() == 3 * grid) {
      const double r02 = cells[0 * grid + 4].mean_optimization_rate;
      const double r05 = cells[1 * grid + 4].mean_optimization_rate;
      const double r10 = cells[2 * grid + 4].mean_optimization_rate;
      const bool met = r05 >= r02 && r05 >= r10;
      std::printf("soft         [%s] beta=0.5 should lead the stealthy optimization rate: "
                  "beta 0.2/0.5/1.0 -> %.4f/%.4f/%.4f (reported only, never gates)\n",
                  met ? "MET " : "UNMET", r02, r05, r10);
    }
  }

  int passed = 0;
  for (const Gate& g : gates) passed += g.pass ? 1 : 0;
  std::printf("RESULT: %d/%d criteria passed in %.1fs\n", passed, static_cast<int>(gates.size()),
              seconds_since(wall_start));
  return passed == static_cast<int>(gates.size()) ? 0 : 1;
}
