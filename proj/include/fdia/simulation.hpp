#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fdia/attack.hpp"
#include "fdia/csv.hpp"
#include "fdia/detector.hpp"
#include "fdia/estimator.hpp"
#include "fdia/metrics.hpp"
#include "fdia/scenario.hpp"
#include "fdia/scheduler.hpp"

namespace fdia {

// The five estimator networks advanced in lockstep for every run. They share
// the plant trajectory, measurements, injections and detector draws, so any
// difference between their outputs is caused by the defense policy alone.
enum Pipeline : int {
  kPipeClean = 0,       // no injections, every payload consumed
  kPipeNoDetector = 1,  // injections on, every payload consumed
  kPipeSampled = 2,     // scheduler with probability-matched picks + detector
  kPipeSorted = 3,      // scheduler with argmax picks + detector
  kPipeOracle = 4,      // exhaustive per-step optimum + detector
};
constexpr int kPipelineCount = 5;

inline const char* pipeline_name(int p) {
  static constexpr const char* kNames[kPipelineCount] = {"clean", "no_detector", "sampled", "sorted",
                                                         "oracle"};
  return kNames[p];
}

// One scheduler decision, kept for the step-level CSVs.
struct StepRecord {
  int step = 0;
  int sensor = 0;
  int q = 0;
  double f_selected = 0.0;
  double f_optimal = 0.0;
  int evaluations = 0;
  std::vector<int> selected;
  std::vector<int> optimal;
  std::vector<int> attacked;   // ground-truth compromised senders this step
  int masked = 0;              // selected links excluded by the detector
  double rmse_contrib = 0.0;   // this sensor's post-update estimate error norm
};

// Full per-step history of one run, filled on demand for debugging and for
// tests that compare pipelines state by state.
struct RunTrace {
  std::vector<StateVector> true_states;  // x(k), k = 1..T
  // estimates[p][k-1] holds every sensor's post-update estimate under
  // pipeline p at step k; masks[p][k-1] is the inclusion mask it consumed.
  std::array<std::vector<std::vector<Eigen::VectorXd>>, kPipelineCount> estimates;
  std::array<std::vector<InclusionMask>, kPipelineCount> masks;
};

// Per-run outcome of one scheduling policy at one sensor.
struct SensorRunStats {
  int sensor = 0;
  int q = 0;
  double optimization_rate = 1.0;
  double regret_lhs = 0.0;
  double regret_rhs = 0.0;
  int delta_T = 0;
  long attacked = 0;
  long missed = 0;
  long clean = 0;
  long false_flagged = 0;
};

struct ModeRunResult {
  std::vector<SensorRunStats> sensors;  // every sensor with q >= 1, ascending id
  SensorRunStats worst;                 // sensor with the largest lhs - rhs margin
  std::vector<StepRecord> steps;        // only sensors the schedule actually targets
};

struct RunResult {
  int run = 0;
  ModeRunResult sampled;
  ModeRunResult sorted;
  // Across-sensor mean signed estimate error per pipeline, steps 1..T.
  std::array<std::vector<Eigen::VectorXd>, kPipelineCount> errors;
};

struct CaseResult {
  Scenario scenario;
  std::vector<RunResult> runs;  // ordered by run index
  std::array<std::vector<double>, kPipelineCount> rmse;
};

// Monte Carlo engine for one scenario. Gains and schedule-derived constants
// are synthesized once; each run then draws from its own named substreams, so
// run r is byte-identical no matter which worker executes it.
class CaseEngine {
 public:
  explicit CaseEngine(Scenario sc) : sc_(std::move(sc)) {
    auto issues = validate_scenario(sc_);
    if (!issues.empty()) throw ConfigError(issues);
    gains_.assign(sc_.sensors.size(), Eigen::MatrixXd());
    for (int i = 1; i <= sc_.topology.sensor_count; ++i)
      gains_[i] = synthesize_gain(sc_.model, sc_.sensors[i]);
    rho_ = spectral_radius(assemble_F(sc_.model, sc_.sensors, sc_.topology, gains_, sc_.lambda,
                                      all_ones_mask(sc_.topology))
                               .F);
    if (!(rho_ < 1.0))
      throw SynthesisError("error dynamics are unstable for scenario " + sc_.name +
                           ": spectral radius " + std::to_string(rho_) +
                           " >= 1 with every link accepted; reduce lambda or revisit the gains");
    delta_T_.assign(sc_.sensors.size(), 0);
    for (int i = 1; i <= sc_.topology.sensor_count; ++i) {
      if (sc_.q_of(i) >= 1) scheduler_sensors_.push_back(i);
      delta_T_[i] = delta_T(sc_.attacks, i, sc_.run.horizon);
    }
    std::vector<int> receivers;
    for (const auto& iv : sc_.attacks.intervals)
      for (const auto& link : iv.links) receivers.push_back(link.receiver);
    std::sort(receivers.begin(), receivers.end());
    receivers.erase(std::unique(receivers.begin(), receivers.end()), receivers.end());
    for (int i : receivers)
      if (sc_.q_of(i) >= 1) record_sensors_.push_back(i);
  }

  const Scenario& scenario() const { return sc_; }
  const std::vector<Eigen::MatrixXd>& gains() const { return gains_; }
  const std::vector<int>& scheduler_sensors() const { return scheduler_sensors_; }
  double spectral_radius_all_accepted() const { return rho_; }

  RunResult simulate_run(int run, RunTrace* trace = nullptr) const {
    const int N = sc_.topology.sensor_count;
    const int n = sc_.state_dim();
    const int T = sc_.run.horizon;
    const std::uint64_t ms = sc_.run.master_seed;
    const auto r = static_cast<std::uint64_t>(run);

    RngStream process_rng(ms, r, Stream::kProcessNoise);
    std::vector<RngStream> meas_rng, det_rng;
    meas_rng.reserve(N);
    det_rng.reserve(N);
    for (int i = 1; i <= N; ++i) {
      meas_rng.emplace_back(ms, r, Stream::kMeasurementNoise, static_cast<std::uint64_t>(i));
      det_rng.emplace_back(ms, r, Stream::kDetector, static_cast<std::uint64_t>(i));
    }
    RngStream attack_rng(ms, r, Stream::kAttack);
    RngStream sampled_rng(ms, r, Stream::kScheduler, kPipeSampled);
    RngStream sorted_rng(ms, r, Stream::kScheduler, kPipeSorted);

    std::array<std::vector<Eigen::VectorXd>, kPipelineCount> est;
    for (auto& e : est) e.assign(N + 1, Eigen::VectorXd::Zero(n));
    const InclusionMask ones = all_ones_mask(sc_.topology);

    struct ModeScratch {
      std::vector<ExpertState> experts;
      std::vector<std::vector<double>> f_opt, f_sel;
      std::vector<long> attacked, missed, clean, false_flagged;
      std::vector<StepRecord> steps;
    };
    auto scratch_for = [&](double beta) {
      ModeScratch s;
      const std::size_t m = scheduler_sensors_.size();
      for (int i : scheduler_sensors_) s.experts.push_back(ExpertState::make(beta, sc_.topology.neighbors[i]));
      s.f_opt.assign(m, {});
      s.f_sel.assign(m, {});
      s.attacked.assign(m, 0);
      s.missed.assign(m, 0);
      s.clean.assign(m, 0);
      s.false_flagged.assign(m, 0);
      return s;
    };
    ModeScratch sampled_scr = scratch_for(sc_.scheduler.beta);
    ModeScratch sorted_scr = scratch_for(sc_.scheduler.beta);

    RunResult out;
    out.run = run;
    for (auto& e : out.errors) e.reserve(T);

    std::vector<Eigen::VectorXd> y(N + 1);
    std::vector<double> xi(N + 1, 0.0);
    StateVector x = sc_.x0;

    for (int k = 1; k <= T; ++k) {
      x = step_state(sc_.model, x, process_rng);
      for (int i = 1; i <= N; ++i) y[i] = measure(sc_.sensors[i], x, meas_rng[i - 1]);
      const LinkInjections z = injections_at(sc_.attacks, sc_.topology, k, n, attack_rng);
      for (int i = 1; i <= N; ++i) xi[i] = det_rng[i - 1].exponential1();

      // Builds the inclusion mask of one defended pipeline from its own
      // pre-update estimates, advancing its scheduler state as a side effect.
      auto defended_mask = [&](int p, RngStream* rng, ModeScratch* scr) {
        const auto& cur = est[p];
        InclusionMask mask = ones;
        for (std::size_t si = 0; si < scheduler_sensors_.size(); ++si) {
          const int i = scheduler_sensors_[si];
          const auto& nbrs = sc_.topology.neighbors[i];
          ErrorSummary summary;
          summary.sensor = i;
          summary.step = k;
          summary.neighbors = nbrs;
          summary.entries.resize(nbrs.size());
          for (std::size_t t = 0; t < nbrs.size(); ++t)
            summary.entries[t] = (cur[i] - (cur[nbrs[t]] + z.z[i][t])).norm();
          const int q = sc_.q_of(i);

          SuspiciousSet sel;
          int evaluations = 0;
          if (p == kPipeOracle) {
            sel = oracle_optimal(summary, q);
          } else {
            SelectionResult res = select_suspicious(summary, scr->experts[si], q,
                                                    p == kPipeSampled ? SelectionMode::kSampled
                                                                      : SelectionMode::kSorted,
                                                    *rng);
            sel = std::move(res.set);
            evaluations = res.evaluations;
          }

          const DetectorConfig cfg{sc_.upsilon_inv[i]};
          int masked_count = 0;
          for (int j : sel.members) {
            const int t = sc_.topology.neighbor_index(i, j);
            const int gamma = detect_with_draw(cfg, cur[i], cur[j] + z.z[i][t], xi[i]);
            mask.gamma[i][t] = static_cast<std::uint8_t>(gamma);
            if (!gamma) ++masked_count;
          }

          if (p == kPipeOracle) continue;
          const double f_sel = objective(summary, sel.members);
          const SuspiciousSet opt = oracle_optimal(summary, q);
          const double f_opt = objective(summary, opt.members);
          scr->f_sel[si].push_back(f_sel);
          scr->f_opt[si].push_back(f_opt);
          const std::vector<int> truth = attacked_set(sc_.attacks, i, k);
          for (std::size_t t = 0; t < nbrs.size(); ++t) {
            const bool atk = std::binary_search(truth.begin(), truth.end(), nbrs[t]);
            const bool flagged = mask.gamma[i][t] == 0;
            if (atk) {
              ++scr->attacked[si];
              if (!flagged) ++scr->missed[si];
            } else {
              ++scr->clean[si];
              if (flagged) ++scr->false_flagged[si];
            }
          }
          if (std::binary_search(record_sensors_.begin(), record_sensors_.end(), i)) {
            StepRecord rec;
            rec.step = k;
            rec.sensor = i;
            rec.q = q;
            rec.f_selected = f_sel;
            rec.f_optimal = f_opt;
            rec.evaluations = evaluations;
            rec.selected = sel.members;
            rec.optimal = opt.members;
            rec.attacked = truth;
            rec.masked = masked_count;
            scr->steps.push_back(std::move(rec));
          }
        }
        return mask;
      };

      const InclusionMask mask_sampled = defended_mask(kPipeSampled, &sampled_rng, &sampled_scr);
      const InclusionMask mask_sorted = defended_mask(kPipeSorted, &sorted_rng, &sorted_scr);
      const InclusionMask mask_oracle = defended_mask(kPipeOracle, nullptr, nullptr);

      const LinkInjections zeros = zero_injections(sc_.topology, n);
      est[kPipeClean] = network_step(sc_.model, sc_.sensors, sc_.topology, gains_, sc_.lambda,
                                     est[kPipeClean], y, ones, zeros);
      est[kPipeNoDetector] = network_step(sc_.model, sc_.sensors, sc_.topology, gains_, sc_.lambda,
                                          est[kPipeNoDetector], y, ones, z);
      est[kPipeSampled] = network_step(sc_.model, sc_.sensors, sc_.topology, gains_, sc_.lambda,
                                       est[kPipeSampled], y, mask_sampled, z);
      est[kPipeSorted] = network_step(sc_.model, sc_.sensors, sc_.topology, gains_, sc_.lambda,
                                      est[kPipeSorted], y, mask_sorted, z);
      est[kPipeOracle] = network_step(sc_.model, sc_.sensors, sc_.topology, gains_, sc_.lambda,
                                      est[kPipeOracle], y, mask_oracle, z);

      auto patch_contrib = [&](ModeScratch& scr, int p) {
        for (auto it = scr.steps.rbegin(); it != scr.steps.rend() && it->step == k; ++it)
          it->rmse_contrib = (est[p][it->sensor] - x).norm();
      };
      patch_contrib(sampled_scr, kPipeSampled);
      patch_contrib(sorted_scr, kPipeSorted);

      for (int p = 0; p < kPipelineCount; ++p) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
        for (int i = 1; i <= N; ++i) mean += est[p][i];
        mean /= static_cast<double>(N);
        out.errors[p].push_back(mean - x);
      }

      if (trace) {
        trace->true_states.push_back(x);
        for (int p = 0; p < kPipelineCount; ++p) trace->estimates[p].push_back(est[p]);
        trace->masks[kPipeClean].push_back(ones);
        trace->masks[kPipeNoDetector].push_back(ones);
        trace->masks[kPipeSampled].push_back(mask_sampled);
        trace->masks[kPipeSorted].push_back(mask_sorted);
        trace->masks[kPipeOracle].push_back(mask_oracle);
      }
    }

    auto finish = [&](ModeScratch& scr) {
      ModeRunResult mode;
      double worst_margin = -std::numeric_limits<double>::infinity();
      for (std::size_t si = 0; si < scheduler_sensors_.size(); ++si) {
        const int i = scheduler_sensors_[si];
        SensorRunStats st;
        st.sensor = i;
        st.q = sc_.q_of(i);
        st.delta_T = delta_T_[i];
        st.attacked = scr.attacked[si];
        st.missed = scr.missed[si];
        st.clean = scr.clean[si];
        st.false_flagged = scr.false_flagged[si];
        double acc = 0.0;
        for (std::size_t k = 0; k < scr.f_sel[si].size(); ++k)
          acc += optimization_rate(scr.f_sel[si][k], scr.f_opt[si][k]);
        st.optimization_rate = scr.f_sel[si].empty() ? 1.0 : acc / static_cast<double>(scr.f_sel[si].size());
        const RegretResult rr =
            regret_and_bound(scr.f_opt[si], scr.f_sel[si], st.q, sc_.topology.degree(i), st.delta_T);
        st.regret_lhs = rr.lhs;
        st.regret_rhs = rr.rhs;
        const double margin = st.regret_lhs - st.regret_rhs;
        if (margin > worst_margin) {
          worst_margin = margin;
          mode.worst = st;
        }
        mode.sensors.push_back(st);
      }
      mode.steps = std::move(scr.steps);
      return mode;
    };
    out.sampled = finish(sampled_scr);
    out.sorted = finish(sorted_scr);
    return out;
  }

  // Runs all Monte Carlo repetitions on up to `jobs` workers. Results are
  // keyed by run index, so the output is identical for any worker count.
  CaseResult run_all(int jobs) const {
    const int Z = sc_.run.runs;
    CaseResult result;
    result.scenario = sc_;
    result.runs.resize(Z);
    jobs = std::max(1, std::min(jobs, Z));

    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&]() {
      for (int r; (r = next.fetch_add(1)) < Z;) {
        try {
          result.runs[r] = simulate_run(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);

    for (int p = 0; p < kPipelineCount; ++p) {
      std::vector<std::vector<Eigen::VectorXd>> e_by_run;
      e_by_run.reserve(Z);
      for (const auto& rr : result.runs) e_by_run.push_back(rr.errors[p]);
      result.rmse[p] = rmse_curve(e_by_run);
    }
    return result;
  }

 private:
  Scenario sc_;
  std::vector<Eigen::MatrixXd> gains_;
  std::vector<int> scheduler_sensors_;  // sensors with q >= 1, ascending
  std::vector<int> record_sensors_;     // schedule receivers with q >= 1, ascending
  std::vector<int> delta_T_;
  double rho_ = 0.0;  // spectral radius of the all-accepted error map
};

inline CaseResult run_case(const Scenario& sc, int jobs = 1) { return CaseEngine(sc).run_all(jobs); }

// Whole-case aggregate of one scheduling policy across runs and sensors.
struct ModeAggregate {
  double mean_optimization_rate = 1.0;
  long attacked = 0;
  long missed = 0;
  long clean = 0;
  long false_flagged = 0;
  std::optional<double> fn;
  std::optional<double> fp;
  int bound_violations = 0;   // sensor-runs with regret lhs > rhs
  double worst_margin = -std::numeric_limits<double>::infinity();
};

inline ModeAggregate aggregate_mode(const CaseResult& res, SelectionMode mode) {
  ModeAggregate agg;
  double acc = 0.0;
  long count = 0;
  for (const RunResult& rr : res.runs) {
    const ModeRunResult& m = mode == SelectionMode::kSampled ? rr.sampled : rr.sorted;
    for (const SensorRunStats& st : m.sensors) {
      acc += st.optimization_rate;
      ++count;
      agg.attacked += st.attacked;
      agg.missed += st.missed;
      agg.clean += st.clean;
      agg.false_flagged += st.false_flagged;
      if (st.regret_lhs > st.regret_rhs) ++agg.bound_violations;
      agg.worst_margin = std::max(agg.worst_margin, st.regret_lhs - st.regret_rhs);
    }
  }
  if (count > 0) agg.mean_optimization_rate = acc / static_cast<double>(count);
  const FnFpResult f = fn_fp_from_counts(agg.attacked, agg.missed, agg.clean, agg.false_flagged);
  agg.fn = f.fn;
  agg.fp = f.fp;
  return agg;
}

namespace detail {

inline std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (t) out += '|';
    out += std::to_string(ids[t]);
  }
  return out;
}

inline void write_steps_csv(const CaseResult& res, SelectionMode mode, const std::string& path) {
  CsvWriter csv(path, {"seed", "k", "sensor", "f_sel", "f_opt", "opt_rate", "rmse_contrib", "q",
                       "evaluations", "selected", "optimal", "attacked", "masked"});
  for (const RunResult& rr : res.runs) {
    const ModeRunResult& m = mode == SelectionMode::kSampled ? rr.sampled : rr.sorted;
    for (const StepRecord& rec : m.steps) {
      csv.row()
          .add(rr.run)
          .add(rec.step)
          .add(rec.sensor)
          .add(rec.f_selected)
          .add(rec.f_optimal)
          .add(optimization_rate(rec.f_selected, rec.f_optimal))
          .add(rec.rmse_contrib)
          .add(rec.q)
          .add(rec.evaluations)
          .add(join_ids(rec.selected))
          .add(join_ids(rec.optimal))
          .add(join_ids(rec.attacked))
          .add(rec.masked);
    }
  }
}

// One row per seed: optimization rate averaged over scheduler sensors, the
// regret pair of the worst-margin sensor, and detector rates pooled over all
// link tests of the run.
inline void write_summary_csv(const CaseResult& res, SelectionMode mode, const std::string& path) {
  CsvWriter csv(path, {"seed", "avg_opt_rate", "regret_lhs", "regret_rhs", "fn", "fp", "bound_holds",
                       "attacked", "missed", "clean", "false_flagged"});
  for (const RunResult& rr : res.runs) {
    const ModeRunResult& m = mode == SelectionMode::kSampled ? rr.sampled : rr.sorted;
    double acc = 0.0;
    long attacked = 0, missed = 0, clean = 0, false_flagged = 0;
    bool bound_holds = true;
    for (const SensorRunStats& st : m.sensors) {
      acc += st.optimization_rate;
      attacked += st.attacked;
      missed += st.missed;
      clean += st.clean;
      false_flagged += st.false_flagged;
      if (st.regret_lhs > st.regret_rhs) bound_holds = false;
    }
    const double avg = m.sensors.empty() ? 1.0 : acc / static_cast<double>(m.sensors.size());
    const FnFpResult f = fn_fp_from_counts(attacked, missed, clean, false_flagged);
    csv.row()
        .add(rr.run)
        .add(avg)
        .add(m.worst.regret_lhs)
        .add(m.worst.regret_rhs)
        .add(f.fn)
        .add(f.fp)
        .add(bound_holds ? 1 : 0)
        .add(static_cast<std::uint64_t>(attacked))
        .add(static_cast<std::uint64_t>(missed))
        .add(static_cast<std::uint64_t>(clean))
        .add(static_cast<std::uint64_t>(false_flagged));
  }
}

// One row per (seed, scheduler sensor) with the full per-sensor breakdown.
inline void write_sensors_csv(const CaseResult& res, SelectionMode mode, const std::string& path) {
  CsvWriter csv(path, {"seed", "sensor", "q", "avg_opt_rate", "regret_lhs", "regret_rhs",
                       "bound_holds", "delta_T", "attacked", "missed", "clean", "false_flagged",
                       "fn", "fp"});
  for (const RunResult& rr : res.runs) {
    const ModeRunResult& m = mode == SelectionMode::kSampled ? rr.sampled : rr.sorted;
    for (const SensorRunStats& st : m.sensors) {
      const FnFpResult f = fn_fp_from_counts(st.attacked, st.missed, st.clean, st.false_flagged);
      csv.row()
          .add(rr.run)
          .add(st.sensor)
          .add(st.q)
          .add(st.optimization_rate)
          .add(st.regret_lhs)
          .add(st.regret_rhs)
          .add(st.regret_lhs <= st.regret_rhs ? 1 : 0)
          .add(st.delta_T)
          .add(static_cast<std::uint64_t>(st.attacked))
          .add(static_cast<std::uint64_t>(st.missed))
          .add(static_cast<std::uint64_t>(st.clean))
          .add(static_cast<std::uint64_t>(st.false_flagged))
          .add(f.fn)
          .add(f.fp);
    }
  }
}

}  // namespace detail

// Writes the CSV/JSON artifacts of one case into out_dir. The scheduler mode
// of the scenario controls which policy files appear; the RMSE table always
// carries all five pipelines.
inline std::vector<std::string> write_outputs(const CaseResult& res, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  const std::string& mode = res.scenario.scheduler.mode;

  auto emit = [&](SelectionMode sel, const std::string& tag) {
    detail::write_steps_csv(res, sel, out_dir + "/steps_" + tag + ".csv");
    detail::write_summary_csv(res, sel, out_dir + "/summary_" + tag + ".csv");
    detail::write_sensors_csv(res, sel, out_dir + "/sensors_" + tag + ".csv");
    files.push_back("steps_" + tag + ".csv");
    files.push_back("summary_" + tag + ".csv");
    files.push_back("sensors_" + tag + ".csv");
  };
  if (mode == "sampled" || mode == "both") emit(SelectionMode::kSampled, "sampled");
  if (mode == "sorted" || mode == "both") emit(SelectionMode::kSorted, "sorted");

  {
    CsvWriter csv(out_dir + "/rmse.csv",
                  {"step", "clean", "no_detector", "sampled", "sorted", "oracle"});
    const int T = static_cast<int>(res.rmse[0].size());
    for (int k = 0; k < T; ++k) {
      csv.row()
          .add(k + 1)
          .add(res.rmse[kPipeClean][k])
          .add(res.rmse[kPipeNoDetector][k])
          .add(res.rmse[kPipeSampled][k])
          .add(res.rmse[kPipeSorted][k])
          .add(res.rmse[kPipeOracle][k]);
    }
    files.push_back("rmse.csv");
  }

  nlohmann::json manifest;
  manifest["scenario"] = scenario_manifest(res.scenario);
  manifest["files"] = files;
  manifest["runs"] = static_cast<int>(res.runs.size());
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw ConfigError("cannot open output file: " + out_dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
  files.push_back("manifest.json");
  return files;
}

// Lockstep check of the error recursion: an attacked network and an
// injection-free twin share one realized mask sequence, so their difference
// must follow the per-sensor recursion and its stacked form. Returns the
// largest deviations seen plus the spectral radius of the all-accept map.
struct RecursionCheck {
  double max_network_vs_delta = 0.0;
  double max_delta_vs_stacked = 0.0;
  double rho_all_ones = 0.0;
};

inline RecursionCheck check_error_recursion(const Scenario& sc, int run, int T) {
  auto issues = validate_scenario(sc);
  if (!issues.empty()) throw ConfigError(issues);
  const int N = sc.topology.sensor_count;
  const int n = sc.state_dim();
  const std::uint64_t ms = sc.run.master_seed;
  const auto r = static_cast<std::uint64_t>(run);

  std::vector<Eigen::MatrixXd> gains(sc.sensors.size());
  for (int i = 1; i <= N; ++i) gains[i] = synthesize_gain(sc.model, sc.sensors[i]);

  RngStream process_rng(ms, r, Stream::kProcessNoise);
  std::vector<RngStream> meas_rng, det_rng;
  for (int i = 1; i <= N; ++i) {
    meas_rng.emplace_back(ms, r, Stream::kMeasurementNoise, static_cast<std::uint64_t>(i));
    det_rng.emplace_back(ms, r, Stream::kDetector, static_cast<std::uint64_t>(i));
  }
  RngStream attack_rng(ms, r, Stream::kAttack);
  RngStream sched_rng(ms, r, Stream::kScheduler, kPipeSorted);

  std::vector<int> sched_sensors;
  std::vector<ExpertState> experts;
  for (int i = 1; i <= N; ++i)
    if (sc.q_of(i) >= 1) {
      sched_sensors.push_back(i);
      experts.push_back(ExpertState::make(sc.scheduler.beta, sc.topology.neighbors[i]));
    }

  const InclusionMask ones = all_ones_mask(sc.topology);
  std::vector<Eigen::VectorXd> attacked(N + 1, Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> twin(N + 1, Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> delta(N + 1, Eigen::VectorXd::Zero(n));
  Eigen::VectorXd stacked = Eigen::VectorXd::Zero(n * N);

  RecursionCheck out;
  out.rho_all_ones = spectral_radius(
      assemble_F(sc.model, sc.sensors, sc.topology, gains, sc.lambda, ones).F);

  std::vector<Eigen::VectorXd> y(N + 1);
  StateVector x = sc.x0;
  for (int k = 1; k <= T; ++k) {
    x = step_state(sc.model, x, process_rng);
    for (int i = 1; i <= N; ++i) y[i] = measure(sc.sensors[i], x, meas_rng[i - 1]);
    const LinkInjections z = injections_at(sc.attacks, sc.topology, k, n, attack_rng);

    InclusionMask mask = ones;
    for (std::size_t si = 0; si < sched_sensors.size(); ++si) {
      const int i = sched_sensors[si];
      const auto& nbrs = sc.topology.neighbors[i];
      ErrorSummary summary;
      summary.sensor = i;
      summary.step = k;
      summary.neighbors = nbrs;
      summary.entries.resize(nbrs.size());
      for (std::size_t t = 0; t < nbrs.size(); ++t)
        summary.entries[t] = (attacked[i] - (attacked[nbrs[t]] + z.z[i][t])).norm();
      SelectionResult res =
          select_suspicious(summary, experts[si], sc.q_of(i), SelectionMode::kSorted, sched_rng);
      const double xi = det_rng[i - 1].exponential1();
      const DetectorConfig cfg{sc.upsilon_inv[i]};
      for (int j : res.set.members) {
        const int t = sc.topology.neighbor_index(i, j);
        mask.gamma[i][t] =
            static_cast<std::uint8_t>(detect_with_draw(cfg, attacked[i], attacked[j] + z.z[i][t], xi));
      }
    }

    const LinkInjections zeros = zero_injections(sc.topology, n);
    attacked = network_step(sc.model, sc.sensors, sc.topology, gains, sc.lambda, attacked, y, mask, z);
    twin = network_step(sc.model, sc.sensors, sc.topology, gains, sc.lambda, twin, y, mask, zeros);

    const AugmentedError aug = assemble_F(sc.model, sc.sensors, sc.topology, gains, sc.lambda, mask);
    stacked = aug.F * stacked + injection_term(sc.model, sc.topology, sc.lambda, mask, z);
    delta = delta_step(sc.model, sc.sensors, sc.topology, gains, sc.lambda, delta, mask, z);

    for (int i = 1; i <= N; ++i) {
      const double dev = ((attacked[i] - twin[i]) - delta[i]).lpNorm<Eigen::Infinity>();
      out.max_network_vs_delta = std::max(out.max_network_vs_delta, dev);
    }
    const double dev_stacked =
        (stack_deltas(delta, N, n) - stacked).lpNorm<Eigen::Infinity>();
    out.max_delta_vs_stacked = std::max(out.max_delta_vs_stacked, dev_stacked);
  }
  return out;
}

// One cell of a (beta, upsilon_inv) sweep, aggregated over the argmax policy.
struct SweepCell {
  double beta = 0.0;
  double upsilon_inv = 0.0;
  int runs = 0;
  long attacked = 0;
  long missed = 0;
  long clean = 0;
  long false_flagged = 0;
  std::optional<double> fn;
  std::optional<double> fp;
  double mean_optimization_rate = 1.0;
  double rmse_tail = 0.0;  // mean defended RMSE over the last quarter of the horizon
};

// Grid sweep with common random numbers: every cell reuses the same master
// seed, so cells differ only through the parameters under study.
inline std::vector<SweepCell> run_sweep(const Scenario& base, const std::vector<double>& betas,
                                        const std::vector<double>& upsilon_invs, int jobs) {
  if (betas.empty() || upsilon_invs.empty())
    throw ConfigError("sweep needs at least one beta and one upsilon_inv value");
  std::vector<SweepCell> cells;
  for (double beta : betas) {
    for (double u : upsilon_invs) {
      Scenario sc = base;
      sc.scheduler.beta = beta;
      for (std::size_t i = 1; i < sc.upsilon_inv.size(); ++i) sc.upsilon_inv[i] = u;
      const CaseResult res = run_case(sc, jobs);
      const ModeAggregate agg = aggregate_mode(res, SelectionMode::kSorted);
      SweepCell cell;
      cell.beta = beta;
      cell.upsilon_inv = u;
      cell.runs = static_cast<int>(res.runs.size());
      cell.attacked = agg.attacked;
      cell.missed = agg.missed;
      cell.clean = agg.clean;
      cell.false_flagged = agg.false_flagged;
      cell.fn = agg.fn;
      cell.fp = agg.fp;
      cell.mean_optimization_rate = agg.mean_optimization_rate;
      const auto& curve = res.rmse[kPipeSorted];
      const std::size_t tail_start = curve.size() - curve.size() / 4;
      double acc = 0.0;
      for (std::size_t k = tail_start; k < curve.size(); ++k) acc += curve[k];
      cell.rmse_tail = curve.empty() ? 0.0 : acc / static_cast<double>(curve.size() - tail_start);
      cells.push_back(cell);
    }
  }
  return cells;
}

inline void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  CsvWriter csv(path, {"beta", "upsilon_inv", "runs", "attacked", "missed", "clean", "false_flagged",
                       "fn_rate", "fp_rate", "mean_optimization_rate", "rmse_tail"});
  for (const SweepCell& c : cells) {
    csv.row()
        .add(c.beta)
        .add(c.upsilon_inv)
        .add(c.runs)
        .add(static_cast<std::uint64_t>(c.attacked))
        .add(static_cast<std::uint64_t>(c.missed))
        .add(static_cast<std::uint64_t>(c.clean))
        .add(static_cast<std::uint64_t>(c.false_flagged))
        .add(c.fn)
        .add(c.fp)
        .add(c.mean_optimization_rate)
        .add(c.rmse_tail);
  }
}

}  // namespace fdia
