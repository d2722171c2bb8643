#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdia/presets.hpp"
#include "fdia/simulation.hpp"

namespace {

// Scalar plant observed by three fully connected sensors. With a = 1.05 and
// lambda = 0.49 the all-accept error map has an eigenvalue a - K - 3*lambda*a
// below -1, so construction must refuse it.
fdia::Scenario triangle(double a, double lambda, double upsilon_inv) {
  fdia::Scenario sc;
  sc.name = "triangle";
  sc.model.A = Eigen::MatrixXd::Constant(1, 1, a);
  sc.model.Q = Eigen::MatrixXd::Constant(1, 1, 0.25);
  sc.model.omega_bound = 0.05;
  sc.x0 = Eigen::VectorXd::Constant(1, 1.0);
  sc.lambda = lambda;
  sc.sensors.assign(4, fdia::SensorModel{});
  for (int i = 1; i <= 3; ++i) {
    fdia::SensorModel s;
    s.id = i;
    s.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
    s.R = Eigen::MatrixXd::Constant(1, 1, 0.5);
    s.nu_bound = 0.05;
    sc.sensors[i] = s;
  }
  sc.topology = fdia::make_topology(3, {{1, 2}, {2, 3}, {1, 3}});
  sc.upsilon_inv.assign(4, upsilon_inv);
  sc.run.horizon = 40;
  sc.run.runs = 1;
  sc.run.master_seed = 11;
  return sc;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

void require_identical(const fdia::RunResult& a, const fdia::RunResult& b) {
  REQUIRE(a.run == b.run);
  for (int p = 0; p < fdia::kPipelineCount; ++p) {
    REQUIRE(a.errors[p].size() == b.errors[p].size());
    for (std::size_t k = 0; k < a.errors[p].size(); ++k)
      REQUIRE((a.errors[p][k] - b.errors[p][k]).norm() == 0.0);
  }
  REQUIRE(a.sorted.steps.size() == b.sorted.steps.size());
  for (std::size_t t = 0; t < a.sorted.steps.size(); ++t) {
    REQUIRE(a.sorted.steps[t].f_selected == b.sorted.steps[t].f_selected);
    REQUIRE(a.sorted.steps[t].selected == b.sorted.steps[t].selected);
    REQUIRE(a.sorted.steps[t].masked == b.sorted.steps[t].masked);
    REQUIRE(a.sorted.steps[t].rmse_contrib == b.sorted.steps[t].rmse_contrib);
  }
  REQUIRE(a.sampled.steps.size() == b.sampled.steps.size());
  for (std::size_t t = 0; t < a.sampled.steps.size(); ++t) {
    REQUIRE(a.sampled.steps[t].f_selected == b.sampled.steps[t].f_selected);
    REQUIRE(a.sampled.steps[t].selected == b.sampled.steps[t].selected);
  }
  REQUIRE(a.sorted.worst.regret_lhs == b.sorted.worst.regret_lhs);
  REQUIRE(a.sorted.worst.regret_rhs == b.sorted.worst.regret_rhs);
}

}  // namespace

TEST_CASE("construction rejects an inadmissible consensus weight") {
  fdia::Scenario sc = fdia::presets::case1();
  sc.lambda = 0.2;  // hub degree is 6, so anything >= 1/6 must be refused
  REQUIRE_THROWS_AS(fdia::CaseEngine(sc), fdia::ConfigError);
}

TEST_CASE("bundled scenarios synthesize stable error dynamics") {
  const fdia::CaseEngine e1(fdia::presets::case1());
  REQUIRE(e1.spectral_radius_all_accepted() < 1.0);
  REQUIRE(e1.scheduler_sensors() == std::vector<int>{5});

  const fdia::CaseEngine e2(fdia::presets::case2());
  REQUIRE(e2.spectral_radius_all_accepted() < 1.0);
  REQUIRE(e2.scheduler_sensors().size() == 30);
}

TEST_CASE("unstable error dynamics are refused with a diagnosis") {
  REQUIRE_THROWS_AS(fdia::CaseEngine(triangle(1.05, 0.49, 0.5)), fdia::SynthesisError);
  REQUIRE_THROWS_WITH(fdia::CaseEngine(triangle(1.05, 0.49, 0.5)),
                      Catch::Matchers::ContainsSubstring("spectral radius"));
}

TEST_CASE("without injections the undefended network equals the clean baseline") {
  const fdia::CaseEngine engine(triangle(0.5, 0.1, 0.5));
  fdia::RunTrace trace;
  engine.simulate_run(0, &trace);
  REQUIRE(trace.true_states.size() == 40);
  for (std::size_t k = 0; k < trace.true_states.size(); ++k)
    for (int i = 1; i <= 3; ++i)
      REQUIRE((trace.estimates[fdia::kPipeClean][k][i] -
               trace.estimates[fdia::kPipeNoDetector][k][i]).norm() == 0.0);
}

TEST_CASE("a vanishing detector sensitivity reduces every pipeline to the clean one") {
  const fdia::CaseEngine engine(triangle(0.5, 0.1, 1e-9));
  fdia::RunTrace trace;
  engine.simulate_run(0, &trace);
  const fdia::InclusionMask ones = fdia::all_ones_mask(engine.scenario().topology);
  for (std::size_t k = 0; k < trace.true_states.size(); ++k) {
    for (int p = 0; p < fdia::kPipelineCount; ++p) {
      REQUIRE(trace.masks[p][k].gamma == ones.gamma);
      for (int i = 1; i <= 3; ++i)
        REQUIRE((trace.estimates[p][k][i] - trace.estimates[fdia::kPipeClean][k][i]).norm() == 0.0);
    }
  }
}

TEST_CASE("a run is a pure function of its index") {
  fdia::Scenario sc = fdia::presets::case1();
  sc.run.runs = 3;
  const fdia::CaseEngine engine(sc);
  fdia::RunTrace t1, t2;
  const fdia::RunResult a = engine.simulate_run(1, &t1);
  const fdia::RunResult b = engine.simulate_run(1, &t2);
  require_identical(a, b);
  REQUIRE(t1.true_states.size() == t2.true_states.size());
  for (std::size_t k = 0; k < t1.true_states.size(); ++k) {
    REQUIRE((t1.true_states[k] - t2.true_states[k]).norm() == 0.0);
    for (int p = 0; p < fdia::kPipelineCount; ++p) {
      REQUIRE(t1.masks[p][k].gamma == t2.masks[p][k].gamma);
      for (int i = 1; i <= 30; ++i)
        REQUIRE((t1.estimates[p][k][i] - t2.estimates[p][k][i]).norm() == 0.0);
    }
  }
}

TEST_CASE("worker count never changes the results") {
  fdia::Scenario sc = fdia::presets::case1();
  sc.run.runs = 3;
  const fdia::CaseEngine engine(sc);
  const fdia::CaseResult serial = engine.run_all(1);
  const fdia::CaseResult parallel = engine.run_all(3);
  REQUIRE(serial.runs.size() == 3);
  REQUIRE(parallel.runs.size() == 3);
  for (std::size_t z = 0; z < serial.runs.size(); ++z)
    require_identical(serial.runs[z], parallel.runs[z]);
  for (int p = 0; p < fdia::kPipelineCount; ++p) {
    REQUIRE(serial.rmse[p].size() == parallel.rmse[p].size());
    for (std::size_t k = 0; k < serial.rmse[p].size(); ++k)
      REQUIRE(serial.rmse[p][k] == parallel.rmse[p][k]);
  }
}

TEST_CASE("artifacts land on disk with the documented schemas") {
  namespace fs = std::filesystem;
  fdia::Scenario sc = fdia::presets::case1();
  sc.run.runs = 2;
  const fdia::CaseResult res = fdia::run_case(sc, 1);
  const std::string dir = "fdia_unit_outputs";
  fs::remove_all(dir);
  const auto files = fdia::write_outputs(res, dir);
  REQUIRE(files.size() == 8);

  const auto steps = read_lines(dir + "/steps_sorted.csv");
  REQUIRE(steps.size() == 1 + 2 * 100);
  REQUIRE(steps[0] ==
          "seed,k,sensor,f_sel,f_opt,opt_rate,rmse_contrib,q,evaluations,selected,optimal,attacked,masked");
  for (std::size_t r = 1; r < steps.size(); ++r) {
    const auto cells = split_csv(steps[r]);
    REQUIRE(cells.size() == 13);
    const int seed = std::stoi(cells[0]);
    const int k = std::stoi(cells[1]);
    REQUIRE((seed == 0 || seed == 1));
    REQUIRE((k >= 1 && k <= 100));
    REQUIRE(cells[2] == "5");
    const double f_sel = std::stod(cells[3]);
    const double f_opt = std::stod(cells[4]);
    const double opt_rate = std::stod(cells[5]);
    const double contrib = std::stod(cells[6]);
    REQUIRE(f_sel <= f_opt + 1e-9);
    REQUIRE((opt_rate >= 0.0 && opt_rate <= 1.0));
    REQUIRE(contrib >= 0.0);
    REQUIRE(cells[7] == "3");
    REQUIRE(cells[8] == "15");  // 3 * 6 - 3 objective evaluations
    REQUIRE(std::count(cells[9].begin(), cells[9].end(), '|') == 2);
    const int masked = std::stoi(cells[12]);
    REQUIRE((masked >= 0 && masked <= 3));
  }

  const auto summary = read_lines(dir + "/summary_sorted.csv");
  REQUIRE(summary.size() == 3);
  REQUIRE(summary[0] ==
          "seed,avg_opt_rate,regret_lhs,regret_rhs,fn,fp,bound_holds,attacked,missed,clean,false_flagged");
  for (std::size_t r = 1; r < summary.size(); ++r) {
    const auto cells = split_csv(summary[r]);
    REQUIRE(cells.size() == 11);
    const double avg = std::stod(cells[1]);
    REQUIRE((avg >= 0.0 && avg <= 1.0));
    REQUIRE(std::stod(cells[2]) <= std::stod(cells[3]));
    REQUIRE(cells[6] == "1");
  }

  const auto sensors = read_lines(dir + "/sensors_sorted.csv");
  REQUIRE(sensors.size() == 3);  // one scheduler sensor per run
  REQUIRE(sensors[0] ==
          "seed,sensor,q,avg_opt_rate,regret_lhs,regret_rhs,bound_holds,delta_T,attacked,missed,clean,"
          "false_flagged,fn,fp");
  for (std::size_t r = 1; r < sensors.size(); ++r) {
    const auto cells = split_csv(sensors[r]);
    REQUIRE(cells.size() == 14);
    REQUIRE(cells[1] == "5");
    REQUIRE(cells[2] == "3");
    REQUIRE(cells[7] == "2");  // the link set changes once, by a swap
  }

  const auto rmse = read_lines(dir + "/rmse.csv");
  REQUIRE(rmse.size() == 101);
  REQUIRE(rmse[0] == "step,clean,no_detector,sampled,sorted,oracle");
  for (std::size_t r = 1; r < rmse.size(); ++r) {
    const auto cells = split_csv(rmse[r]);
    REQUIRE(cells.size() == 6);
    REQUIRE(std::stoi(cells[0]) == static_cast<int>(r));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = std::stod(cells[c]);
      REQUIRE(std::isfinite(v));
      REQUIRE(v >= 0.0);
    }
  }

  std::ifstream min(dir + "/manifest.json");
  nlohmann::json manifest;
  min >> manifest;
  REQUIRE(manifest["runs"].get<int>() == 2);
  REQUIRE(manifest["scenario"]["name"].get<std::string>() == "cstr-case1");
  const auto listed = manifest["files"].get<std::vector<std::string>>();
  for (const char* f : {"steps_sampled.csv", "summary_sampled.csv", "sensors_sampled.csv",
                        "steps_sorted.csv", "summary_sorted.csv", "sensors_sorted.csv", "rmse.csv"})
    REQUIRE(std::find(listed.begin(), listed.end(), f) != listed.end());
  fs::remove_all(dir);
}

TEST_CASE("the error recursion tracks the live network to numerical precision") {
  const fdia::RecursionCheck rc = fdia::check_error_recursion(fdia::presets::case1(), 0, 20);
  REQUIRE(rc.max_network_vs_delta <= 1e-10);
  REQUIRE(rc.max_delta_vs_stacked <= 1e-10);
  REQUIRE(rc.rho_all_ones < 1.0);
}

TEST_CASE("a single-cell sweep reproduces the plain run exactly") {
  fdia::Scenario sc = fdia::presets::case1();
  sc.run.runs = 2;
  const auto cells = fdia::run_sweep(sc, {0.5}, {0.5}, 1);
  REQUIRE(cells.size() == 1);

  const fdia::CaseResult res = fdia::run_case(sc, 1);
  const fdia::ModeAggregate agg = fdia::aggregate_mode(res, fdia::SelectionMode::kSorted);
  REQUIRE(cells[0].runs == 2);
  REQUIRE(cells[0].mean_optimization_rate == agg.mean_optimization_rate);
  REQUIRE(cells[0].attacked == agg.attacked);
  REQUIRE(cells[0].missed == agg.missed);
  REQUIRE(cells[0].clean == agg.clean);
  REQUIRE(cells[0].false_flagged == agg.false_flagged);
  REQUIRE(cells[0].fn.has_value() == agg.fn.has_value());
  if (agg.fn) REQUIRE(*cells[0].fn == *agg.fn);
  if (agg.fp) REQUIRE(*cells[0].fp == *agg.fp);

  const auto& curve = res.rmse[fdia::kPipeSorted];
  const std::size_t tail_start = curve.size() - curve.size() / 4;
  double acc = 0.0;
  for (std::size_t k = tail_start; k < curve.size(); ++k) acc += curve[k];
  REQUIRE(cells[0].rmse_tail == acc / static_cast<double>(curve.size() - tail_start));

  REQUIRE_THROWS_AS(fdia::run_sweep(sc, {}, {0.5}, 1), fdia::ConfigError);
}
