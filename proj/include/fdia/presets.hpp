#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fdia/scenario.hpp"

namespace fdia {
namespace presets {

constexpr int kSensorCount = 30;
constexpr int kHubSensor = 5;

inline SystemModel cstr_system() {
  SystemModel m;
  m.A.resize(2, 2);
  m.A << 0.9719, -0.0013,
        -0.0340,  0.8628;
  m.Q = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  m.omega_bound = 0.05;
  return m;
}

inline std::vector<SensorModel> cstr_sensors() {
  std::vector<SensorModel> sensors(kSensorCount + 1);
  for (int i = 1; i <= kSensorCount; ++i) {
    SensorModel s;
    s.id = i;
    s.C = detail::cstr_c_row(i);
    s.R = Eigen::MatrixXd::Constant(1, 1, 0.5);
    s.nu_bound = 0.05;
    sensors[i] = s;
  }
  return sensors;
}

inline std::vector<int> hub_neighbors() { return {3, 7, 10, 13, 23, 26}; }

// Star around the hub sensor; every other sensor is a leaf.
inline std::vector<std::pair<int, int>> case1_edges() {
  std::vector<std::pair<int, int>> edges;
  for (int nb : hub_neighbors()) edges.emplace_back(kHubSensor, nb);
  return edges;
}

// Hub star plus a ring over the remaining sensors, plus the four extra links
// that give sensors 2 and 16 their attack-carrying neighborhoods. Max degree
// stays at 6 so lambda = 0.1 remains admissible.
inline std::vector<std::pair<int, int>> case2_edges() {
  std::vector<std::pair<int, int>> edges = case1_edges();
  std::vector<int> ring;
  for (int i = 1; i <= kSensorCount; ++i)
    if (i != kHubSensor) ring.push_back(i);
  for (std::size_t t = 0; t < ring.size(); ++t)
    edges.emplace_back(ring[t], ring[(t + 1) % ring.size()]);
  edges.emplace_back(2, 15);
  edges.emplace_back(2, 29);
  edges.emplace_back(16, 12);
  edges.emplace_back(16, 19);
  return edges;
}

inline SignalFamily family_by_name(const std::string& family) {
  if (family == "stealthy") return SignalFamily::stealthy_default();
  if (family == "unstealthy") return SignalFamily::unstealthy_default();
  throw ConfigError("unknown injection family: " + family + " (expected unstealthy or stealthy)");
}

// 30 sensors, hub-only topology, two attack phases against the hub over a
// 100-step horizon. The compromised-link set changes once, at step 51.
inline Scenario case1(const std::string& family = "unstealthy") {
  Scenario sc;
  sc.name = family == "unstealthy" ? "cstr-case1" : "cstr-case1-" + family;
  sc.model = cstr_system();
  sc.x0 = Eigen::Vector2d(1.0, 1.0);
  sc.lambda = 0.1;
  sc.sensors = cstr_sensors();
  sc.topology = make_topology(kSensorCount, case1_edges());
  sc.attacks.families = {family_by_name(family)};
  sc.attacks.intervals = {
      AttackInterval{1, 50, {{kHubSensor, 7}, {kHubSensor, 10}, {kHubSensor, 23}}, 0},
      AttackInterval{51, 100, {{kHubSensor, 3}, {kHubSensor, 7}, {kHubSensor, 23}}, 0},
  };
  sc.scheduler.beta = 0.5;
  sc.scheduler.mode = "both";
  sc.upsilon_inv.assign(kSensorCount + 1, 0.5);
  sc.run.horizon = 100;
  sc.run.runs = 20;
  sc.run.master_seed = 1;
  return sc;
}

// Denser topology with three simultaneously attacked sensors (2, 5, 16) and a
// fixed link set over steps 101..500 of a 500-step horizon. The unstealthy
// injections here are an order of magnitude above the single-target case so
// the undefended estimator visibly diverges from the clean baseline.
inline Scenario case2(const std::string& family = "unstealthy") {
  Scenario sc;
  sc.name = family == "unstealthy" ? "cstr-case2" : "cstr-case2-" + family;
  sc.model = cstr_system();
  sc.x0 = Eigen::Vector2d(1.0, 1.0);
  sc.lambda = 0.1;
  sc.sensors = cstr_sensors();
  sc.topology = make_topology(kSensorCount, case2_edges());
  SignalFamily fam = family_by_name(family);
  if (family == "unstealthy") {
    fam.amplitude_low = 50.0;
    fam.amplitude_high = 100.0;
  }
  sc.attacks.families = {fam};
  sc.attacks.intervals = {
      AttackInterval{101, 500,
                     {{2, 15}, {2, 29}, {kHubSensor, 7}, {kHubSensor, 10}, {kHubSensor, 23},
                      {16, 12}, {16, 19}},
                     0},
  };
  sc.scheduler.beta = 0.5;
  sc.scheduler.mode = "both";
  sc.upsilon_inv.assign(kSensorCount + 1, 0.5);
  sc.run.horizon = 500;
  sc.run.runs = 50;
  sc.run.master_seed = 1;
  return sc;
}

}  // namespace presets

// Accepts a preset name or a path to a scenario JSON file.
inline Scenario load_scenario(const std::string& name_or_path) {
  if (name_or_path == "cstr-case1") return presets::case1();
  if (name_or_path == "cstr-case1-stealthy") return presets::case1("stealthy");
  if (name_or_path == "cstr-case2") return presets::case2();
  if (name_or_path == "cstr-case2-stealthy") return presets::case2("stealthy");
  return load_scenario_file(name_or_path);
}

}  // namespace fdia
