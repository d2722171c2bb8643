#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdia/attack.hpp"
#include "fdia/errors.hpp"
#include "fdia/estimator.hpp"
#include "fdia/linear_model.hpp"

namespace fdia {

struct SchedulerConfig {
  double beta = 0.5;
  std::string mode = "both";  // sampled | sorted | both
};

struct RunConfig {
  int horizon = 100;
  int runs = 20;
  std::uint64_t master_seed = 1;
};

// Fully resolved experiment description. Sensors, detector thresholds and
// adjacency are 1-based by sensor id (index 0 is a placeholder).
struct Scenario {
  std::string name = "custom";
  SystemModel model;
  Eigen::VectorXd x0;
  double lambda = 0.1;
  std::vector<SensorModel> sensors;
  Topology topology;
  AttackSchedule attacks;
  SchedulerConfig scheduler;
  std::vector<double> upsilon_inv;
  RunConfig run;

  int state_dim() const { return model.dim(); }
  // Per-sensor selection budget: half the neighborhood, rounded down.
  int q_of(int i) const { return topology.degree(i) / 2; }
};

inline std::vector<std::string> validate_scenario(const Scenario& sc) {
  std::vector<std::string> issues;
  auto absorb = [&issues](std::vector<std::string> more) {
    issues.insert(issues.end(), more.begin(), more.end());
  };
  absorb(validate_system(sc.model));
  const int n = sc.model.A.rows() == sc.model.A.cols() ? sc.model.dim() : -1;
  if (sc.x0.size() != n) issues.push_back("initial state x0 does not match the state dimension");
  absorb(validate_topology(sc.topology));
  const int N = sc.topology.sensor_count;
  if (static_cast<int>(sc.sensors.size()) != N + 1) {
    issues.push_back("sensor list does not cover sensors 1.." + std::to_string(N));
  } else {
    for (int i = 1; i <= N; ++i) {
      if (sc.sensors[i].id != i) {
        issues.push_back("sensor at position " + std::to_string(i) + " carries id " +
                         std::to_string(sc.sensors[i].id));
        continue;
      }
      if (n > 0) absorb(validate_sensor(sc.sensors[i], n));
    }
  }
  absorb(validate_lambda(sc.lambda, sc.topology));
  absorb(validate_schedule(sc.attacks, sc.topology));
  if (static_cast<int>(sc.upsilon_inv.size()) != N + 1) {
    issues.push_back("detector threshold list does not cover sensors 1.." + std::to_string(N));
  } else {
    for (int i = 1; i <= N; ++i)
      if (!(sc.upsilon_inv[i] > 0.0) || !std::isfinite(sc.upsilon_inv[i]))
        issues.push_back("sensor " + std::to_string(i) + ": upsilon_inv must be finite and > 0");
  }
  if (!(sc.scheduler.beta >= 0.0 && sc.scheduler.beta <= 1.0))
    issues.push_back("scheduler beta must lie in [0, 1]");
  if (sc.scheduler.mode != "sampled" && sc.scheduler.mode != "sorted" && sc.scheduler.mode != "both")
    issues.push_back("scheduler mode must be one of sampled, sorted, both");
  if (sc.run.horizon < 1) issues.push_back("run horizon must be >= 1");
  if (sc.run.runs < 1) issues.push_back("run count must be >= 1");
  for (const auto& iv : sc.attacks.intervals)
    if (iv.end > sc.run.horizon)
      issues.push_back("attack interval ending at step " + std::to_string(iv.end) +
                       " extends past the horizon " + std::to_string(sc.run.horizon));
  return issues;
}

namespace detail {

inline Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const std::string& what,
                                    std::vector<std::string>& issues) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    issues.push_back(what + " must be a non-empty array of rows");
    return {};
  }
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      issues.push_back(what + " has ragged rows");
      return {};
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        issues.push_back(what + " contains a non-numeric entry");
        return {};
      }
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline Eigen::VectorXd parse_vector(const nlohmann::json& j, const std::string& what,
                                    std::vector<std::string>& issues) {
  if (!j.is_array() || j.empty()) {
    issues.push_back(what + " must be a non-empty array");
    return {};
  }
  Eigen::VectorXd v(j.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_number()) {
      issues.push_back(what + " contains a non-numeric entry");
      return {};
    }
    v[r] = j[r].get<double>();
  }
  return v;
}

// C row of the tank-reactor sensor family: [0, 0.1 + 1/i].
inline Eigen::MatrixXd cstr_c_row(int id) {
  Eigen::MatrixXd c(1, 2);
  c << 0.0, 0.1 + 1.0 / static_cast<double>(id);
  return c;
}

}  // namespace detail

// Parses a scenario from its JSON description, collecting every structural
// problem instead of stopping at the first.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  std::vector<std::string> issues;
  Scenario sc;
  sc.name = j.value("name", std::string("custom"));

  if (!j.contains("model") || !j["model"].is_object()) {
    issues.push_back("missing object section: model");
  } else {
    const auto& jm = j["model"];
    if (jm.contains("A")) sc.model.A = detail::parse_matrix(jm["A"], "model.A", issues);
    else issues.push_back("model.A is required");
    if (jm.contains("Q")) sc.model.Q = detail::parse_matrix(jm["Q"], "model.Q", issues);
    else issues.push_back("model.Q is required");
    sc.model.omega_bound = jm.value("omega_bound", 0.0);
    sc.lambda = jm.value("lambda", 0.1);
    if (jm.contains("x0")) sc.x0 = detail::parse_vector(jm["x0"], "model.x0", issues);
    else if (sc.model.A.rows() > 0) sc.x0 = Eigen::VectorXd::Zero(sc.model.A.rows());

    if (!jm.contains("sensors")) {
      issues.push_back("model.sensors is required");
    } else if (jm["sensors"].is_object()) {
      const auto& js = jm["sensors"];
      const int count = js.value("count", 0);
      const std::string family = js.value("family", std::string("cstr"));
      if (count < 1) issues.push_back("model.sensors.count must be >= 1");
      if (family != "cstr") issues.push_back("unknown sensor family: " + family);
      const double r = js.value("R", 0.5);
      const double nu = js.value("nu_bound", 0.05);
      sc.sensors.assign(static_cast<std::size_t>(std::max(count, 0)) + 1, SensorModel{});
      for (int i = 1; i <= count; ++i) {
        SensorModel s;
        s.id = i;
        s.C = detail::cstr_c_row(i);
        s.R = Eigen::MatrixXd::Constant(1, 1, r);
        s.nu_bound = nu;
        sc.sensors[i] = s;
      }
    } else if (jm["sensors"].is_array()) {
      const auto& js = jm["sensors"];
      sc.sensors.assign(js.size() + 1, SensorModel{});
      for (std::size_t t = 0; t < js.size(); ++t) {
        SensorModel s;
        s.id = js[t].value("id", static_cast<int>(t) + 1);
        if (js[t].contains("C")) s.C = detail::parse_matrix(js[t]["C"], "sensor C", issues);
        if (js[t].contains("R")) s.R = detail::parse_matrix(js[t]["R"], "sensor R", issues);
        s.nu_bound = js[t].value("nu_bound", 0.0);
        if (js[t].contains("position") && js[t]["position"].is_array() && js[t]["position"].size() == 2)
          s.position = Eigen::Vector2d(js[t]["position"][0].get<double>(), js[t]["position"][1].get<double>());
        if (s.id >= 1 && s.id < static_cast<int>(sc.sensors.size())) sc.sensors[s.id] = s;
        else issues.push_back("sensor id " + std::to_string(s.id) + " outside 1..count");
      }
    } else {
      issues.push_back("model.sensors must be an object or an array");
    }
  }

  const int N = std::max(static_cast<int>(sc.sensors.size()) - 1, 0);
  if (!j.contains("topology") || !j["topology"].is_object()) {
    issues.push_back("missing object section: topology");
  } else {
    const auto& jt = j["topology"];
    try {
      if (jt.contains("edges")) {
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : jt["edges"]) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            issues.push_back("topology.edges entries must be integer pairs");
            continue;
          }
          edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        sc.topology = make_topology(N, edges);
      } else if (jt.contains("geometric")) {
        const double radius = jt["geometric"].value("radius", 0.0);
        std::vector<Eigen::Vector2d> positions;
        for (int i = 1; i <= N; ++i) positions.push_back(sc.sensors[i].position);
        sc.topology = build_geometric_topology(positions, radius);
      } else {
        issues.push_back("topology needs either an edges list or a geometric radius");
      }
    } catch (const ConfigError& e) {
      issues.insert(issues.end(), e.issues().begin(), e.issues().end());
      sc.topology.sensor_count = N;
      sc.topology.neighbors.assign(static_cast<std::size_t>(N) + 1, {});
    }
  }
  if (sc.topology.sensor_count == 0) {
    sc.topology.sensor_count = N;
    sc.topology.neighbors.assign(static_cast<std::size_t>(N) + 1, {});
  }

  if (!j.contains("attacks") || !j["attacks"].is_object()) {
    issues.push_back("missing object section: attacks");
  } else {
    const auto& ja = j["attacks"];
    if (ja.contains("families") && ja["families"].is_array()) {
      for (const auto& jf : ja["families"]) {
        const std::string kind = jf.value("kind", std::string("unstealthy"));
        SignalFamily f = (kind == "stealthy") ? SignalFamily::stealthy_default()
                                              : SignalFamily::unstealthy_default();
        if (kind != "stealthy" && kind != "unstealthy")
          issues.push_back("unknown signal family kind: " + kind);
        f.amplitude_low = jf.value("amplitude_low", f.amplitude_low);
        f.amplitude_high = jf.value("amplitude_high", f.amplitude_high);
        f.z_tilde = jf.value("z_tilde", f.z_tilde);
        f.active_fraction = jf.value("active_fraction", f.active_fraction);
        f.quiet_high = jf.value("quiet_high", f.quiet_high);
        sc.attacks.families.push_back(f);
      }
    }
    if (sc.attacks.families.empty()) sc.attacks.families.push_back(SignalFamily::unstealthy_default());
    if (ja.contains("intervals") && ja["intervals"].is_array()) {
      for (const auto& ji : ja["intervals"]) {
        AttackInterval iv;
        iv.start = ji.value("start", 0);
        iv.end = ji.value("end", 0);
        iv.family = ji.value("family", 0);
        if (ji.contains("links") && ji["links"].is_array()) {
          for (const auto& l : ji["links"]) {
            if (!l.is_array() || l.size() != 2 || !l[0].is_number_integer() || !l[1].is_number_integer()) {
              issues.push_back("attack links must be [receiver, sender] integer pairs");
              continue;
            }
            iv.links.push_back(DirectedLink{l[0].get<int>(), l[1].get<int>()});
          }
        }
        sc.attacks.intervals.push_back(iv);
      }
    }
  }

  if (j.contains("scheduler") && j["scheduler"].is_object()) {
    sc.scheduler.beta = j["scheduler"].value("beta", 0.5);
    sc.scheduler.mode = j["scheduler"].value("mode", std::string("both"));
  }

  sc.upsilon_inv.assign(static_cast<std::size_t>(N) + 1, 0.5);
  if (j.contains("detector") && j["detector"].is_object()) {
    const auto& jd = j["detector"];
    if (jd.contains("upsilon_inv")) {
      if (jd["upsilon_inv"].is_number()) {
        const double u = jd["upsilon_inv"].get<double>();
        for (int i = 1; i <= N; ++i) sc.upsilon_inv[i] = u;
      } else if (jd["upsilon_inv"].is_array()) {
        if (static_cast<int>(jd["upsilon_inv"].size()) != N) {
          issues.push_back("detector.upsilon_inv array must list one value per sensor");
        } else {
          for (int i = 1; i <= N; ++i) sc.upsilon_inv[i] = jd["upsilon_inv"][i - 1].get<double>();
        }
      } else {
        issues.push_back("detector.upsilon_inv must be a number or an array");
      }
    }
  }

  if (j.contains("run") && j["run"].is_object()) {
    sc.run.horizon = j["run"].value("horizon", 100);
    sc.run.runs = j["run"].value("runs", 20);
    sc.run.master_seed = j["run"].value("master_seed", std::uint64_t{1});
  } else {
    issues.push_back("missing object section: run");
  }

  auto semantic = validate_scenario(sc);
  issues.insert(issues.end(), semantic.begin(), semantic.end());
  if (!issues.empty()) throw ConfigError(issues);
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario file " + path + " is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

// Resolved scenario dump: everything a rerun needs, in the same layout the
// loader accepts.
inline nlohmann::json scenario_manifest(const Scenario& sc) {
  nlohmann::json j;
  j["name"] = sc.name;
  nlohmann::json jm;
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  jm["A"] = mat(sc.model.A);
  jm["Q"] = mat(sc.model.Q);
  jm["omega_bound"] = sc.model.omega_bound;
  jm["lambda"] = sc.lambda;
  nlohmann::json jx = nlohmann::json::array();
  for (Eigen::Index r = 0; r < sc.x0.size(); ++r) jx.push_back(sc.x0[r]);
  jm["x0"] = jx;
  nlohmann::json sensors = nlohmann::json::array();
  for (std::size_t i = 1; i < sc.sensors.size(); ++i) {
    const SensorModel& s = sc.sensors[i];
    nlohmann::json js;
    js["id"] = s.id;
    js["C"] = mat(s.C);
    js["R"] = mat(s.R);
    js["nu_bound"] = s.nu_bound;
    js["position"] = {s.position.x(), s.position.y()};
    sensors.push_back(js);
  }
  jm["sensors"] = sensors;
  j["model"] = jm;

  nlohmann::json edges = nlohmann::json::array();
  for (int i = 1; i <= sc.topology.sensor_count; ++i)
    for (int nb : sc.topology.neighbors[i])
      if (i < nb) edges.push_back({i, nb});
  j["topology"] = {{"edges", edges}};

  nlohmann::json families = nlohmann::json::array();
  for (const auto& f : sc.attacks.families) {
    nlohmann::json jf;
    jf["kind"] = f.name;
    jf["amplitude_low"] = f.amplitude_low;
    jf["amplitude_high"] = f.amplitude_high;
    if (std::isfinite(f.z_tilde)) jf["z_tilde"] = f.z_tilde;
    jf["active_fraction"] = f.active_fraction;
    jf["quiet_high"] = f.quiet_high;
    families.push_back(jf);
  }
  nlohmann::json intervals = nlohmann::json::array();
  for (const auto& iv : sc.attacks.intervals) {
    nlohmann::json ji;
    ji["start"] = iv.start;
    ji["end"] = iv.end;
    ji["family"] = iv.family;
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : iv.links) links.push_back({l.receiver, l.sender});
    ji["links"] = links;
    intervals.push_back(ji);
  }
  j["attacks"] = {{"families", families}, {"intervals", intervals}};
  j["scheduler"] = {{"beta", sc.scheduler.beta}, {"mode", sc.scheduler.mode}};
  nlohmann::json ups = nlohmann::json::array();
  for (int i = 1; i <= sc.topology.sensor_count; ++i) ups.push_back(sc.upsilon_inv[i]);
  j["detector"] = {{"upsilon_inv", ups}};
  j["run"] = {{"horizon", sc.run.horizon}, {"runs", sc.run.runs}, {"master_seed", sc.run.master_seed}};
  return j;
}

}  // namespace fdia
