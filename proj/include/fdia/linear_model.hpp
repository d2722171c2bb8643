#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fdia/errors.hpp"
#include "fdia/random.hpp"

namespace fdia {

using StateVector = Eigen::VectorXd;

// Process model x(k+1) = A x(k) + omega(k), omega ~ N(0, Q) truncated to
// ||omega|| <= omega_bound. omega_bound == 0 means a noise-free plant.
struct SystemModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Q;
  double omega_bound = 0.0;

  int dim() const { return static_cast<int>(A.rows()); }
};

// Sensor i: y_i(k) = C_i x(k) + nu_i(k), nu_i ~ N(0, R_i) truncated to
// ||nu_i|| <= nu_bound. Position is only used for geometric topologies.
struct SensorModel {
  int id = 0;
  Eigen::MatrixXd C;
  Eigen::MatrixXd R;
  double nu_bound = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

// Undirected communication graph over sensors 1..sensor_count.
// neighbors[i] holds the sorted neighbor ids of sensor i; index 0 is unused.
struct Topology {
  int sensor_count = 0;
  std::vector<std::vector<int>> neighbors;

  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
  bool has_edge(int i, int j) const {
    const auto& n = neighbors[i];
    return std::binary_search(n.begin(), n.end(), j);
  }
  int max_degree() const {
    int d = 0;
    for (int i = 1; i <= sensor_count; ++i) d = std::max(d, degree(i));
    return d;
  }
  // Index of neighbor j within neighbors[i]; -1 if absent.
  int neighbor_index(int i, int j) const {
    const auto& n = neighbors[i];
    auto it = std::lower_bound(n.begin(), n.end(), j);
    if (it == n.end() || *it != j) return -1;
    return static_cast<int>(it - n.begin());
  }
};

inline bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

inline std::vector<std::string> validate_system(const SystemModel& m) {
  std::vector<std::string> issues;
  if (m.A.rows() == 0 || m.A.rows() != m.A.cols())
    issues.push_back("system matrix A must be square and non-empty");
  if (m.Q.rows() != m.A.rows() || !is_spd(m.Q))
    issues.push_back("process covariance Q must be symmetric positive definite with the state dimension");
  if (!(m.omega_bound >= 0.0))
    issues.push_back("process noise bound must be >= 0");
  return issues;
}

inline std::vector<std::string> validate_sensor(const SensorModel& s, int state_dim) {
  std::vector<std::string> issues;
  const std::string tag = "sensor " + std::to_string(s.id);
  if (s.id < 1) issues.push_back(tag + ": id must be >= 1");
  if (s.C.cols() != state_dim || s.C.rows() < 1)
    issues.push_back(tag + ": C must have " + std::to_string(state_dim) + " columns and at least one row");
  if (s.R.rows() != s.C.rows() || !is_spd(s.R))
    issues.push_back(tag + ": R must be symmetric positive definite matching the measurement dimension");
  if (!(s.nu_bound >= 0.0)) issues.push_back(tag + ": measurement noise bound must be >= 0");
  return issues;
}

// Builds a Topology from an undirected edge list, rejecting self-loops,
// out-of-range ids, and duplicate edges.
inline Topology make_topology(int sensor_count, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::string> issues;
  if (sensor_count < 1) issues.push_back("sensor count must be >= 1");
  Topology topo;
  topo.sensor_count = sensor_count;
  topo.neighbors.assign(static_cast<std::size_t>(sensor_count) + 1, {});
  for (const auto& [a, b] : edges) {
    if (a == b) {
      issues.push_back("self-loop on sensor " + std::to_string(a));
      continue;
    }
    if (a < 1 || a > sensor_count || b < 1 || b > sensor_count) {
      issues.push_back("edge (" + std::to_string(a) + "," + std::to_string(b) + ") references a sensor outside 1.." +
                       std::to_string(sensor_count));
      continue;
    }
    topo.neighbors[a].push_back(b);
    topo.neighbors[b].push_back(a);
  }
  for (int i = 1; i <= sensor_count && issues.empty(); ++i) {
    auto& n = topo.neighbors[i];
    std::sort(n.begin(), n.end());
    if (std::adjacent_find(n.begin(), n.end()) != n.end())
      issues.push_back("duplicate edge incident to sensor " + std::to_string(i));
  }
  if (!issues.empty()) throw ConfigError(issues);
  return topo;
}

inline std::vector<std::string> validate_topology(const Topology& t) {
  std::vector<std::string> issues;
  if (t.sensor_count < 1) issues.push_back("sensor count must be >= 1");
  if (t.neighbors.size() != static_cast<std::size_t>(t.sensor_count) + 1) {
    issues.push_back("adjacency size does not match sensor count");
    return issues;
  }
  for (int i = 1; i <= t.sensor_count; ++i) {
    const auto& n = t.neighbors[i];
    if (!std::is_sorted(n.begin(), n.end()))
      issues.push_back("neighbor list of sensor " + std::to_string(i) + " is not sorted");
    for (int j : n) {
      if (j < 1 || j > t.sensor_count)
        issues.push_back("sensor " + std::to_string(i) + " lists neighbor " + std::to_string(j) + " outside 1.." +
                         std::to_string(t.sensor_count));
      else if (j == i)
        issues.push_back("sensor " + std::to_string(i) + " lists itself as a neighbor");
      // linear scan: the list under inspection may be unsorted, which has_edge cannot handle
      else if (std::find(t.neighbors[j].begin(), t.neighbors[j].end(), i) == t.neighbors[j].end())
        issues.push_back("edge (" + std::to_string(i) + "," + std::to_string(j) + ") is not symmetric");
    }
  }
  return issues;
}

// Norm-truncated Gaussian sampler. The Cholesky factor is cached so hot loops
// do not refactor the covariance on every draw.
class BoundedGaussianSampler {
 public:
  BoundedGaussianSampler(const Eigen::MatrixXd& cov, double bound) : bound_(bound) {
    if (!(bound > 0.0)) throw std::invalid_argument("norm bound must be > 0");
    if (!is_spd(cov)) throw std::invalid_argument("covariance must be symmetric positive definite");
    chol_ = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  }

  Eigen::VectorXd sample(RngStream& rng) const {
    Eigen::VectorXd g(chol_.rows());
    for (long attempt = 0; attempt < kMaxRejections; ++attempt) {
      for (int i = 0; i < g.size(); ++i) g[i] = rng.gaussian();
      Eigen::VectorXd draw = chol_ * g;
      if (!std::isfinite(bound_) || draw.norm() <= bound_) return draw;
    }
    throw SamplingError("bounded Gaussian sampler exhausted " + std::to_string(kMaxRejections) +
                        " rejections; bound " + std::to_string(bound_) + " is too tight for the covariance");
  }

  static constexpr long kMaxRejections = 1000000;

 private:
  Eigen::MatrixXd chol_;
  double bound_;
};

// One-off draw from N(0, cov) conditioned on ||draw|| <= bound.
inline Eigen::VectorXd sample_bounded_gaussian(const Eigen::MatrixXd& cov, double bound, RngStream& rng) {
  return BoundedGaussianSampler(cov, bound).sample(rng);
}

// x(k+1) = A x(k) + omega(k).
inline StateVector step_state(const SystemModel& model, const StateVector& x, RngStream& rng) {
  if (x.size() != model.dim()) throw std::invalid_argument("state dimension mismatch");
  if (model.omega_bound == 0.0) return model.A * x;
  return model.A * x + sample_bounded_gaussian(model.Q, model.omega_bound, rng);
}

// y_i(k) = C_i x(k) + nu_i(k).
inline Eigen::VectorXd measure(const SensorModel& sensor, const StateVector& x, RngStream& rng) {
  if (x.size() != sensor.C.cols()) throw std::invalid_argument("state dimension mismatch");
  if (sensor.nu_bound == 0.0) return sensor.C * x;
  return sensor.C * x + sample_bounded_gaussian(sensor.R, sensor.nu_bound, rng);
}

// Connects every pair of sensors within communication radius of each other.
// positions[i-1] is the location of sensor i.
inline Topology build_geometric_topology(const std::vector<Eigen::Vector2d>& positions, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("communication radius must be >= 0");
  const int n = static_cast<int>(positions.size());
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      if ((positions[i - 1] - positions[j - 1]).norm() <= radius) edges.emplace_back(i, j);
  return make_topology(n, edges);
}

}  // namespace fdia
