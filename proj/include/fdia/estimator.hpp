#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fdia/errors.hpp"
#include "fdia/linear_model.hpp"

namespace fdia {

// Per-link acceptance flags: gamma[i][t] is sensor i's verdict on the payload
// received from topology.neighbors[i][t]. 1 = consume, 0 = exclude. The mask
// is defined exactly on the edges of the topology, nowhere else.
struct InclusionMask {
  std::vector<std::vector<std::uint8_t>> gamma;
};

// Per-link injected signals, aligned with the adjacency the same way.
struct LinkInjections {
  std::vector<std::vector<Eigen::VectorXd>> z;
};

inline InclusionMask all_ones_mask(const Topology& topo) {
  InclusionMask m;
  m.gamma.resize(topo.neighbors.size());
  for (int i = 1; i <= topo.sensor_count; ++i)
    m.gamma[i].assign(topo.neighbors[i].size(), std::uint8_t{1});
  return m;
}

inline LinkInjections zero_injections(const Topology& topo, int state_dim) {
  LinkInjections inj;
  inj.z.resize(topo.neighbors.size());
  for (int i = 1; i <= topo.sensor_count; ++i)
    inj.z[i].assign(topo.neighbors[i].size(), Eigen::VectorXd::Zero(state_dim));
  return inj;
}

inline void require_link_shape(const Topology& topo, std::size_t outer, const char* what) {
  if (outer != topo.neighbors.size())
    throw ProtocolError(std::string(what) + " is not aligned with the topology");
}

// Estimator network state: constant steady-state gains, current estimates
// (both 1-based by sensor id), and the consensus weight lambda.
struct EstimatorState {
  double lambda = 0.0;
  std::vector<Eigen::MatrixXd> gains;
  std::vector<Eigen::VectorXd> estimates;
};

inline std::vector<std::string> validate_lambda(double lambda, const Topology& topo) {
  std::vector<std::string> issues;
  if (!(lambda > 0.0)) {
    issues.push_back("consensus weight lambda must be > 0");
    return issues;
  }
  for (int i = 1; i <= topo.sensor_count; ++i) {
    int deg = topo.degree(i);
    if (deg > 0 && !(lambda < 1.0 / deg)) {
      issues.push_back("lambda " + std::to_string(lambda) + " violates lambda < 1/|N_i| for sensor " +
                       std::to_string(i) + " with " + std::to_string(deg) + " neighbors");
    }
  }
  return issues;
}

// Steady-state Kalman gain for one sensor from the discrete Riccati fixed
// point: P <- A P A' + Q - A P C' (C P C' + R)^-1 C P A', K = A P C' (...)^-1.
// Divergence (||P|| beyond 1e12) raises SynthesisError naming the sensor.
inline Eigen::MatrixXd synthesize_gain(const SystemModel& model, const SensorModel& sensor) {
  const Eigen::MatrixXd& A = model.A;
  const Eigen::MatrixXd& C = sensor.C;
  Eigen::MatrixXd P = model.Q;
  constexpr int kMaxIters = 100000;
  constexpr double kRelTol = 1e-10;
  constexpr double kDivergence = 1e12;
  for (int it = 0; it < kMaxIters; ++it) {
    Eigen::MatrixXd S = C * P * C.transpose() + sensor.R;
    Eigen::MatrixXd G = A * P * C.transpose() * S.inverse();
    Eigen::MatrixXd next = A * P * A.transpose() + model.Q - G * C * P * A.transpose();
    double denom = std::max(1.0, P.norm());
    double rel = (next - P).norm() / denom;
    P = next;
    if (P.norm() > kDivergence)
      throw SynthesisError("gain synthesis diverged for sensor " + std::to_string(sensor.id) +
                           ": Riccati iterate norm exceeded 1e12");
    if (rel < kRelTol) break;
    if (it + 1 == kMaxIters)
      throw SynthesisError("gain synthesis did not converge for sensor " + std::to_string(sensor.id));
  }
  Eigen::MatrixXd S = C * P * C.transpose() + sensor.R;
  return A * P * C.transpose() * S.inverse();
}

// Gains for the whole network, 1-based by sensor id ([0] stays empty).
inline std::vector<Eigen::MatrixXd> synthesize_gains(const SystemModel& model,
                                                     const std::vector<SensorModel>& sensors) {
  std::vector<Eigen::MatrixXd> gains(sensors.size() + 1);
  for (const SensorModel& s : sensors) gains[s.id] = synthesize_gain(model, s);
  return gains;
}

// One update of sensor i's detector-equipped estimate:
//   xhat+ = A xhat + K (y - C xhat) - lambda A sum_j gamma_j (xhat - r_j)
// where r_j is the payload received from neighbor j. received/mask must cover
// exactly the sensor's neighbor list, in sorted neighbor order.
inline Eigen::VectorXd estimator_step(const SystemModel& model, const SensorModel& sensor,
                                      const Eigen::MatrixXd& gain, double lambda,
                                      const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                                      const std::vector<Eigen::VectorXd>& received,
                                      const std::vector<std::uint8_t>& mask) {
  if (received.size() != mask.size())
    throw ProtocolError("sensor " + std::to_string(sensor.id) + ": payload and verdict counts differ");
  Eigen::VectorXd consensus = Eigen::VectorXd::Zero(xhat.size());
  for (std::size_t t = 0; t < received.size(); ++t) {
    if (received[t].size() != xhat.size())
      throw ProtocolError("sensor " + std::to_string(sensor.id) + ": neighbor payload has wrong dimension");
    if (mask[t]) consensus += xhat - received[t];
  }
  return model.A * xhat + gain * (y - sensor.C * xhat) - lambda * (model.A * consensus);
}

// The detector-free companion: every payload is consumed (all gamma = 1).
inline Eigen::VectorXd virtual_estimator_step(const SystemModel& model, const SensorModel& sensor,
                                              const Eigen::MatrixXd& gain, double lambda,
                                              const Eigen::VectorXd& xhat, const Eigen::VectorXd& y,
                                              const std::vector<Eigen::VectorXd>& received) {
  Eigen::VectorXd consensus = Eigen::VectorXd::Zero(xhat.size());
  for (std::size_t t = 0; t < received.size(); ++t) {
    if (received[t].size() != xhat.size())
      throw ProtocolError("sensor " + std::to_string(sensor.id) + ": neighbor payload has wrong dimension");
    consensus += xhat - received[t];
  }
  return model.A * xhat + gain * (y - sensor.C * xhat) - lambda * (model.A * consensus);
}

// Advances every sensor of a network one step. estimates is 1-based; payloads
// are built from the current estimates plus the per-link injections, and each
// sensor applies its row of the inclusion mask.
inline std::vector<Eigen::VectorXd> network_step(const SystemModel& model,
                                                 const std::vector<SensorModel>& sensors,
                                                 const Topology& topo,
                                                 const std::vector<Eigen::MatrixXd>& gains, double lambda,
                                                 const std::vector<Eigen::VectorXd>& estimates,
                                                 const std::vector<Eigen::VectorXd>& measurements,
                                                 const InclusionMask& mask, const LinkInjections& inj) {
  require_link_shape(topo, mask.gamma.size(), "inclusion mask");
  require_link_shape(topo, inj.z.size(), "injection map");
  std::vector<Eigen::VectorXd> next(estimates.size());
  std::vector<Eigen::VectorXd> received;
  for (int i = 1; i <= topo.sensor_count; ++i) {
    const auto& nbrs = topo.neighbors[i];
    if (mask.gamma[i].size() != nbrs.size() || inj.z[i].size() != nbrs.size())
      throw ProtocolError("link data for sensor " + std::to_string(i) + " does not cover its neighbor set");
    received.clear();
    received.reserve(nbrs.size());
    for (std::size_t t = 0; t < nbrs.size(); ++t) received.push_back(estimates[nbrs[t]] + inj.z[i][t]);
    next[i] = estimator_step(model, sensors[i], gains[i], lambda, estimates[i], measurements[i], received,
                             mask.gamma[i]);
  }
  return next;
}

// Attack-effect recursion, kept as an independent code path from the
// estimators so the two can be checked against each other:
//   delta_i+ = (A - K_i C_i) delta_i + lambda A sum_j gamma_ij z_ij
//              - lambda A sum_j gamma_ij (delta_i - delta_j)
inline std::vector<Eigen::VectorXd> delta_step(const SystemModel& model,
                                               const std::vector<SensorModel>& sensors,
                                               const Topology& topo,
                                               const std::vector<Eigen::MatrixXd>& gains, double lambda,
                                               const std::vector<Eigen::VectorXd>& delta,
                                               const InclusionMask& mask, const LinkInjections& inj) {
  require_link_shape(topo, mask.gamma.size(), "inclusion mask");
  require_link_shape(topo, inj.z.size(), "injection map");
  const int n = model.dim();
  std::vector<Eigen::VectorXd> next(delta.size());
  for (int i = 1; i <= topo.sensor_count; ++i) {
    const auto& nbrs = topo.neighbors[i];
    if (mask.gamma[i].size() != nbrs.size() || inj.z[i].size() != nbrs.size())
      throw ProtocolError("link data for sensor " + std::to_string(i) + " does not cover its neighbor set");
    Eigen::VectorXd injected = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd coupling = Eigen::VectorXd::Zero(n);
    for (std::size_t t = 0; t < nbrs.size(); ++t) {
      if (!mask.gamma[i][t]) continue;
      injected += inj.z[i][t];
      coupling += delta[i] - delta[nbrs[t]];
    }
    next[i] = (model.A - gains[i] * sensors[i].C) * delta[i] + lambda * (model.A * injected) -
              lambda * (model.A * coupling);
  }
  return next;
}

// Stacked-form ingredients for the recursion delta+ = F delta + lambda (Y x A) Z.
// Gamma is the signed coupling pattern (off-diagonal +gamma_ij on edges,
// diagonal -sum_j gamma_ij), so F = blockdiag(A - K_i C_i) + lambda (Gamma x A)
// holds as an exact identity; the numerics use the assembled F directly.
struct AugmentedError {
  Eigen::VectorXd delta_xhat;
  Eigen::MatrixXd F;
  Eigen::MatrixXd Gamma;
};

inline AugmentedError assemble_F(const SystemModel& model, const std::vector<SensorModel>& sensors,
                                 const Topology& topo, const std::vector<Eigen::MatrixXd>& gains,
                                 double lambda, const InclusionMask& mask) {
  require_link_shape(topo, mask.gamma.size(), "inclusion mask");
  const int n = model.dim();
  const int N = topo.sensor_count;
  AugmentedError out;
  out.delta_xhat = Eigen::VectorXd::Zero(n * N);
  out.F = Eigen::MatrixXd::Zero(n * N, n * N);
  out.Gamma = Eigen::MatrixXd::Zero(N, N);
  for (int i = 1; i <= N; ++i) {
    const auto& nbrs = topo.neighbors[i];
    if (mask.gamma[i].size() != nbrs.size())
      throw ProtocolError("inclusion mask for sensor " + std::to_string(i) + " does not cover its neighbor set");
    double accepted = 0.0;
    for (std::size_t t = 0; t < nbrs.size(); ++t) {
      const int j = nbrs[t];
      const double g = mask.gamma[i][t] ? 1.0 : 0.0;
      accepted += g;
      out.F.block((i - 1) * n, (j - 1) * n, n, n) = lambda * g * model.A;
      out.Gamma(i - 1, j - 1) = g;
    }
    out.F.block((i - 1) * n, (i - 1) * n, n, n) =
        model.A - gains[i] * sensors[i].C - lambda * accepted * model.A;
    out.Gamma(i - 1, i - 1) = -accepted;
  }
  return out;
}

// lambda (Y x A) Z for the stacked recursion, without materialising the
// Kronecker product: block i equals lambda A sum_j gamma_ij z_ij.
inline Eigen::VectorXd injection_term(const SystemModel& model, const Topology& topo, double lambda,
                                      const InclusionMask& mask, const LinkInjections& inj) {
  const int n = model.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n * topo.sensor_count);
  for (int i = 1; i <= topo.sensor_count; ++i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (std::size_t t = 0; t < topo.neighbors[i].size(); ++t)
      if (mask.gamma[i][t]) acc += inj.z[i][t];
    out.segment((i - 1) * n, n) = lambda * (model.A * acc);
  }
  return out;
}

inline Eigen::VectorXd stack_deltas(const std::vector<Eigen::VectorXd>& delta, int sensor_count, int n) {
  Eigen::VectorXd out(n * sensor_count);
  for (int i = 1; i <= sensor_count; ++i) out.segment((i - 1) * n, n) = delta[i];
  return out;
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral radius needs a square matrix");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace fdia
