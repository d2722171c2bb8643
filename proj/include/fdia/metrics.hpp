#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace fdia {

// f(A_selected) / f(A_optimal) for one (sensor, step). Both zero means there
// was nothing to gain, which counts as a perfect step. A selected value above
// the oracle's (beyond fp slack) can only be an oracle bug and is fatal.
inline double optimization_rate(double f_selected, double f_optimal) {
  if (!(f_selected >= 0.0) || !(f_optimal >= 0.0))
    throw std::invalid_argument("objective values must be >= 0");
  if (f_selected > f_optimal + 1e-9)
    throw std::logic_error("selected objective exceeds the exhaustive optimum: oracle invariant violated");
  if (f_optimal == 0.0) return 1.0;
  return std::min(f_selected / f_optimal, 1.0);
}

struct RegretResult {
  double lhs = 0.0;  // (1 - 1/e) sum f(A*) - sum f(A)
  double rhs = 0.0;  // 2 sqrt(qT (2(Delta_T + q ln(|N|T)) + q ln T))
};

// Cumulative (1 - 1/e)-regret of a selection series against the per-step
// optimum, with its sublinear bound. Series must be aligned per step;
// neighborhood_size is |N_i| of the sensor the series belongs to.
inline RegretResult regret_and_bound(const std::vector<double>& f_optimal_series,
                                     const std::vector<double>& f_selected_series, int q,
                                     int neighborhood_size, int delta_T) {
  if (f_optimal_series.size() != f_selected_series.size())
    throw std::invalid_argument("regret series must have equal length");
  if (f_optimal_series.empty()) throw std::invalid_argument("regret series must be non-empty");
  if (q < 1 || neighborhood_size < 1 || delta_T < 0)
    throw std::invalid_argument("regret parameters out of range");
  const double T = static_cast<double>(f_optimal_series.size());
  double sum_opt = 0.0, sum_sel = 0.0;
  for (double v : f_optimal_series) sum_opt += v;
  for (double v : f_selected_series) sum_sel += v;
  RegretResult r;
  r.lhs = (1.0 - 1.0 / std::exp(1.0)) * sum_opt - sum_sel;
  const double inner = 2.0 * (delta_T + q * std::log(neighborhood_size * T)) + q * std::log(T);
  r.rhs = 2.0 * std::sqrt(q * T * inner);
  return r;
}

// False-negative / false-positive rates from link-step counts. A missing
// denominator yields an empty optional, never a 0/0.
struct FnFpResult {
  std::optional<double> fn;
  std::optional<double> fp;
  long attacked = 0;       // attacked link-steps
  long missed = 0;         // attacked link-steps that were not flagged
  long clean = 0;          // benign link-steps
  long false_flagged = 0;  // benign link-steps that were flagged
};

inline FnFpResult fn_fp_from_counts(long attacked, long missed, long clean, long false_flagged) {
  if (attacked < 0 || clean < 0 || missed < 0 || false_flagged < 0 || missed > attacked ||
      false_flagged > clean)
    throw std::invalid_argument("inconsistent link-step counts");
  FnFpResult r;
  r.attacked = attacked;
  r.missed = missed;
  r.clean = clean;
  r.false_flagged = false_flagged;
  if (attacked > 0) r.fn = static_cast<double>(missed) / static_cast<double>(attacked);
  if (clean > 0) r.fp = static_cast<double>(false_flagged) / static_cast<double>(clean);
  return r;
}

// RMSE(k) = sqrt( (1/Z) sum_z ||e(k, z)||^2 ) where e(k, z) is the
// across-sensor mean of the signed estimate errors of run z at step k.
inline std::vector<double> rmse_curve(const std::vector<std::vector<Eigen::VectorXd>>& e_by_run) {
  if (e_by_run.empty()) throw std::invalid_argument("rmse needs at least one run");
  const std::size_t T = e_by_run.front().size();
  std::vector<double> out(T, 0.0);
  for (const auto& run : e_by_run) {
    if (run.size() != T) throw std::invalid_argument("rmse runs must share the horizon");
    for (std::size_t k = 0; k < T; ++k) out[k] += run[k].squaredNorm();
  }
  const double Z = static_cast<double>(e_by_run.size());
  for (double& v : out) v = std::sqrt(v / Z);
  return out;
}

}  // namespace fdia
