#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "fdia/random.hpp"

namespace fdia {

// Stochastic residual test: a payload is rejected when the residual norm
// exceeds upsilon * xi with xi ~ Exp(1), i.e. with probability
// 1 - exp(-upsilon_inv * residual). One xi per sensor per step is shared
// across that sensor's link tests.
struct DetectorConfig {
  double upsilon_inv = 0.5;
};

// Closed-form rejection probability for a given residual norm.
inline double flag_probability(const DetectorConfig& cfg, double residual_norm) {
  if (!(cfg.upsilon_inv > 0.0)) throw std::invalid_argument("detector needs upsilon_inv > 0");
  if (!(residual_norm >= 0.0)) throw std::invalid_argument("residual norm must be >= 0");
  return 1.0 - std::exp(-cfg.upsilon_inv * residual_norm);
}

// Verdict for one link given the sensor's exponential draw for this step.
// Returns 1 (consume) when ||xhat - received|| <= upsilon * xi, else 0.
inline int detect_with_draw(const DetectorConfig& cfg, const Eigen::VectorXd& xhat,
                            const Eigen::VectorXd& received, double xi) {
  if (!(cfg.upsilon_inv > 0.0)) throw std::invalid_argument("detector needs upsilon_inv > 0");
  if (xhat.size() != received.size()) throw std::invalid_argument("estimate/payload dimension mismatch");
  if (!(xi >= 0.0)) throw std::invalid_argument("exponential draw must be >= 0");
  const double residual = (xhat - received).norm();
  return residual * cfg.upsilon_inv <= xi ? 1 : 0;
}

// Convenience overload that draws xi itself.
inline int detect(const DetectorConfig& cfg, const Eigen::VectorXd& xhat, const Eigen::VectorXd& received,
                  RngStream& rng) {
  return detect_with_draw(cfg, xhat, received, rng.exponential1());
}

}  // namespace fdia
