#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdia/errors.hpp"
#include "fdia/random.hpp"

namespace fdia {

// Per-step view of one sensor's neighborhood: entries[t] is the residual norm
// d_j = ||xhat_i - payload_j|| for neighbor neighbors[t]. Neighbor ids are
// sorted and entries are finite and non-negative.
struct ErrorSummary {
  int sensor = 0;
  int step = 0;
  std::vector<int> neighbors;
  std::vector<double> entries;
};

// Result of one selection round: the (sorted) suspicious neighbor ids.
struct SuspiciousSet {
  std::vector<int> members;
};

// Multiplicative-weights memory carried across steps for one sensor.
// W accumulates exp(-1/k) * v_first per neighbor; history_count is the number
// of completed steps folded into W. v_first keeps the most recent first-round
// weights for inspection.
struct ExpertState {
  double beta = 0.5;
  std::vector<int> neighbors;
  std::vector<double> W;
  std::vector<double> v_first;
  int history_count = 0;

  static ExpertState make(double beta, const std::vector<int>& neighbors) {
    ExpertState s;
    s.beta = beta;
    s.neighbors = neighbors;
    s.W.assign(neighbors.size(), 0.0);
    s.v_first.assign(neighbors.size(), 0.0);
    return s;
  }
};

enum class SelectionMode { kSampled, kSorted };

namespace detail {

inline int summary_index(const ErrorSummary& summary, int member) {
  auto it = std::lower_bound(summary.neighbors.begin(), summary.neighbors.end(), member);
  if (it == summary.neighbors.end() || *it != member)
    throw std::invalid_argument("neighbor " + std::to_string(member) + " is not in the neighborhood of sensor " +
                                std::to_string(summary.sensor));
  return static_cast<int>(it - summary.neighbors.begin());
}

// exp with a clamped argument so pathological residual scales cannot produce
// inf weights and NaN probabilities downstream.
inline double safe_exp(double x) { return std::exp(std::min(x, 700.0)); }

}  // namespace detail

inline void validate_summary(const ErrorSummary& summary) {
  if (summary.neighbors.size() != summary.entries.size())
    throw std::invalid_argument("error summary has mismatched neighbor/entry counts");
  if (!std::is_sorted(summary.neighbors.begin(), summary.neighbors.end()))
    throw std::invalid_argument("error summary neighbors must be sorted");
  for (double d : summary.entries)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw std::invalid_argument("error summary entries must be finite and >= 0");
}

// f(A) = sqrt(sum_{j in A} d_j^2): monotone and submodular, so the greedy
// chain and the exhaustive optimum coincide for this separable form.
inline double objective(const ErrorSummary& summary, const std::vector<int>& members) {
  double sum = 0.0;
  for (int m : members) {
    const double d = summary.entries[detail::summary_index(summary, m)];
    sum += d * d;
  }
  return std::sqrt(sum);
}

// f(base U {j}) - f(base); non-negative by monotonicity.
inline double marginal_gain(const ErrorSummary& summary, const std::vector<int>& base, int j) {
  for (int m : base)
    if (m == j) throw std::invalid_argument("candidate already belongs to the base set");
  std::vector<int> extended = base;
  extended.push_back(j);
  return objective(summary, extended) - objective(summary, base);
}

struct SelectionResult {
  SuspiciousSet set;
  int evaluations = 0;  // objective evaluations spent; hard-capped at q * |N_i|
};

// Sequential suspicious-neighbor selection with expert-weighted history.
//
// Each step runs exactly q rounds. Round weights start at w = 1. For every
// still-unselected neighbor j the round computes the (non-positive) gain
// difference G = f(A) - f(A U {j}) and the evidence weight
// v_j = w_j * exp(-G). With beta = 0 the round weight is v_j alone; otherwise
// it is beta * W_j / (k - 1) + (1 - beta) * v_j, with the historical term
// defined as 0 at the first step. Sampled mode draws the round's pick from
// the normalized weights over unselected neighbors; sorted mode takes the
// argmax with ties resolved toward the lowest neighbor id. After the q rounds
// the first-round evidence is folded into the history: W_j += exp(-1/k) * v_j.
//
// The objective is evaluated once per (round, unselected neighbor); the value
// of f(A) is carried over from the chosen candidate of the previous round, so
// the total evaluation count is q * |N_i| - q(q-1)/2 <= q * |N_i|, which is
// asserted on every call.
inline SelectionResult select_suspicious(const ErrorSummary& summary, ExpertState& expert, int q,
                                         SelectionMode mode, RngStream& rng) {
  validate_summary(summary);
  const int n = static_cast<int>(summary.neighbors.size());
  if (expert.neighbors != summary.neighbors)
    throw std::invalid_argument("expert state does not match the summary's neighborhood");
  if (q < 1 || q > n / 2)
    throw ConfigError("selection budget q = " + std::to_string(q) + " violates 1 <= q <= floor(" +
                      std::to_string(n) + "/2) for sensor " + std::to_string(summary.sensor));

  const int k = expert.history_count + 1;
  const double beta = expert.beta;
  std::vector<double> w_prev(n, 1.0);
  std::vector<double> w_cur(n, 0.0);
  std::vector<double> v(n, 0.0);
  std::vector<double> f_with(n, 0.0);
  std::vector<char> selected(n, 0);
  std::vector<int> picked;
  picked.reserve(q);

  double base_f = 0.0;  // f of the current candidate set; f(empty) = 0
  int evaluations = 0;
  const int budget = q * n;

  for (int round = 1; round <= q; ++round) {
    for (int t = 0; t < n; ++t) {
      if (selected[t]) continue;
      const double d = summary.entries[t];
      f_with[t] = std::sqrt(base_f * base_f + d * d);
      ++evaluations;
      if (evaluations > budget)
        throw std::logic_error("selection exceeded its objective evaluation budget");
      const double G = base_f - f_with[t];
      v[t] = w_prev[t] * detail::safe_exp(-G);
      if (beta == 0.0) {
        w_cur[t] = v[t];
      } else {
        const double historical = (k == 1) ? 0.0 : expert.W[t] / static_cast<double>(k - 1);
        w_cur[t] = beta * historical + (1.0 - beta) * v[t];
      }
    }
    if (round == 1) expert.v_first = v;

    int pick = -1;
    if (mode == SelectionMode::kSorted) {
      double best = -std::numeric_limits<double>::infinity();
      for (int t = 0; t < n; ++t) {
        if (selected[t]) continue;
        if (w_cur[t] > best) {  // strict: ties keep the lowest neighbor id
          best = w_cur[t];
          pick = t;
        }
      }
    } else {
      double total = 0.0;
      for (int t = 0; t < n; ++t)
        if (!selected[t]) total += w_cur[t];
      const double u = rng.uniform01();
      if (!(total > 0.0) || !std::isfinite(total)) {
        // Degenerate weights (e.g. beta = 1 at the first step): uniform draw.
        const int remaining = n - round + 1;
        int target = std::min(remaining - 1, static_cast<int>(u * remaining));
        for (int t = 0; t < n; ++t) {
          if (selected[t]) continue;
          pick = t;
          if (target-- == 0) break;
        }
      } else {
        double acc = 0.0;
        const double threshold = u * total;
        for (int t = 0; t < n; ++t) {
          if (selected[t]) continue;
          acc += w_cur[t];
          pick = t;
          if (acc >= threshold) break;
        }
      }
    }
    selected[pick] = 1;
    picked.push_back(summary.neighbors[pick]);
    base_f = f_with[pick];
    w_prev = w_cur;
  }

  const int expected = q * n - q * (q - 1) / 2;
  if (evaluations != expected || evaluations > budget)
    throw std::logic_error("selection evaluation count deviated from q*|N| - q(q-1)/2");

  const double fold = std::exp(-1.0 / static_cast<double>(k));
  for (int t = 0; t < n; ++t) expert.W[t] += fold * expert.v_first[t];
  expert.history_count += 1;

  SelectionResult result;
  result.set.members = std::move(picked);
  std::sort(result.set.members.begin(), result.set.members.end());
  result.evaluations = evaluations;
  return result;
}

// Exhaustive maximizer of f over subsets of size <= q. Monotonicity makes a
// size-q subset optimal, so enumeration walks the size-q combinations in
// lexicographic order (first winner = lexicographically smallest maximizer,
// matching the sorted variant's tie rule). Neighborhoods beyond 25 fall back
// to the provably equivalent top-q rule.
inline SuspiciousSet oracle_optimal(const ErrorSummary& summary, int q) {
  validate_summary(summary);
  const int n = static_cast<int>(summary.neighbors.size());
  if (q < 0 || q > n) throw std::invalid_argument("oracle budget must satisfy 0 <= q <= |N_i|");
  SuspiciousSet best;
  if (q == 0) return best;

  if (n > 25) {
    std::cerr << "oracle_optimal: neighborhood of size " << n
              << " exceeds the exhaustive-search guard; using the top-q equivalence\n";
    std::vector<int> order(n);
    for (int t = 0; t < n; ++t) order[t] = t;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return summary.entries[a] > summary.entries[b]; });
    for (int t = 0; t < q; ++t) best.members.push_back(summary.neighbors[order[t]]);
    std::sort(best.members.begin(), best.members.end());
    return best;
  }

  std::vector<int> combo(q);
  for (int t = 0; t < q; ++t) combo[t] = t;
  double best_f = -1.0;
  while (true) {
    double sum = 0.0;
    for (int t : combo) sum += summary.entries[t] * summary.entries[t];
    const double f = std::sqrt(sum);
    if (f > best_f) {
      best_f = f;
      best.members.clear();
      for (int t : combo) best.members.push_back(summary.neighbors[t]);
    }
    // next combination in lexicographic order
    int pos = q - 1;
    while (pos >= 0 && combo[pos] == n - q + pos) --pos;
    if (pos < 0) break;
    ++combo[pos];
    for (int t = pos + 1; t < q; ++t) combo[t] = combo[t - 1] + 1;
  }
  return best;
}

// Spot-checks monotonicity and diminishing returns on random nested pairs
// (A subset of B, j outside B) drawn from the summary's neighborhood.
// Returns false if any violation beyond a 1e-12 slack shows up.
inline bool check_submodularity(const ErrorSummary& summary, int trials, RngStream& rng) {
  validate_summary(summary);
  const int n = static_cast<int>(summary.neighbors.size());
  if (n < 1) return true;
  constexpr double kSlack = 1e-12;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<int> a, b, outside;
    for (int t = 0; t < n; ++t) {
      const double u = rng.uniform01();
      if (u < 1.0 / 3.0) {
        a.push_back(summary.neighbors[t]);
        b.push_back(summary.neighbors[t]);
      } else if (u < 2.0 / 3.0) {
        b.push_back(summary.neighbors[t]);
      } else {
        outside.push_back(summary.neighbors[t]);
      }
    }
    if (objective(summary, b) + kSlack < objective(summary, a)) return false;
    if (outside.empty()) continue;
    const int j = outside[static_cast<std::size_t>(rng.uniform01() * outside.size()) % outside.size()];
    if (marginal_gain(summary, a, j) + kSlack < marginal_gain(summary, b, j)) return false;
  }
  return true;
}

}  // namespace fdia
