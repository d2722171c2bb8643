#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fdia/errors.hpp"
#include "fdia/estimator.hpp"
#include "fdia/linear_model.hpp"
#include "fdia/random.hpp"

namespace fdia {

// Injection magnitude profile for one family of false-data signals.
// An "active" step draws the full amplitude; the remaining share of attacked
// steps draws a noise-level magnitude in [0, quiet_high]. Stealthy families
// carry a finite norm cap z_tilde which is asserted on every draw.
struct SignalFamily {
  std::string name = "unstealthy";
  double amplitude_low = 5.0;
  double amplitude_high = 10.0;
  double z_tilde = std::numeric_limits<double>::infinity();
  double active_fraction = 0.9;
  double quiet_high = 0.05;

  static SignalFamily unstealthy_default() { return SignalFamily{}; }
  static SignalFamily stealthy_default() {
    SignalFamily f;
    f.name = "stealthy";
    f.amplitude_low = 0.02;
    f.amplitude_high = 0.08;
    f.z_tilde = 0.08;
    f.active_fraction = 1.0;
    return f;
  }
};

// Directed link (receiver, sender): the transmission from `sender` to
// `receiver` is tampered while the interval is live.
struct DirectedLink {
  int receiver = 0;
  int sender = 0;
  friend bool operator<(const DirectedLink& a, const DirectedLink& b) {
    return std::pair(a.receiver, a.sender) < std::pair(b.receiver, b.sender);
  }
  friend bool operator==(const DirectedLink& a, const DirectedLink& b) {
    return a.receiver == b.receiver && a.sender == b.sender;
  }
};

// Closed interval [start, end] of steps during which `links` are attacked
// with signals drawn from families[family].
struct AttackInterval {
  int start = 0;
  int end = 0;
  std::vector<DirectedLink> links;
  int family = 0;
};

struct AttackSchedule {
  std::vector<SignalFamily> families;
  std::vector<AttackInterval> intervals;

  int horizon_hint() const {
    int h = 0;
    for (const auto& iv : intervals) h = std::max(h, iv.end);
    return h;
  }
};

inline std::vector<std::string> validate_family(const SignalFamily& f, int index) {
  std::vector<std::string> issues;
  const std::string tag = "signal family " + std::to_string(index) + " (" + f.name + ")";
  if (!(f.amplitude_low >= 0.0) || !(f.amplitude_high >= f.amplitude_low))
    issues.push_back(tag + ": amplitude range must satisfy 0 <= low <= high");
  if (!(f.active_fraction >= 0.0 && f.active_fraction <= 1.0))
    issues.push_back(tag + ": active_fraction must lie in [0, 1]");
  if (!(f.quiet_high >= 0.0)) issues.push_back(tag + ": quiet_high must be >= 0");
  if (std::isfinite(f.z_tilde)) {
    if (f.amplitude_high > f.z_tilde)
      issues.push_back(tag + ": amplitude_high exceeds the stealth cap z_tilde");
    if (f.quiet_high > f.z_tilde && f.active_fraction < 1.0)
      issues.push_back(tag + ": quiet_high exceeds the stealth cap z_tilde");
  }
  return issues;
}

// Ground-truth attacked in-neighbors of sensor i at step k, sorted by id.
inline std::vector<int> attacked_set(const AttackSchedule& schedule, int i, int k) {
  std::set<int> senders;
  for (const auto& iv : schedule.intervals) {
    if (k < iv.start || k > iv.end) continue;
    for (const auto& link : iv.links)
      if (link.receiver == i) senders.insert(link.sender);
  }
  return {senders.begin(), senders.end()};
}

// Validates the schedule against a topology: links must be edges, families
// must exist and be self-consistent, and every sensor must keep at least as
// many benign in-neighbors as attacked ones (q_i <= floor(|N_i|/2)) at every
// step. Returns every violation found.
inline std::vector<std::string> validate_schedule(const AttackSchedule& schedule, const Topology& topo) {
  std::vector<std::string> issues;
  for (std::size_t fi = 0; fi < schedule.families.size(); ++fi) {
    auto fam = validate_family(schedule.families[fi], static_cast<int>(fi));
    issues.insert(issues.end(), fam.begin(), fam.end());
  }
  std::set<int> boundaries;
  for (std::size_t ii = 0; ii < schedule.intervals.size(); ++ii) {
    const auto& iv = schedule.intervals[ii];
    const std::string tag = "attack interval " + std::to_string(ii);
    if (iv.start < 1 || iv.end < iv.start)
      issues.push_back(tag + ": needs 1 <= start <= end");
    if (iv.family < 0 || iv.family >= static_cast<int>(schedule.families.size()))
      issues.push_back(tag + ": references missing signal family " + std::to_string(iv.family));
    std::set<DirectedLink> seen;
    for (const auto& link : iv.links) {
      if (link.receiver < 1 || link.receiver > topo.sensor_count || link.sender < 1 ||
          link.sender > topo.sensor_count) {
        issues.push_back(tag + ": link (" + std::to_string(link.receiver) + "," + std::to_string(link.sender) +
                         ") references a sensor outside the network");
        continue;
      }
      if (!topo.has_edge(link.receiver, link.sender))
        issues.push_back(tag + ": link (" + std::to_string(link.receiver) + "," + std::to_string(link.sender) +
                         ") is not an edge of the topology");
      if (!seen.insert(link).second)
        issues.push_back(tag + ": duplicate link (" + std::to_string(link.receiver) + "," +
                         std::to_string(link.sender) + ")");
    }
    boundaries.insert(iv.start);
    boundaries.insert(iv.end);
  }
  // The attacked-in-neighbor count is piecewise constant between interval
  // boundaries, so checking each boundary step covers every k.
  for (int k : boundaries) {
    if (k < 1) continue;
    std::set<int> receivers;
    for (const auto& iv : schedule.intervals)
      if (k >= iv.start && k <= iv.end)
        for (const auto& link : iv.links) receivers.insert(link.receiver);
    for (int i : receivers) {
      if (i < 1 || i > topo.sensor_count) continue;
      const int attacked = static_cast<int>(attacked_set(schedule, i, k).size());
      const int allowed = topo.degree(i) / 2;
      if (attacked > allowed)
        issues.push_back("at step " + std::to_string(k) + ", sensor " + std::to_string(i) + " has " +
                         std::to_string(attacked) + " attacked in-neighbors but only floor(" +
                         std::to_string(topo.degree(i)) + "/2) = " + std::to_string(allowed) + " are allowed");
    }
  }
  return issues;
}

// Draws the injections for step k. Per live link, in schedule order: one
// activity draw, a direction uniform on the unit sphere, and a magnitude
// draw. Links outside any live interval carry exact zeros.
inline LinkInjections injections_at(const AttackSchedule& schedule, const Topology& topo, int k,
                                    int state_dim, RngStream& rng) {
  LinkInjections inj = zero_injections(topo, state_dim);
  for (const auto& iv : schedule.intervals) {
    if (k < iv.start || k > iv.end) continue;
    const SignalFamily& fam = schedule.families[iv.family];
    for (const auto& link : iv.links) {
      const bool active = rng.uniform01() < fam.active_fraction;
      Eigen::VectorXd dir(state_dim);
      double norm = 0.0;
      do {
        for (int d = 0; d < state_dim; ++d) dir[d] = rng.gaussian();
        norm = dir.norm();
      } while (norm == 0.0);
      dir /= norm;
      const double magnitude = active ? rng.uniform(fam.amplitude_low, fam.amplitude_high)
                                      : rng.uniform(0.0, fam.quiet_high);
      Eigen::VectorXd z = magnitude * dir;
      if (std::isfinite(fam.z_tilde) && z.norm() > fam.z_tilde + 1e-12)
        throw std::logic_error("stealthy injection violated its norm cap");
      const int t = topo.neighbor_index(link.receiver, link.sender);
      if (t < 0)
        throw ProtocolError("attack schedule targets non-edge (" + std::to_string(link.receiver) + "," +
                            std::to_string(link.sender) + ")");
      inj.z[link.receiver][t] = std::move(z);
    }
  }
  return inj;
}

// Total attack-set drift sum_{k=1}^{T-1} |A_{i,k+1} symdiff A_{i,k}| for
// sensor i; the regret bound grows with this quantity.
inline int delta_T(const AttackSchedule& schedule, int i, int T) {
  int total = 0;
  std::vector<int> prev = attacked_set(schedule, i, 1);
  for (int k = 2; k <= T; ++k) {
    std::vector<int> cur = attacked_set(schedule, i, k);
    std::vector<int> sym;
    std::set_symmetric_difference(prev.begin(), prev.end(), cur.begin(), cur.end(), std::back_inserter(sym));
    total += static_cast<int>(sym.size());
    prev = std::move(cur);
  }
  return total;
}

}  // namespace fdia
