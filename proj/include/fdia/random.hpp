#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fdia {

// Purpose tag for deriving independent child streams from one master seed.
// Each (master, run, purpose, entity, variant) tuple owns its own engine, so
// toggling one consumer never perturbs another's draws and Monte Carlo runs
// can be dispatched to any worker in any order.
enum class Stream : std::uint64_t {
  kProcessNoise = 1,
  kMeasurementNoise = 2,
  kAttack = 3,
  kDetector = 4,
  kScheduler = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8f1bbcdcbfa53e0bULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

// Deterministic named substream. All randomness in the library flows through
// one of these; nothing else touches a global generator.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}
  RngStream(std::uint64_t master, std::uint64_t run, Stream purpose,
            std::uint64_t entity = 0, std::uint64_t variant = 0)
      : engine_(derive_seed({master, run, static_cast<std::uint64_t>(purpose),
                             entity, variant})) {}

  double gaussian() { return normal_(engine_); }
  double exponential1() { return exp1_(engine_); }
  double uniform01() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exp1_{1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace fdia
