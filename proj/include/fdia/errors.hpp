#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fdia {

// Scenario or parameter problems. Carries every violation found so callers can
// report them all at once instead of fixing one issue per attempt.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  explicit ConfigError(const std::string& issue)
      : ConfigError(std::vector<std::string>{issue}) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "configuration invalid:";
    for (const auto& s : issues) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> issues_;
};

// Malformed neighbor exchange: payload/verdict sets not matching the neighbor set.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gain synthesis failure; message names the offending sensor.
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejection sampler starvation (norm bound too tight for the covariance).
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fdia
