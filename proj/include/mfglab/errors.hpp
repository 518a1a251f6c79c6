#pragma once

#include <stdexcept>
#include <string>

namespace mfglab {

// Bad input: malformed config, unknown key, violated precondition.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear solve failure or Picard non-convergence.
class SolverError : public std::runtime_error {
 public:
  enum class Kind { LinearSolve, MaxIterationsExceeded };
  SolverError(Kind kind, const std::string& what, int level = -1, double last_update = 0.0)
      : std::runtime_error(what), kind_(kind), level_(level), last_update_(last_update) {}
  Kind kind() const { return kind_; }
  int level() const { return level_; }
  double last_update() const { return last_update_; }

 private:
  Kind kind_;
  int level_;
  double last_update_;
};

// A checked property of the data failed (residual too large, positivity floor, ...).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void throw_config(const std::string& msg);

}  // namespace mfglab
