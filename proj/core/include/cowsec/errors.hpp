#pragma once

#include <stdexcept>
#include <string>

namespace cowsec {

/// Bad user input: out-of-range parameter, malformed config, missing field.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical solver failed to reach its required residual.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int restarts, double best_residual)
      : std::runtime_error(what), restarts(restarts), best_residual(best_residual) {}
  int restarts = 0;
  double best_residual = 0.0;
};

/// A requested operating point cannot be reached by the attack family.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double max_achievable_gain)
      : std::runtime_error(what), max_achievable_gain(max_achievable_gain) {}
  double max_achievable_gain = 0.0;
};

}  // namespace cowsec
