#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spikeslab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments or violated preconditions (dimension mismatch, gamma too
// small, parameters out of range, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent run configuration (JSON parsing layer).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An adaptive quadrature failed to reach the requested tolerance.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

// An iterative search (mode finding, infimum search) hit its cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// A dense factorization or eigendecomposition failed.
class LinAlgError : public Error {
 public:
  using Error::Error;
};

// A requested run was refused because the instance admits no feasible
// decomposition (callers may force past the gate explicitly).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A Markov chain produced a non-finite value or exhausted its retry budget.
// Carries the step index at which the chain died.
class ChainError : public Error {
 public:
  ChainError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_index(step) {}
  long step_index;
};

}  // namespace spikeslab
