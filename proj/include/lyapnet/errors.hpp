#pragma once

#include <stdexcept>
#include <string>

namespace lyapnet {

// Caller broke a documented precondition (shape mismatch, bad bounds, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Neuron bounds could not be computed (empty box, infeasible LP relaxation).
class BoundPropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The simplex engine gave up after its refactorization retries.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No invertible square system of active constraints exists at the optimum.
class DegenerateActiveSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration or file contents failed validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lyapnet
