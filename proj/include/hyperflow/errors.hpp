#pragma once

#include <stdexcept>
#include <string>

namespace hyperflow {

/// A value left the mathematical domain of an operation (e.g. SLN density at
/// the origin).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An adaptive ODE solve exhausted its step budget or produced non-finite
/// state.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition that is not a data error (e.g. asking
/// for the gradient of a non-scalar).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hyperflow
