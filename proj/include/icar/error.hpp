#pragma once

#include <stdexcept>
#include <string>

namespace icar {

// Violated precondition of a public operation.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operand shapes that cannot be combined.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A metric that is mathematically undefined for its input (zero variance, single class, ...).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Missing, truncated or inconsistent files on disk.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace icar
