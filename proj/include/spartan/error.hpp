#pragma once

#include <stdexcept>
#include <string>

namespace spartan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not satisfy an op's shape contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: bad hyperparameter, unknown key, indivisible groups.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition (non-scalar loss, degenerate batch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Model input that the network cannot consume (e.g. resolution not divisible by 32).
class InputError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace spartan
