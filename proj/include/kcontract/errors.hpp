#pragma once

#include <stdexcept>
#include <string>

namespace kcontract {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Syntax error from the expression parser; `pos` is a 0-based byte offset.
class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"), pos(pos) {}
  std::size_t pos;
};

// Evaluation failure: unbound variable, division by zero, sqrt of a negative.
class EvalError : public Error {
public:
  using Error::Error;
};

// Dimension or index out of range (k outside [1,n], arity mismatch, ...).
class DimensionError : public Error {
public:
  using Error::Error;
};

class SingularMatrixError : public Error {
public:
  using Error::Error;
};

// ODE solver failure (step underflow / NaN in the vector field).
class SolverError : public Error {
public:
  using Error::Error;
};

// Malformed config file or CSV input.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace kcontract
