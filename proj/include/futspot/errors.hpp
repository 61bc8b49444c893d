#pragma once

#include <stdexcept>
#include <string>

namespace futspot {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched vector lengths or out-of-range indices.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invariant violation detected while constructing a domain object.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Conduct/cost combination outside the domain of the closed forms
/// (beta*(1+delta)+c below the singularity floor), or an operation that
/// does not exist for the requested market model.
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace futspot
