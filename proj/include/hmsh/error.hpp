#pragma once

#include <stdexcept>
#include <string>

namespace hmsh {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid distribution or model parameters (nonpositive scale, bad dimensions).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Evaluation point outside the support of a density.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Linear-algebra or sampling failure (non-PD precision, singular B0,
// degenerate likelihood rows).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace hmsh
