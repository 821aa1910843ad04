#pragma once

#include <stdexcept>
#include <string>

namespace enanom {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input layout: missing columns, unknown keys.
class SchemaError : public Error {
public:
  using Error::Error;
};

// Input that parses but breaks a data invariant (duplicate timestamps, negative power).
class ValidationError : public Error {
public:
  using Error::Error;
};

class InsufficientDataError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// Zero spread where a scale is required (constant residuals).
class DegenerateSeriesError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

// Injection request that cannot be satisfied by the series.
class SpecError : public Error {
public:
  using Error::Error;
};

class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

}  // namespace enanom
