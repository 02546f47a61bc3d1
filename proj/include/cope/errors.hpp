#pragma once

#include <stdexcept>
#include <string>

namespace cope {

// Bad input or configuration; the caller can fix it. The CLI maps these to
// exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure on otherwise well-formed input. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidFieldError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IngestError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DesignError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroVarianceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyBoundaryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cope
