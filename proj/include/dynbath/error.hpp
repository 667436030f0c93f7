#pragma once

#include <stdexcept>
#include <string>

namespace dynbath {

// Bad input caught before heavy computation. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure inside a computation. The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SectorMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class StepTooLarge : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnreachableTime : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AliasingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A prior pipeline stage has not produced the artifact this stage needs.
class MissingArtifact : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntegrityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace dynbath
