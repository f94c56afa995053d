#pragma once

#include <stdexcept>
#include <string>

namespace cotdre {

// Error taxonomy. The CLI maps each class to a distinct exit code, so new
// categories must be added there as well.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Shape or index mismatch between operands.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Input outside the declared domain box.
class DomainError : public Error {
public:
  using Error::Error;
};

// Configuration or argument value outside its admissible range.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Linear program or budget constraint cannot be satisfied. Carries the
// constraint class that failed so callers never have to parse the message.
class InfeasibleError : public Error {
public:
  InfeasibleError(std::string constraint_class, const std::string& msg)
      : Error(msg), constraint_class(std::move(constraint_class)) {}
  std::string constraint_class;
};

// Iterative solver failed to reach its tolerance within the budget.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& msg, int iterations, double residual)
      : Error(msg), iterations(iterations), residual(residual) {}
  int iterations = 0;
  double residual = 0.0;
};

// Non-finite intermediate value.
class NumericError : public Error {
public:
  using Error::Error;
};

// Conditional kernel queried on a cell with no samples.
class MissingCellError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace cotdre
