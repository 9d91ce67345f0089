#pragma once

#include <stdexcept>
#include <string>

namespace mirrorqed {

/// Base class for every numerical failure raised by the library. The CLI maps
/// these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoSolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntegratorError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllConditionedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class WindowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnresolvedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Invalid user input (configuration, CSV content, argument ranges). Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mirrorqed
