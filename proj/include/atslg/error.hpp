#pragma once

#include <stdexcept>
#include <string>

namespace atslg {

/// Process exit codes used by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kNumerical = 3,
  kData = 4,
};

/// Base of all library errors. Each subclass maps onto one CLI exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  [[nodiscard]] virtual ExitCode exit_code() const noexcept { return ExitCode::kFailure; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

class DataError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

// Finer-grained kinds. They keep the exit code of their parent.
class RangeError : public DataError { using DataError::DataError; };
class ShapeError : public DataError { using DataError::DataError; };
class ParseError : public DataError { using DataError::DataError; };
class EmptyDataError : public DataError { using DataError::DataError; };
class InputError : public DataError { using DataError::DataError; };
class SupportError : public NumericalError { using NumericalError::NumericalError; };
class DegenerateLibraryError : public NumericalError { using NumericalError::NumericalError; };
class ExhaustionError : public NumericalError { using NumericalError::NumericalError; };

}  // namespace atslg
