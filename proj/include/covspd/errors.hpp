#pragma once

#include <stdexcept>
#include <string>

namespace covspd {

/// Process exit codes used by the command line driver.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Bad or inconsistent input data (files, manifests, regions).
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// Numerical failure (not PSD, solver did not converge).
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class TensorFormatError : public DataError {
 public:
  enum class Kind { kBadMagic, kBadDims, kTruncated, kTrailingBytes, kNonFinite };

  TensorFormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ManifestError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateRegionError : public DataError {
 public:
  using DataError::DataError;
};

class TooFewObservationsError : public DataError {
 public:
  using DataError::DataError;
};

class DimensionMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class NotPsdError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EigensolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace covspd
