#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scagwr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input or configuration. Maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical failure (singular local fit, failed calibration, ...). Exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularFitError : public NumericalError {
 public:
  SingularFitError(std::size_t site, const std::string& what)
      : NumericalError(what), site_(site) {}
  std::size_t site() const noexcept { return site_; }

 private:
  std::size_t site_;
};

class CalibrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AiccUndefinedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A run would exceed a configured resource cap. Exit code 4.
class ResourceCapError : public Error {
 public:
  using Error::Error;
};

}  // namespace scagwr
