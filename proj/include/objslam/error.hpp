#pragma once

#include <stdexcept>
#include <string>

namespace objslam {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Rotation too close to pi for a unique logarithm.
class BranchError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, singular systems, failed fits.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or data file. `line` is 1-based, 0 if unknown; the message carries
/// the location.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, int line = 0) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace objslam
