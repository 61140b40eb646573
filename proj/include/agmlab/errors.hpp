#pragma once

#include <stdexcept>
#include <string>

namespace agmlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Required objective metadata (minimizer, f_star, mu, h1_gamma) is missing or too weak.
class MetadataError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

/// Trajectory was integrated without the accumulator channels an evaluator needs.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class OracleFailure : public Error {
 public:
  using Error::Error;
};

class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, double last_valid_time)
      : Error(what + " (last valid t = " + std::to_string(last_valid_time) + ")"),
        last_valid_time_(last_valid_time) {}

  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

class TerminalAnalysisError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A discrete run was requested with too few iterations for its recurrences.
class DegenerateRun : public Error {
 public:
  using Error::Error;
};

}  // namespace agmlab
