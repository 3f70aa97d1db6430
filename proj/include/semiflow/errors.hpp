#pragma once

#include <stdexcept>
#include <string>

namespace semiflow {

/// Base class of every error raised by the library. The CLI maps any
/// `Error` escaping a pipeline to exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A shift semigroup (or anything built on it) was asked to look past the
/// extension margin of its grid.
class HorizonExceededError : public Error {
 public:
  HorizonExceededError(const std::string& what, double requested, double available)
      : Error(what), requested_(requested), available_(available) {}
  double requested() const { return requested_; }
  double available() const { return available_; }

 private:
  double requested_;
  double available_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class DegenerateChartError : public RankError {
 public:
  using RankError::RankError;
};

class DegenerateFieldError : public Error {
 public:
  using Error::Error;
};

class NoEmbeddingError : public Error {
 public:
  using Error::Error;
};

class OffManifoldError : public Error {
 public:
  OffManifoldError(const std::string& what, double distance) : Error(what), distance_(distance) {}
  double distance() const { return distance_; }

 private:
  double distance_;
};

class BlowUpError : public Error {
 public:
  using Error::Error;
};

}  // namespace semiflow
