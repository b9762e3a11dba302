#pragma once

#include <stdexcept>
#include <string>

namespace mlfield {

// Base for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied data that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A referenced id, file or record does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

// Inputs are well-formed but mathematically degenerate (zero vector, singular covariance).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// External embedding / decision provider failed or was unreachable.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// An internal invariant was broken; indicates a bug upstream of the check.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlfield
