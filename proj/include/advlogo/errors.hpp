#pragma once

#include <stdexcept>
#include <string>

namespace advlogo {

// Root of every error thrown by the library. The CLI maps subclasses to
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/image/gradient shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain (empty input, degenerate size...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed text or binary input. Carries the 1-based line when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class UnsupportedFaceError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Object used in the wrong lifecycle state (unfrozen map, stale tape...).
class StateError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace advlogo
