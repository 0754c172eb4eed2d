#pragma once

#include <stdexcept>
#include <string>

namespace wmg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on an argument violated (bad size, out-of-range ratio, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. The message carries the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that breaks a domain invariant (duplicate ids, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A mask policy could not build both the conditioning and target sets.
class PolicyError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, singular system and similar numeric failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unknown run configuration entry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wmg
