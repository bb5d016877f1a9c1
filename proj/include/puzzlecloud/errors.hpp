#pragma once

#include <stdexcept>
#include <string>

namespace puzzlecloud {

// Base of every error thrown by the library. Each subclass names a failure
// category so callers (and the CLI) can map them to messages and exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or array lengths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A label outside its valid range, or an attempt to read a stripped label.
class LabelError : public Error {
 public:
  using Error::Error;
};

// An operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or missing required inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Optimizer or checkpoint state that is inconsistent with the parameters.
class StateError : public Error {
 public:
  using Error::Error;
};

// Geometry with no usable extent (zero-area mesh, coincident points).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Coordinates outside the unit cube handed to the voxelizer.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A dataset that cannot satisfy a request (e.g. empty class).
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace puzzlecloud
