#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otcd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, arrays, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

// Text-format parse failure. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// NaN or overflow inside an iterative solver.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A solve would exceed the memory budget or available memory.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace otcd
