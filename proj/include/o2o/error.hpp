#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace o2o {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates an operation's precondition (shape, range, unknown name).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN/inf produced or consumed during a numeric computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t byte_offset)
      : Error(what + " (line " + std::to_string(line) + ", byte offset " +
              std::to_string(byte_offset) + ")"),
        line_(line),
        byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

}  // namespace o2o
