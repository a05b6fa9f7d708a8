#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mob2vec {

/// Invalid parameters or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data that violates an operation's preconditions.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed record in a delimited input file.
class RecordError : public DataError {
 public:
  RecordError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mob2vec
