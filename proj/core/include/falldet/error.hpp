#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace falldet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix operands with incompatible shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (model, windowing, policy, timing).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or message. Carries an optional location.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string file = {}, std::size_t line = 0)
      : Error(file.empty() ? what : file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// NaN/Inf encountered during training or evaluation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Socket or protocol failure.
class NetworkError : public Error {
 public:
  using Error::Error;
};

}  // namespace falldet
