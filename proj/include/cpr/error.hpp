#pragma once

#include <stdexcept>
#include <string>

namespace cpr {

/// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { validation = 1, transport = 2, numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class InvalidConfigError : public ValidationError {
 public:
  explicit InvalidConfigError(const std::string& what)
      : ValidationError("invalid config: " + what) {}
};

class AlignmentError : public ValidationError {
 public:
  explicit AlignmentError(const std::string& what)
      : ValidationError("alignment error: " + what) {}
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("parse error at line " + std::to_string(line) + ": " +
                        what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what)
      : Error(ErrorKind::transport, what) {}
};

class TimeoutError : public TransportError {
 public:
  explicit TimeoutError(const std::string& what)
      : TransportError("timeout: " + what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

}  // namespace cpr
