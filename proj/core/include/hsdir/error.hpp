#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hsdir {

enum class ErrorKind {
  InvalidArgument,
  InsufficientRing,
  ParseError,
  OrderingError,
  ConstraintError,
  NoData,
  ValidationError,
  GaveUp,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base for every error raised by the library. The kind is what callers
/// branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Archive ingestion error that carries the 1-based input line.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hsdir
