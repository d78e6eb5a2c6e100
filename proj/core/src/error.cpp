#include "hsdir/error.hpp"

namespace hsdir {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InsufficientRing: return "insufficient-ring";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::OrderingError: return "ordering-error";
    case ErrorKind::ConstraintError: return "constraint-error";
    case ErrorKind::NoData: return "no-data";
    case ErrorKind::ValidationError: return "validation-error";
    case ErrorKind::GaveUp: return "gave-up";
    case ErrorKind::IoError: return "io-error";
  }
  return "unknown";
}

}  // namespace hsdir
