#include "plab/error.hpp"

namespace plab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::degenerate_gradient: return "degenerate_gradient";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::provenance: return "provenance";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace plab
