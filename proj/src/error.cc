#include "amodal/error.h"

namespace amodal {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kShapeMismatch: return "shape_mismatch";
    case ErrorKind::kOutOfRange: return "out_of_range";
    case ErrorKind::kFingerprintMismatch: return "fingerprint_mismatch";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kUnreachable: return "unreachable";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
  }
  return "unknown";
}

}  // namespace amodal
