#ifndef AMODAL_ERROR_H_
#define AMODAL_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace amodal {

// Coarse error categories. The CLI prints the category name on stderr so
// callers can dispatch on it without parsing messages.
enum class ErrorKind {
  kInvalidArgument,
  kShapeMismatch,
  kOutOfRange,
  kFingerprintMismatch,
  kNumerical,
  kUnreachable,
  kIo,
  kFormat,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace amodal

#endif  // AMODAL_ERROR_H_
