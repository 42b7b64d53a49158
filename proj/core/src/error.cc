#include "sgski/error.h"

namespace sgski {

void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput:
      return "input";
    case ErrorKind::kCorrectness:
      return "correctness";
    case ErrorKind::kResource:
      return "resource";
    case ErrorKind::kSolver:
      return "solver";
  }
  return "unknown";
}

}  // namespace sgski
