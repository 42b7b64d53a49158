#ifndef SGSKI_ERROR_H_
#define SGSKI_ERROR_H_

#include <stdexcept>
#include <string>

namespace sgski {

// Categories double as process exit codes for the command-line tool.
enum class ErrorKind : int {
  kInput = 1,
  kCorrectness = 2,
  kResource = 3,
  kSolver = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class CorrectnessError : public Error {
 public:
  explicit CorrectnessError(const std::string& what)
      : Error(ErrorKind::kCorrectness, what) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what)
      : Error(ErrorKind::kResource, what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what)
      : Error(ErrorKind::kSolver, what) {}
};

// Throws InputError with `message` unless `condition` holds.
void require(bool condition, const std::string& message);
inline void require(bool condition, const char* message) {
  if (!condition) throw InputError(message);
}

const char* to_string(ErrorKind kind);

}  // namespace sgski

#endif  // SGSKI_ERROR_H_
