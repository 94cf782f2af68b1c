#pragma once

#include <stdexcept>
#include <string>

namespace thermocap {

enum class ErrorKind {
  InvalidInput,
  InvalidConfig,
  ResourceLimit,
  Infeasible,
  Unsupported,
  SingularInput,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::ResourceLimit: return "resource-limit";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::SingularInput: return "singular-input";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the kinds above so that
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace thermocap
