#pragma once

#include <stdexcept>
#include <string>

namespace ragcheck {

/// Failure classes. The CLI maps them to exit codes 1, 2 and 3.
enum class ErrorKind { validation, endpoint, internal };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::endpoint: return "endpoint";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

/// Transport-level failure of a remote endpoint; eligible for retry.
class EndpointError : public Error {
 public:
  explicit EndpointError(const std::string& message)
      : Error(ErrorKind::endpoint, message) {}
};

/// The endpoint answered, but the reply violates the wire contract. Never retried.
class MalformedReplyError : public Error {
 public:
  explicit MalformedReplyError(const std::string& message)
      : Error(ErrorKind::endpoint, message) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 1;
    case ErrorKind::endpoint: return 2;
    case ErrorKind::internal: return 3;
  }
  return 3;
}

}  // namespace ragcheck
