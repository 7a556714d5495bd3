#include "ctspec/errors.hpp"

namespace ctspec {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "configuration error";
    case ErrorKind::data: return "data error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::convergence: return "convergence error";
    case ErrorKind::conditioning: return "conditioning error";
    case ErrorKind::unsupported: return "unsupported operation";
    case ErrorKind::file: return "file error";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error("[" + module + "] " + to_string(kind) + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::unsupported:
      return 2;
    case ErrorKind::data:
    case ErrorKind::parse:
    case ErrorKind::domain:
    case ErrorKind::file:
      return 3;
    case ErrorKind::convergence:
    case ErrorKind::conditioning:
      return 4;
  }
  return 1;
}

}  // namespace ctspec
