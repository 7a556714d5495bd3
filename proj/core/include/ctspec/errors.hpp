#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace ctspec {

enum class ErrorKind {
  config,        // unusable configuration or inconsistent dimensions
  data,          // data violates a precondition (too few rows, degenerate values)
  parse,         // malformed input file
  domain,        // argument outside the domain of a function
  convergence,   // iterative solver did not converge
  conditioning,  // singular or rank-deficient system
  unsupported,   // operation not available for this input
  file,          // missing or unreadable files
};

const char* to_string(ErrorKind kind);

/// Base exception for the library. Messages are tagged with the module that
/// raised them, e.g. "[entropy_balance] ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

/// Raised by iterative solvers. Carries the last gradient norm and the best
/// iterate seen so callers can inspect how far the solver got.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& message, double grad_norm,
                   Eigen::VectorXd best_iterate = {})
      : Error(ErrorKind::convergence, std::move(module), message),
        grad_norm_(grad_norm),
        best_(std::move(best_iterate)) {}

  double grad_norm() const noexcept { return grad_norm_; }
  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }

 private:
  double grad_norm_;
  Eigen::VectorXd best_;
};

/// Process exit code for an error kind: 2 configuration, 3 data, 4 convergence.
int exit_code(ErrorKind kind);

}  // namespace ctspec
