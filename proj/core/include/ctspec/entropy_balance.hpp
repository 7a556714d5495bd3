#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"
#include "ctspec/sieve_basis.hpp"

namespace ctspec {

/// Generalized empirical likelihood carrier rho(s) = -exp(-s - 1) and its
/// derivatives. Weights are rho'(s) = exp(-s - 1).
struct ExpCarrier {
  static double rho(double s) { return -std::exp(-s - 1.0); }
  static double d1(double s) { return std::exp(-s - 1.0); }
  static double d2(double s) { return -std::exp(-s - 1.0); }
};

/// Strictly concave dual objective
///   G(L) = N^-1 sum_i rho(u_i' L v_i) - ubar' L vbar
/// over K1 x K2 matrices L, evaluated from precomputed basis designs.
class DualObjective {
 public:
  DualObjective(Eigen::MatrixXd u, Eigen::MatrixXd v);

  Eigen::Index k1() const { return u_.cols(); }
  Eigen::Index k2() const { return v_.cols(); }
  Eigen::Index size() const { return u_.rows(); }

  double value(const Eigen::MatrixXd& lambda) const;
  /// N^-1 sum_i rho'(.) u_i v_i' - ubar vbar'.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& lambda) const;
  /// Hessian in the column-major vectorization of Lambda (K x K).
  Eigen::MatrixXd hessian(const Eigen::MatrixXd& lambda) const;

  /// Index s_i = u_i' L v_i for every observation.
  Eigen::VectorXd index(const Eigen::MatrixXd& lambda) const;
  Eigen::VectorXd weights(const Eigen::MatrixXd& lambda) const;

  /// Max-abs entry of N^-1 sum_i w_i u_i v_i' - ubar vbar'.
  double constraint_gap(const Eigen::VectorXd& weights) const;

  const Eigen::MatrixXd& u() const { return u_; }
  const Eigen::MatrixXd& v() const { return v_; }
  /// Rows kron(v_i, u_i).
  const Eigen::MatrixXd& z() const { return z_; }

 private:
  Eigen::MatrixXd u_;
  Eigen::MatrixXd v_;
  Eigen::MatrixXd z_;
  Eigen::VectorXd target_;  // vec(ubar vbar')
};

struct BalanceOptions {
  double tol = 1e-8;   // sup-norm of the dual gradient
  int max_iter = 100;
};

struct BalanceFit {
  Eigen::MatrixXd lambda;     // K1 x K2
  Eigen::VectorXd weights;    // pi_hat_i, all > 0
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  double constraint_gap = 0.0;
  bool regularized = false;   // a 1e-10 ridge was needed to factor the Hessian
  std::vector<double> objective_trace;  // objective after each accepted step
  SieveSpec spec;
};

/// Maximizes the dual objective by damped Newton with Armijo backtracking,
/// starting from the uniform-weight point (L(0,0) = -1, zeros elsewhere).
BalanceFit fit_weights(const Dataset& data, const SieveSpec& spec, const BalanceOptions& options = {});

/// Same solver on precomputed designs.
BalanceFit fit_weights(const DualObjective& objective, const BalanceOptions& options = {});

/// Dual map rho'(u(t)' L v(x)) for the rows of `data` (which may be held out
/// from the sample the fit came from).
Eigen::VectorXd dual_weights(const BalanceFit& fit, const Dataset& data);

/// Key-value diagnostics block: iterations, grad_norm, constraint_gap, weight range.
std::string diagnostics(const BalanceFit& fit);

}  // namespace ctspec
