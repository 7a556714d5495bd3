#include "ctspec/entropy_balance.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ctspec/errors.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "entropy_balance";
constexpr double kArmijoSlope = 1e-4;
constexpr double kShrink = 0.5;
constexpr double kMinStep = 1e-12;
constexpr double kHessianRidge = 1e-10;
constexpr double kRankThreshold = 1e-10;
constexpr double kRoundingSlope = 1e-13;

Eigen::VectorXd vec(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace

DualObjective::DualObjective(Eigen::MatrixXd u, Eigen::MatrixXd v) : u_(std::move(u)), v_(std::move(v)) {
  if (u_.rows() != v_.rows()) throw Error(ErrorKind::config, kModule, "u and v designs have different row counts");
  if (u_.rows() == 0) throw Error(ErrorKind::data, kModule, "empty design");
  z_ = tensor_design(u_, v_);
  const Eigen::VectorXd ubar = u_.colwise().mean();
  const Eigen::VectorXd vbar = v_.colwise().mean();
  target_ = vec(ubar * vbar.transpose());
}

Eigen::VectorXd DualObjective::index(const Eigen::MatrixXd& lambda) const {
  if (lambda.rows() != k1() || lambda.cols() != k2()) {
    throw Error(ErrorKind::config, kModule, "Lambda has wrong dimensions");
  }
  return z_ * vec(lambda);
}

Eigen::VectorXd DualObjective::weights(const Eigen::MatrixXd& lambda) const {
  return index(lambda).unaryExpr([](double s) { return ExpCarrier::d1(s); });
}

double DualObjective::value(const Eigen::MatrixXd& lambda) const {
  const Eigen::VectorXd s = index(lambda);
  const double mean_rho = s.unaryExpr([](double x) { return ExpCarrier::rho(x); }).mean();
  return mean_rho - target_.dot(vec(lambda));
}

Eigen::MatrixXd DualObjective::gradient(const Eigen::MatrixXd& lambda) const {
  const Eigen::VectorXd w = weights(lambda);
  const Eigen::VectorXd g = z_.transpose() * w / static_cast<double>(size()) - target_;
  return unvec(g, k1(), k2());
}

Eigen::MatrixXd DualObjective::hessian(const Eigen::MatrixXd& lambda) const {
  const Eigen::VectorXd s = index(lambda);
  const Eigen::VectorXd root = s.unaryExpr([](double x) { return std::sqrt(-ExpCarrier::d2(x)); });
  const Eigen::MatrixXd scaled = z_.array().colwise() * root.array();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(z_.cols(), z_.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), -1.0 / static_cast<double>(size()));
  return h.selfadjointView<Eigen::Lower>();
}

double DualObjective::constraint_gap(const Eigen::VectorXd& weights) const {
  const Eigen::VectorXd g = z_.transpose() * weights / static_cast<double>(size()) - target_;
  return g.cwiseAbs().maxCoeff();
}

BalanceFit fit_weights(const Dataset& data, const SieveSpec& spec, const BalanceOptions& options) {
  if (static_cast<Eigen::Index>(spec.k1) * spec.k2 > data.size()) {
    throw Error(ErrorKind::config, kModule,
                "K1*K2 = " + std::to_string(spec.k1 * spec.k2) + " exceeds N = " + std::to_string(data.size()));
  }
  DualObjective objective(design_u(spec, data.t_std()), design_v(spec, data.x_std()));
  BalanceFit fit = fit_weights(objective, options);
  fit.spec = spec;
  return fit;
}

BalanceFit fit_weights(const DualObjective& objective, const BalanceOptions& options) {
  const auto k1 = objective.k1();
  const auto k2 = objective.k2();
  const auto k = k1 * k2;
  if (k > objective.size()) {
    throw Error(ErrorKind::config, kModule, "more balance constraints than observations; use smaller K1/K2");
  }
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(objective.z());
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < k) {
      throw Error(ErrorKind::conditioning, kModule,
                  "balance design has rank " + std::to_string(qr.rank()) + " < K = " + std::to_string(k) +
                      "; use smaller K1/K2");
    }
  }

  BalanceFit fit;
  fit.lambda = Eigen::MatrixXd::Zero(k1, k2);
  fit.lambda(0, 0) = -1.0;
  Eigen::VectorXd l = vec(fit.lambda);
  double value = objective.value(fit.lambda);
  Eigen::VectorXd g = vec(objective.gradient(fit.lambda));
  double gnorm = g.cwiseAbs().maxCoeff();

  int iter = 0;
  while (gnorm > options.tol) {
    if (iter >= options.max_iter) {
      throw ConvergenceError(kModule,
                             "dual solver did not converge in " + std::to_string(options.max_iter) +
                                 " iterations (gradient sup-norm " + std::to_string(gnorm) + ")",
                             gnorm, l);
    }
    const Eigen::MatrixXd neg_h = -objective.hessian(unvec(l, k1, k2));
    Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
    if (llt.info() != Eigen::Success) {
      llt.compute(neg_h + kHessianRidge * Eigen::MatrixXd::Identity(k, k));
      fit.regularized = true;
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::conditioning, kModule, "Hessian is not negative definite; use smaller K1/K2");
      }
    }
    const Eigen::VectorXd step = llt.solve(g);
    const double slope = g.dot(step);

    double alpha = 1.0;
    Eigen::VectorXd trial = l + step;
    double trial_value = objective.value(unvec(trial, k1, k2));
    Eigen::VectorXd trial_grad;
    if (slope <= kRoundingSlope * (1.0 + std::abs(value))) {
      // The Newton decrement is below what the objective can resolve; judge
      // the full step by the gradient instead.
      trial_grad = vec(objective.gradient(unvec(trial, k1, k2)));
      if (!(trial_grad.cwiseAbs().maxCoeff() < gnorm)) {
        throw ConvergenceError(kModule,
                               "Newton step stalled at rounding level (gradient sup-norm " + std::to_string(gnorm) + ")",
                               gnorm, l);
      }
    } else {
      while (!(trial_value >= value + kArmijoSlope * alpha * slope) && alpha > kMinStep) {
        alpha *= kShrink;
        trial = l + alpha * step;
        trial_value = objective.value(unvec(trial, k1, k2));
      }
      if (alpha <= kMinStep) {
        throw ConvergenceError(kModule, "line search failed (gradient sup-norm " + std::to_string(gnorm) + ")", gnorm,
                               l);
      }
      trial_grad = vec(objective.gradient(unvec(trial, k1, k2)));
    }
    l = trial;
    value = trial_value;
    g = trial_grad;
    gnorm = g.cwiseAbs().maxCoeff();
    fit.objective_trace.push_back(value);
    ++iter;
  }

  fit.lambda = unvec(l, k1, k2);
  fit.weights = objective.weights(fit.lambda);
  fit.objective = value;
  fit.grad_norm = gnorm;
  fit.iterations = iter;
  fit.constraint_gap = objective.constraint_gap(fit.weights);
  if (!fit.weights.allFinite() || fit.weights.minCoeff() <= 0.0) {
    throw ConvergenceError(kModule, "dual solution produced non-finite or non-positive weights", gnorm, l);
  }
  return fit;
}

Eigen::VectorXd dual_weights(const BalanceFit& fit, const Dataset& data) {
  const Eigen::MatrixXd u = design_u(fit.spec, data.t_std());
  const Eigen::MatrixXd v = design_v(fit.spec, data.x_std());
  Eigen::VectorXd w(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    w[i] = ExpCarrier::d1(u.row(i).dot(fit.lambda * v.row(i).transpose()));
  }
  return w;
}

std::string diagnostics(const BalanceFit& fit) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "iterations = " << fit.iterations << '\n';
  out << "grad_norm = " << fit.grad_norm << '\n';
  out << "constraint_gap = " << fit.constraint_gap << '\n';
  out << "objective = " << fit.objective << '\n';
  out << "min_weight = " << fit.weights.minCoeff() << '\n';
  out << "max_weight = " << fit.weights.maxCoeff() << '\n';
  out << "mean_weight = " << fit.weights.mean() << '\n';
  out << "hessian_regularized = " << (fit.regularized ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace ctspec
