#include "ctspec/dose_response.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ctspec/errors.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "dose_response";
constexpr double kThetaBox = 1e6;

double divisor_for(const std::optional<double>& divisor, const Dataset& data) {
  const double d = divisor.value_or(static_cast<double>(data.size()));
  if (!(d > 0.0)) throw Error(ErrorKind::config, kModule, "moment divisor must be positive");
  return d;
}

void check_weights(const Dataset& data, const Eigen::VectorXd& weights) {
  if (weights.size() != data.size()) {
    throw Error(ErrorKind::config, kModule, "weights length does not match the dataset");
  }
}

/// Minimal Nelder-Mead simplex search used when damped Gauss-Newton stalls.
template <typename F>
Eigen::VectorXd nelder_mead(const F& f, Eigen::VectorXd x0, int max_evals) {
  const auto p = x0.size();
  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(x0);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd x = x0;
    x[j] += (x0[j] != 0.0) ? 0.05 * std::abs(x0[j]) : 0.00025;
    simplex.push_back(x);
  }
  for (const auto& x : simplex) values.push_back(f(x));
  int evals = static_cast<int>(values.size());
  std::vector<std::size_t> order(simplex.size());

  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[order.size() - 2];
    if (std::abs(values[worst] - values[best]) <= 1e-30 + 1e-15 * std::abs(values[best])) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += simplex[order[k]];
    centroid /= static_cast<double>(p);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    ++evals;
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const Eigen::VectorXd contracted = centroid + 0.5 * (simplex[worst] - centroid);
    const double fc = f(contracted);
    ++evals;
    if (fc < values[worst]) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < simplex.size(); ++k) {
      if (k == best) continue;
      simplex[k] = simplex[best] + 0.5 * (simplex[k] - simplex[best]);
      values[k] = f(simplex[k]);
      ++evals;
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  return simplex[best];
}

}  // namespace

ResidualSpec ResidualSpec::quantile(double tau, std::optional<double> bandwidth) {
  ResidualSpec spec;
  spec.kind = ResidualKind::quantile;
  spec.tau = tau;
  spec.bandwidth = bandwidth;
  spec.validate();
  return spec;
}

void ResidualSpec::validate() const {
  if (kind != ResidualKind::quantile) return;
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::config, kModule, "tau must lie in (0, 1)");
  if (bandwidth && !(*bandwidth > 0.0)) throw Error(ErrorKind::config, kModule, "bandwidth must be positive");
}

std::string ResidualSpec::name() const {
  if (kind == ResidualKind::average) return "average";
  if (tau == 0.5) return "median";
  return "quantile(" + std::to_string(tau) + ")";
}

ResidualKind parse_residual_kind(const std::string& name) {
  if (name == "average" || name == "mean") return ResidualKind::average;
  if (name == "quantile" || name == "median") return ResidualKind::quantile;
  throw Error(ErrorKind::config, kModule, "unknown residual kind '" + name + "'");
}

double epanechnikov(double u) { return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0; }

double integrated_epanechnikov(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 + 0.75 * u - 0.25 * u * u * u;
}

double residual(const ResidualSpec& spec, double y, double g) {
  if (spec.kind == ResidualKind::average) return y - g;
  return spec.tau - (y < g ? 1.0 : 0.0);
}

double smoothed_residual(const ResidualSpec& spec, double y, double g, double h) {
  if (spec.kind == ResidualKind::average) return y - g;
  return spec.tau - integrated_epanechnikov((g - y) / h);
}

double smoothed_residual_dg(const ResidualSpec& spec, double y, double g, double h) {
  if (spec.kind == ResidualKind::average) return -1.0;
  return -epanechnikov((g - y) / h) / h;
}

double default_bandwidth(const Eigen::VectorXd& y) {
  const double n = static_cast<double>(y.size());
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / std::max(n - 1.0, 1.0));
  const double h = 1.06 * sd * std::pow(n, -1.0 / 3.0);
  if (!(h > 0.0)) throw Error(ErrorKind::data, kModule, "outcome has zero spread; cannot pick a bandwidth");
  return h;
}

double resolve_bandwidth(const ResidualSpec& spec, const Eigen::VectorXd& y) {
  if (spec.kind == ResidualKind::average) return 0.0;
  return spec.bandwidth ? *spec.bandwidth : default_bandwidth(y);
}

// ---------------------------------------------------------------------------

DoseResponseModel DoseResponseModel::polynomial(int degree) {
  if (degree < 0) throw Error(ErrorKind::config, kModule, "polynomial degree must be non-negative");
  DoseResponseModel m;
  m.p_ = degree + 1;
  m.linear_ = true;
  m.degree_ = degree;
  m.name_ = "poly" + std::to_string(degree);
  return m;
}

DoseResponseModel DoseResponseModel::custom(int p, ValueFn value, GradientFn gradient, std::string name,
                                            bool linear) {
  if (p < 1) throw Error(ErrorKind::config, kModule, "model dimension must be positive");
  if (!value || !gradient) throw Error(ErrorKind::config, kModule, "custom model needs value and gradient");
  DoseResponseModel m;
  m.p_ = p;
  m.linear_ = linear;
  m.name_ = std::move(name);
  m.value_ = std::move(value);
  m.gradient_ = std::move(gradient);
  return m;
}

double DoseResponseModel::value(double t, const Eigen::VectorXd& theta) const {
  if (theta.size() != p_) throw Error(ErrorKind::config, kModule, "theta has wrong dimension");
  if (degree_ >= 0) {
    double acc = 0.0;
    for (int j = degree_; j >= 0; --j) acc = acc * t + theta[j];
    return acc;
  }
  return value_(t, theta);
}

Eigen::VectorXd DoseResponseModel::gradient(double t, const Eigen::VectorXd& theta) const {
  if (theta.size() != p_) throw Error(ErrorKind::config, kModule, "theta has wrong dimension");
  if (degree_ >= 0) {
    Eigen::VectorXd g(p_);
    double pw = 1.0;
    for (int j = 0; j < p_; ++j) {
      g[j] = pw;
      pw *= t;
    }
    return g;
  }
  Eigen::VectorXd g = gradient_(t, theta);
  if (g.size() != p_) throw Error(ErrorKind::config, kModule, "model gradient has wrong dimension");
  return g;
}

int InstrumentSpec::dim(const DoseResponseModel& model) const {
  return kind == InstrumentKind::grad_g ? model.dim() : q;
}

void InstrumentSpec::validate(const DoseResponseModel& model) const {
  if (kind == InstrumentKind::power && q < model.dim()) {
    throw Error(ErrorKind::config, kModule,
                "instrument dimension q = " + std::to_string(q) + " is below p = " + std::to_string(model.dim()));
  }
}

Eigen::VectorXd InstrumentSpec::eval(double t, const Eigen::VectorXd& theta, const DoseResponseModel& model) const {
  if (kind == InstrumentKind::grad_g) return model.gradient(t, theta);
  Eigen::VectorXd w(q);
  double pw = 1.0;
  for (int j = 0; j < q; ++j) {
    w[j] = pw;
    pw *= t;
  }
  return w;
}

bool InstrumentSpec::depends_on_theta(const DoseResponseModel& model) const {
  return kind == InstrumentKind::grad_g && !model.linear();
}

InstrumentKind parse_instrument_kind(const std::string& name) {
  if (name == "grad_g" || name == "gradient") return InstrumentKind::grad_g;
  if (name == "power") return InstrumentKind::power;
  throw Error(ErrorKind::config, kModule, "unknown instrument kind '" + name + "'");
}

// ---------------------------------------------------------------------------

Eigen::VectorXd moment_vector(const Eigen::VectorXd& theta, const Dataset& data, const Eigen::VectorXd& weights,
                              const ResidualSpec& residual_spec, const DoseResponseModel& model,
                              const InstrumentSpec& instrument, const MomentOptions& options) {
  check_weights(data, weights);
  instrument.validate(model);
  const double div = divisor_for(options.divisor, data);
  const bool smooth = options.mode == IndicatorMode::smoothed && residual_spec.kind == ResidualKind::quantile;
  const double h = smooth ? options.bandwidth.value_or(resolve_bandwidth(residual_spec, data.y())) : 0.0;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(instrument.dim(model));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double t = data.t()[i];
    const double g = model.value(t, theta);
    const double r = smooth ? smoothed_residual(residual_spec, data.y()[i], g, h) : residual(residual_spec, data.y()[i], g);
    m += (weights[i] * r) * instrument.eval(t, theta, model);
  }
  return m / div;
}

Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& theta, const Dataset& data, const Eigen::VectorXd& weights,
                                const ResidualSpec& residual_spec, const DoseResponseModel& model,
                                const InstrumentSpec& instrument, const MomentOptions& options) {
  check_weights(data, weights);
  const auto p = model.dim();
  const auto q = instrument.dim(model);
  if (instrument.depends_on_theta(model)) {
    Eigen::MatrixXd jac(q, p);
    for (int j = 0; j < p; ++j) {
      const double step = 1e-6 * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd hi = theta;
      Eigen::VectorXd lo = theta;
      hi[j] += step;
      lo[j] -= step;
      jac.col(j) = (moment_vector(hi, data, weights, residual_spec, model, instrument, options) -
                    moment_vector(lo, data, weights, residual_spec, model, instrument, options)) /
                   (2.0 * step);
    }
    return jac;
  }
  const double div = divisor_for(options.divisor, data);
  const bool smooth = options.mode == IndicatorMode::smoothed && residual_spec.kind == ResidualKind::quantile;
  if (residual_spec.kind == ResidualKind::quantile && !smooth) {
    throw Error(ErrorKind::unsupported, kModule, "the sharp quantile moment is not differentiable");
  }
  const double h = smooth ? options.bandwidth.value_or(resolve_bandwidth(residual_spec, data.y())) : 0.0;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q, p);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double t = data.t()[i];
    const double g = model.value(t, theta);
    const double dm = smoothed_residual_dg(residual_spec, data.y()[i], g, h);
    if (dm == 0.0) continue;
    jac.noalias() += (weights[i] * dm) * instrument.eval(t, theta, model) * model.gradient(t, theta).transpose();
  }
  return jac / div;
}

Eigen::VectorXd weighted_residuals(const Eigen::VectorXd& theta, const Dataset& data, const Eigen::VectorXd& weights,
                                   const ResidualSpec& residual_spec, const DoseResponseModel& model,
                                   std::optional<double> smoothing_bandwidth) {
  check_weights(data, weights);
  Eigen::VectorXd u(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double g = model.value(data.t()[i], theta);
    u[i] = weights[i] * (smoothing_bandwidth ? smoothed_residual(residual_spec, data.y()[i], g, *smoothing_bandwidth)
                                             : residual(residual_spec, data.y()[i], g));
  }
  return u;
}

ThetaFit fit_theta(const Dataset& data, const Eigen::VectorXd& weights, const ResidualSpec& residual_spec,
                   const DoseResponseModel& model, const InstrumentSpec& instrument, const ThetaOptions& options) {
  residual_spec.validate();
  instrument.validate(model);
  check_weights(data, weights);
  const auto p = model.dim();
  const bool quantile = residual_spec.kind == ResidualKind::quantile;
  const double tol = options.tol.value_or(quantile ? 1e-6 : 1e-8);

  MomentOptions mopts;
  mopts.mode = IndicatorMode::smoothed;
  mopts.divisor = options.divisor;
  ThetaFit fit;
  if (quantile) {
    fit.bandwidth = resolve_bandwidth(residual_spec, data.y());
    mopts.bandwidth = fit.bandwidth;
  }

  auto moments = [&](const Eigen::VectorXd& th) {
    return moment_vector(th, data, weights, residual_spec, model, instrument, mopts);
  };
  auto objective = [&](const Eigen::VectorXd& th) { return moments(th).squaredNorm(); };
  auto finish = [&](Eigen::VectorXd theta, const Eigen::VectorXd& grad) {
    fit.theta = std::move(theta);
    fit.objective = moments(fit.theta).norm();
    fit.gradient_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    fit.residuals = weighted_residuals(fit.theta, data, weights, residual_spec, model,
                                       quantile ? std::optional<double>(fit.bandwidth) : std::nullopt);
    fit.outside_box = (fit.theta.array().abs() > kThetaBox).any();
    return fit;
  };

  // Closed form: the average moment is affine in theta when g is linear and w
  // does not depend on theta, so ||M||^2 is minimized by least squares.
  const bool closed_form = !quantile && model.linear() && !instrument.depends_on_theta(model);
  if (closed_form || (!options.start && model.linear() && !instrument.depends_on_theta(model))) {
    const double div = divisor_for(options.divisor, data);
    const auto q = instrument.dim(model);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const double t = data.t()[i];
      const Eigen::VectorXd w = instrument.eval(t, zero, model);
      a.noalias() += weights[i] * w * model.gradient(t, zero).transpose();
      b.noalias() += (weights[i] * data.y()[i]) * w;
    }
    a /= div;
    b /= div;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < p) {
      throw Error(ErrorKind::conditioning, kModule, "singular normal equations for the dose-response model");
    }
    Eigen::VectorXd theta = qr.solve(b);
    if (closed_form) {
      fit.method = "closed-form";
      const Eigen::MatrixXd jac = moment_jacobian(theta, data, weights, residual_spec, model, instrument, mopts);
      return finish(theta, 2.0 * jac.transpose() * moments(theta));
    }
    // Quantile: start from the average-case fit.
    return fit_theta(data, weights, residual_spec, model, instrument,
                     ThetaOptions{theta, options.divisor, options.tol, options.max_iter});
  }

  Eigen::VectorXd theta = options.start.value_or(Eigen::VectorXd::Zero(p));
  if (theta.size() != p || !theta.allFinite()) {
    throw Error(ErrorKind::config, kModule, "start point must be a finite vector of dimension p");
  }
  const double start_value = objective(theta);

  auto gauss_newton = [&](Eigen::VectorXd& th, int max_iter, Eigen::VectorXd& grad) {
    double value = objective(th);
    double mu = -1.0;
    for (int iter = 0; iter < max_iter; ++iter) {
      const Eigen::VectorXd m = moments(th);
      const Eigen::MatrixXd jac = moment_jacobian(th, data, weights, residual_spec, model, instrument, mopts);
      grad = 2.0 * jac.transpose() * m;
      if (grad.cwiseAbs().maxCoeff() <= tol) return true;
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      if (mu < 0.0) mu = 1e-6 * std::max(jtj.diagonal().maxCoeff(), 1e-12);
      bool accepted = false;
      while (mu < 1e12 * std::max(jtj.diagonal().maxCoeff(), 1.0)) {
        Eigen::MatrixXd lhs = jtj;
        lhs.diagonal().array() += mu;
        const Eigen::VectorXd step = -lhs.ldlt().solve(jac.transpose() * m);
        const Eigen::VectorXd trial = th + step;
        const double trial_value = objective(trial);
        if (std::isfinite(trial_value) && trial_value < value) {
          th = trial;
          value = trial_value;
          mu = std::max(mu / 3.0, 1e-15);
          accepted = true;
          ++fit.iterations;
          break;
        }
        mu *= 4.0;
      }
      if (!accepted) return false;
    }
    const Eigen::VectorXd m = moments(th);
    grad = 2.0 * moment_jacobian(th, data, weights, residual_spec, model, instrument, mopts).transpose() * m;
    return grad.cwiseAbs().maxCoeff() <= tol;
  };

  Eigen::VectorXd grad;
  fit.method = "gauss-newton";
  if (gauss_newton(theta, options.max_iter, grad)) return finish(theta, grad);

  fit.method = "simplex";
  theta = nelder_mead(objective, theta, 400 * static_cast<int>(p + 1));
  if (gauss_newton(theta, options.max_iter, grad)) return finish(theta, grad);

  if (objective(theta) > start_value) theta = options.start.value_or(Eigen::VectorXd::Zero(p));
  throw ConvergenceError(kModule,
                         "theta estimation did not reach gradient tolerance (sup-norm " +
                             std::to_string(grad.cwiseAbs().maxCoeff()) + ")",
                         grad.cwiseAbs().maxCoeff(), theta);
}

}  // namespace ctspec
