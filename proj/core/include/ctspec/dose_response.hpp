#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"

namespace ctspec {

enum class ResidualKind { average, quantile };

/// Generalized residual m{y; g}: y - g (average) or tau - 1{y < g} (quantile).
struct ResidualSpec {
  ResidualKind kind = ResidualKind::average;
  double tau = 0.5;
  std::optional<double> bandwidth;  // quantile smoothing; default rule when unset

  static ResidualSpec average() { return {}; }
  static ResidualSpec quantile(double tau, std::optional<double> bandwidth = std::nullopt);

  void validate() const;
  std::string name() const;
};

ResidualKind parse_residual_kind(const std::string& name);

/// How the quantile indicator enters a moment: exactly, or replaced by the
/// integrated Epanechnikov kernel S((g - y) / h).
enum class IndicatorMode { sharp, smoothed };

double epanechnikov(double u);
double integrated_epanechnikov(double u);

/// m{y; g} with the sharp indicator.
double residual(const ResidualSpec& spec, double y, double g);
/// m{y; g} with the smoothed indicator (identical to `residual` for averages).
double smoothed_residual(const ResidualSpec& spec, double y, double g, double h);
/// d/dg of the smoothed residual.
double smoothed_residual_dg(const ResidualSpec& spec, double y, double g, double h);

/// h = 1.06 * sd(Y) * N^(-1/3).
double default_bandwidth(const Eigen::VectorXd& y);
double resolve_bandwidth(const ResidualSpec& spec, const Eigen::VectorXd& y);

/// Parametric dose-response family g(t; theta), evaluated on the original
/// treatment scale.
class DoseResponseModel {
 public:
  using ValueFn = std::function<double(double, const Eigen::VectorXd&)>;
  using GradientFn = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

  /// theta_0 + theta_1 t + ... + theta_d t^d (p = d + 1).
  static DoseResponseModel polynomial(int degree);
  /// User-supplied family; `linear` declares g linear in theta.
  static DoseResponseModel custom(int p, ValueFn value, GradientFn gradient, std::string name, bool linear = false);

  int dim() const { return p_; }
  bool linear() const { return linear_; }
  const std::string& name() const { return name_; }

  double value(double t, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(double t, const Eigen::VectorXd& theta) const;

 private:
  DoseResponseModel() = default;

  int p_ = 0;
  bool linear_ = false;
  std::string name_;
  int degree_ = -1;  // >= 0 for the built-in polynomial
  ValueFn value_;
  GradientFn gradient_;
};

enum class InstrumentKind { grad_g, power };

/// Instrument vector w(T; theta): the model gradient, or (1, T, ..., T^{q-1}).
struct InstrumentSpec {
  InstrumentKind kind = InstrumentKind::grad_g;
  int q = 0;  // power kind only

  static InstrumentSpec grad_g() { return {}; }
  static InstrumentSpec power(int q) { return {InstrumentKind::power, q}; }

  int dim(const DoseResponseModel& model) const;
  Eigen::VectorXd eval(double t, const Eigen::VectorXd& theta, const DoseResponseModel& model) const;
  bool depends_on_theta(const DoseResponseModel& model) const;
  void validate(const DoseResponseModel& model) const;
};

InstrumentKind parse_instrument_kind(const std::string& name);

struct MomentOptions {
  IndicatorMode mode = IndicatorMode::smoothed;
  std::optional<double> bandwidth;  // overrides the residual spec / default rule
  std::optional<double> divisor;    // defaults to N
};

/// M_N(theta, pi) = divisor^-1 sum_i pi_i m{Y_i; g(T_i; theta)} w(T_i; theta).
Eigen::VectorXd moment_vector(const Eigen::VectorXd& theta, const Dataset& data, const Eigen::VectorXd& weights,
                              const ResidualSpec& residual, const DoseResponseModel& model,
                              const InstrumentSpec& instrument, const MomentOptions& options = {});

/// d M_N / d theta (q x p).
Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& theta, const Dataset& data, const Eigen::VectorXd& weights,
                                const ResidualSpec& residual, const DoseResponseModel& model,
                                const InstrumentSpec& instrument, const MomentOptions& options = {});

struct ThetaFit {
  Eigen::VectorXd theta;
  double objective = 0.0;       // ||M_N(theta_hat)||
  double gradient_norm = 0.0;   // sup-norm of the gradient of ||M_N||^2
  Eigen::VectorXd residuals;    // U_hat_i = pi_i m{Y_i; g(T_i; theta_hat)}, indicator smoothed as in the fit
  int iterations = 0;
  std::string method;           // "closed-form", "gauss-newton" or "simplex"
  bool outside_box = false;     // some |theta_j| > 1e6
  double bandwidth = 0.0;       // smoothing bandwidth used (quantile)
};

struct ThetaOptions {
  std::optional<Eigen::VectorXd> start;
  std::optional<double> divisor;  // defaults to N
  std::optional<double> tol;      // 1e-8 average, 1e-6 quantile
  int max_iter = 200;
};

/// Minimizes ||M_N(theta, pi)||. Average residual with g linear in theta and
/// an instrument not depending on theta is solved in closed form (weighted
/// least squares when w = grad g); everything else by Levenberg-damped
/// Gauss-Newton with a Nelder-Mead fallback.
ThetaFit fit_theta(const Dataset& data, const Eigen::VectorXd& weights, const ResidualSpec& residual,
                   const DoseResponseModel& model, const InstrumentSpec& instrument, const ThetaOptions& options = {});

/// U_hat_i = pi_i m{Y_i; g(T_i; theta)}; the quantile indicator is sharp
/// unless a smoothing bandwidth is given.
Eigen::VectorXd weighted_residuals(const Eigen::VectorXd& theta, const Dataset& data, const Eigen::VectorXd& weights,
                                   const ResidualSpec& residual, const DoseResponseModel& model,
                                   std::optional<double> smoothing_bandwidth = std::nullopt);

}  // namespace ctspec
