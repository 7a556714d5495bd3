#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"
#include "ctspec/dose_response.hpp"
#include "ctspec/entropy_balance.hpp"
#include "ctspec/sieve_basis.hpp"
#include "ctspec/spec_test.hpp"

namespace ctspec {

struct PluginOptions {
  double ridge = 1e-8;                    // added to the normal equations of every series regression
  double density_bandwidth_scale = 1.0;   // multiplies the rule-of-thumb bandwidths
  std::optional<SieveSpec> sieve;         // defaults to the balancing sieve
};

/// Plug-in estimates of the influence representation
///   eta(t) = U H(T, t) - phi(T, X; t) - psi(T, X, Y; t)
/// at a set of evaluation points. All matrices are N x M.
struct InfluenceComponents {
  Eigen::MatrixXd uh;   // U_hat_i H(T_i, t)
  Eigen::MatrixXd phi;
  Eigen::MatrixXd psi;
  Eigen::MatrixXd eta;
};

/// Precomputes every t-independent piece of the influence estimate, then
/// evaluates phi/psi/eta for any block of evaluation points. The regression
/// of pi m H(., t) on v(X) reuses one factorization of the v-basis Gram
/// matrix across all t.
///
/// - E[m | T, X]: ridge series regression of m{Y; g(T; theta_hat)} on u(T) (x) v(X).
/// - E[. | X]: ridge series regression on v(X).
/// - d/dg E[m | T, X]: -1 for averages, minus a product-Gaussian-kernel
///   estimate of f_{Y|T,X}(g(T; theta_hat) | T, X) for quantiles.
/// - population expectations: sample means.
class InfluenceEstimator {
 public:
  InfluenceEstimator(const Dataset& data, const BalanceFit& balance, const ThetaFit& theta,
                     const ResidualSpec& residual, const DoseResponseModel& model, const InstrumentSpec& instrument,
                     const WeightFunctionSpec& weight_fn, const PluginOptions& options = {});

  /// Builds the estimator from explicit weights (e.g. the true ratio function).
  InfluenceEstimator(const Dataset& data, const Eigen::VectorXd& weights, const SieveSpec& plugin_sieve,
                     const ThetaFit& theta, const ResidualSpec& residual, const DoseResponseModel& model,
                     const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn,
                     const PluginOptions& options = {});

  Eigen::Index size() const { return t_std_.size(); }

  InfluenceComponents evaluate(const Eigen::VectorXd& eval_points) const;
  Eigen::MatrixXd eta(const Eigen::VectorXd& eval_points) const;

  const Eigen::VectorXd& cond_mean() const { return cond_mean_; }   // E_hat[m | T_i, X_i]
  const Eigen::VectorXd& dm_dg() const { return dm_dg_; }           // d/dg E_hat[m | T_i, X_i]
  const Eigen::VectorXd& residual_values() const { return m_; }     // m{Y_i; g(T_i; theta_hat)}
  const Eigen::VectorXd& weights() const { return pi_; }
  const Eigen::MatrixXd& model_gradients() const { return grad_g_; } // N x p
  const Eigen::MatrixXd& instruments() const { return w_; }          // N x q
  /// E_hat[pi w m | X_i] (N x q).
  const Eigen::MatrixXd& instrument_projection() const { return wm_given_x_; }
  /// Rows: {Gamma Gamma'}^-1 Gamma applied to the bracketed term of psi (N x p).
  const Eigen::MatrixXd& psi_coefficients() const { return psi_coef_; }
  /// Gamma = N^-1 sum pi (dm/dg) grad_g w' (p x q).
  const Eigen::MatrixXd& gamma() const { return gamma_; }

  /// Regression of the columns of `values` (N x k) on v(X), fitted values.
  Eigen::MatrixXd project_on_x(const Eigen::MatrixXd& values) const;

 private:
  void build(const Dataset& data, const SieveSpec& plugin_sieve, const ThetaFit& theta, const PluginOptions& options);

  ResidualSpec residual_;
  DoseResponseModel model_;
  InstrumentSpec instrument_;
  WeightFunctionSpec weight_fn_;

  Eigen::VectorXd t_std_;      // treatments on the weight-function scale
  Eigen::VectorXd pi_;
  Eigen::VectorXd m_;
  Eigen::VectorXd u_hat_;
  Eigen::VectorXd cond_mean_;
  Eigen::VectorXd dm_dg_;
  Eigen::MatrixXd grad_g_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd v_;          // N x K2 plug-in design
  Eigen::MatrixXd v_solve_;    // (V'V/N + ridge I)^-1 V'/N, K2 x N
  Eigen::MatrixXd wm_given_x_;
  Eigen::MatrixXd gamma_;
  Eigen::MatrixXd psi_coef_;
};

InfluenceComponents estimate_influence(const Dataset& data, const BalanceFit& balance, const ThetaFit& theta,
                                       const ResidualSpec& residual, const DoseResponseModel& model,
                                       const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn,
                                       const Eigen::VectorXd& eval_points, const PluginOptions& options = {});

/// Product-Gaussian-kernel estimate of f_{Y|T,X}(y0_i | T_i, X_i) for every
/// observation, with rule-of-thumb bandwidths 1.06 sd N^(-1/(d+4)) per
/// coordinate (d = r + 2), multiplied by `bandwidth_scale`.
Eigen::VectorXd conditional_density_at(const Dataset& data, const Eigen::VectorXd& y0, double bandwidth_scale = 1.0);

struct BootstrapResult {
  Eigen::VectorXd draws_cm;
  Eigen::VectorXd draws_ks;
  double p_cm = 1.0;
  double p_ks = 1.0;
  int B = 0;
  std::uint64_t seed = 0;
};

/// B x N standard normal multipliers; row b comes from the substream (seed, b).
Eigen::MatrixXd multiplier_matrix(int B, Eigen::Index n, std::uint64_t seed);

/// B^-1 sum_b 1{draw_b >= observed}.
double bootstrap_p_value(const Eigen::VectorXd& draws, double observed);

/// Multiplier bootstrap J*_b(t) = N^-1/2 sum_i w_ib eta_i(t). The first
/// `n_sample` columns of eta are the sample treatments (CM); all columns form
/// the sup grid (KS).
BootstrapResult multiplier_bootstrap(const Eigen::MatrixXd& eta, Eigen::Index n_sample, const TestStatistics& observed,
                                     int B, std::uint64_t seed);

/// Same, evaluating eta block by block so that N x M never has to be stored.
BootstrapResult multiplier_bootstrap(const InfluenceEstimator& estimator, const Eigen::VectorXd& eval_points,
                                     Eigen::Index n_sample, const TestStatistics& observed, int B, std::uint64_t seed,
                                     Eigen::Index block_size = 1024);

/// Same, with a caller-supplied B x N multiplier matrix (shared across weight
/// functions within one replication).
BootstrapResult multiplier_bootstrap(const InfluenceEstimator& estimator, const Eigen::VectorXd& eval_points,
                                     Eigen::Index n_sample, const TestStatistics& observed,
                                     const Eigen::MatrixXd& multipliers, std::uint64_t seed,
                                     Eigen::Index block_size = 1024);

}  // namespace ctspec
