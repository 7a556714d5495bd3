#include "ctspec/null_approx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ctspec/errors.hpp"
#include "ctspec/random.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "null_approx";

double sample_sd(const Eigen::VectorXd& v) {
  const double n = static_cast<double>(v.size());
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / (n - 1.0));
}

// (A'A/N + ridge I)^-1 A'/N, so that A * result projects onto span(A).
Eigen::MatrixXd ridge_projector(const Eigen::MatrixXd& a, double ridge) {
  const double n = static_cast<double>(a.rows());
  Eigen::MatrixXd gram = a.transpose() * a / n;
  gram.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw Error(ErrorKind::conditioning, kModule, "singular series design in plug-in regression");
  }
  Eigen::MatrixXd proj = ldlt.solve(a.transpose() / n);
  if (!proj.allFinite()) throw Error(ErrorKind::conditioning, kModule, "non-finite plug-in regression coefficients");
  return proj;
}

}  // namespace

Eigen::VectorXd conditional_density_at(const Dataset& data, const Eigen::VectorXd& y0, double bandwidth_scale) {
  if (!(bandwidth_scale > 0.0) || !std::isfinite(bandwidth_scale)) {
    throw Error(ErrorKind::config, kModule, "density bandwidth scale must be positive");
  }
  const Eigen::Index n = data.size();
  const Eigen::Index r = data.dim();
  if (y0.size() != n) throw Error(ErrorKind::config, kModule, "density evaluation points differ in length");

  // Conditioning columns (T, X) on the standardized scale; Y on its own scale.
  Eigen::MatrixXd cond(n, r + 1);
  cond.col(0) = data.t_std();
  cond.rightCols(r) = data.x_std();
  const double rate = std::pow(static_cast<double>(n), -1.0 / static_cast<double>(r + 2 + 4));
  std::vector<Eigen::Index> active;
  std::vector<double> inv_h;
  for (Eigen::Index j = 0; j < cond.cols(); ++j) {
    const double h = bandwidth_scale * 1.06 * sample_sd(cond.col(j)) * rate;
    if (h > 0.0) {
      active.push_back(j);
      inv_h.push_back(1.0 / h);
    }
  }
  const double hy = bandwidth_scale * 1.06 * sample_sd(data.y()) * rate;
  if (!(hy > 0.0)) throw Error(ErrorKind::config, kModule, "outcome bandwidth is zero (constant outcome)");

  Eigen::MatrixXd scaled(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) scaled.col(static_cast<Eigen::Index>(k)) = cond.col(active[k]) * inv_h[k];
  const Eigen::MatrixXd st = scaled.transpose();
  const Eigen::VectorXd y = data.y() / hy;
  const double norm_y = 1.0 / (hy * std::sqrt(2.0 * std::numbers::pi));

  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = y0[i] / hy;
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d2 = (st.col(j) - st.col(i)).squaredNorm();
      const double k = std::exp(-0.5 * d2);
      const double dy = y[j] - yi;
      num += k * std::exp(-0.5 * dy * dy);
      den += k;
    }
    f[i] = den > 0.0 ? norm_y * num / den : 0.0;
  }
  return f;
}

InfluenceEstimator::InfluenceEstimator(const Dataset& data, const BalanceFit& balance, const ThetaFit& theta,
                                       const ResidualSpec& residual, const DoseResponseModel& model,
                                       const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn,
                                       const PluginOptions& options)
    : residual_(residual), model_(model), instrument_(instrument), weight_fn_(weight_fn) {
  if (balance.weights.size() != data.size()) {
    throw Error(ErrorKind::config, kModule, "balance fit and dataset differ in length");
  }
  pi_ = balance.weights;
  build(data, options.sieve.value_or(balance.spec), theta, options);
}

InfluenceEstimator::InfluenceEstimator(const Dataset& data, const Eigen::VectorXd& weights,
                                       const SieveSpec& plugin_sieve, const ThetaFit& theta,
                                       const ResidualSpec& residual, const DoseResponseModel& model,
                                       const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn,
                                       const PluginOptions& options)
    : residual_(residual), model_(model), instrument_(instrument), weight_fn_(weight_fn) {
  if (weights.size() != data.size()) throw Error(ErrorKind::config, kModule, "weights and dataset differ in length");
  pi_ = weights;
  build(data, options.sieve.value_or(plugin_sieve), theta, options);
}

void InfluenceEstimator::build(const Dataset& data, const SieveSpec& plugin_sieve, const ThetaFit& theta,
                               const PluginOptions& options) {
  residual_.validate();
  weight_fn_.validate();
  instrument_.validate(model_);
  if (!(options.ridge >= 0.0)) throw Error(ErrorKind::config, kModule, "plug-in ridge must be non-negative");
  if (theta.theta.size() != model_.dim()) throw Error(ErrorKind::config, kModule, "theta has wrong dimension");

  const Eigen::Index n = data.size();
  const int p = model_.dim();
  const int q = instrument_.dim(model_);
  t_std_ = weight_treatments(data, weight_fn_.scale);
  const bool smooth = residual_.kind == ResidualKind::quantile && theta.bandwidth > 0.0;

  m_.resize(n);
  Eigen::VectorXd g(n);
  grad_g_.resize(n, p);
  w_.resize(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = data.t()[i];
    g[i] = model_.value(ti, theta.theta);
    m_[i] = smooth ? smoothed_residual(residual_, data.y()[i], g[i], theta.bandwidth) : residual(residual_, data.y()[i], g[i]);
    grad_g_.row(i) = model_.gradient(ti, theta.theta).transpose();
    w_.row(i) = instrument_.eval(ti, theta.theta, model_).transpose();
  }
  u_hat_ = pi_.cwiseProduct(m_);

  const Eigen::MatrixXd u = design_u(plugin_sieve, data.t_std());
  v_ = design_v(plugin_sieve, data.x_std());
  const Eigen::MatrixXd z = tensor_design(u, v_);
  cond_mean_ = z * (ridge_projector(z, options.ridge) * m_);
  v_solve_ = ridge_projector(v_, options.ridge);

  if (residual_.kind == ResidualKind::average) {
    dm_dg_ = Eigen::VectorXd::Constant(n, -1.0);
  } else {
    dm_dg_ = -conditional_density_at(data, g, options.density_bandwidth_scale);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::VectorXd pd = pi_.cwiseProduct(dm_dg_);
  gamma_ = inv_n * grad_g_.transpose() * pd.asDiagonal() * w_;

  // Bracketed term of psi: pi w m - pi w E[m|T,X] + E[pi w m | X].
  const Eigen::MatrixXd pwm = (u_hat_.asDiagonal() * w_);
  wm_given_x_ = project_on_x(pwm);
  const Eigen::MatrixXd bracket =
      pwm - (pi_.cwiseProduct(cond_mean_)).asDiagonal() * w_ + wm_given_x_;

  Eigen::MatrixXd coef;  // p x q
  if (instrument_.kind == InstrumentKind::grad_g) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gamma_);
    if (!lu.isInvertible()) throw Error(ErrorKind::conditioning, kModule, "moment Jacobian is singular");
    coef = lu.inverse();
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gamma_ * gamma_.transpose());
    if (!lu.isInvertible()) throw Error(ErrorKind::conditioning, kModule, "moment Jacobian is rank deficient");
    coef = lu.solve(gamma_);
  }
  psi_coef_ = bracket * coef.transpose();
}

Eigen::MatrixXd InfluenceEstimator::project_on_x(const Eigen::MatrixXd& values) const {
  return v_ * (v_solve_ * values);
}

InfluenceComponents InfluenceEstimator::evaluate(const Eigen::VectorXd& eval_points) const {
  const Eigen::MatrixXd h = weight_matrix(weight_fn_, t_std_, eval_points);
  const double inv_n = 1.0 / static_cast<double>(size());
  InfluenceComponents out;
  out.uh = u_hat_.asDiagonal() * h;
  out.phi = (pi_.cwiseProduct(cond_mean_)).asDiagonal() * h - project_on_x(out.uh);
  // a(t) = N^-1 sum_i pi_i (dm/dg)_i grad_g_i H(T_i, t), p x M.
  const Eigen::MatrixXd a = inv_n * grad_g_.transpose() * (pi_.cwiseProduct(dm_dg_)).asDiagonal() * h;
  out.psi = psi_coef_ * a;
  out.eta = out.uh - out.phi - out.psi;
  return out;
}

Eigen::MatrixXd InfluenceEstimator::eta(const Eigen::VectorXd& eval_points) const {
  return evaluate(eval_points).eta;
}

InfluenceComponents estimate_influence(const Dataset& data, const BalanceFit& balance, const ThetaFit& theta,
                                       const ResidualSpec& residual, const DoseResponseModel& model,
                                       const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn,
                                       const Eigen::VectorXd& eval_points, const PluginOptions& options) {
  return InfluenceEstimator(data, balance, theta, residual, model, instrument, weight_fn, options).evaluate(eval_points);
}

Eigen::MatrixXd multiplier_matrix(int B, Eigen::Index n, std::uint64_t seed) {
  if (B < 1) throw Error(ErrorKind::config, kModule, "bootstrap size B must be at least 1");
  Eigen::MatrixXd w(B, n);
  for (int b = 0; b < B; ++b) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(b)});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) w(b, i) = normal(rng);
  }
  return w;
}

double bootstrap_p_value(const Eigen::VectorXd& draws, double observed) {
  if (draws.size() == 0) return 1.0;
  const auto hits = (draws.array() >= observed).count();
  return static_cast<double>(hits) / static_cast<double>(draws.size());
}

namespace {

struct DrawAccumulator {
  Eigen::VectorXd sum_sq;
  Eigen::VectorXd sup;

  explicit DrawAccumulator(int B) : sum_sq(Eigen::VectorXd::Zero(B)), sup(Eigen::VectorXd::Zero(B)) {}

  // jstar: B x block, the first `sample_cols` columns being sample treatments.
  void add(const Eigen::MatrixXd& jstar, Eigen::Index sample_cols) {
    if (sample_cols > 0) sum_sq += jstar.leftCols(sample_cols).rowwise().squaredNorm();
    if (jstar.cols() > 0) sup = sup.cwiseMax(jstar.cwiseAbs().rowwise().maxCoeff());
  }

  BootstrapResult finish(Eigen::Index n_sample, const TestStatistics& observed, int B, std::uint64_t seed) const {
    BootstrapResult res;
    res.draws_cm = n_sample > 0 ? Eigen::VectorXd(sum_sq / static_cast<double>(n_sample)) : sum_sq;
    res.draws_ks = sup;
    res.p_cm = bootstrap_p_value(res.draws_cm, observed.cm);
    res.p_ks = bootstrap_p_value(res.draws_ks, observed.ks);
    res.B = B;
    res.seed = seed;
    return res;
  }
};

}  // namespace

BootstrapResult multiplier_bootstrap(const Eigen::MatrixXd& eta, Eigen::Index n_sample, const TestStatistics& observed,
                                     int B, std::uint64_t seed) {
  if (!eta.allFinite()) throw Error(ErrorKind::data, kModule, "influence matrix has non-finite entries");
  if (n_sample > eta.cols()) throw Error(ErrorKind::config, kModule, "more sample columns than evaluation points");
  const Eigen::MatrixXd w = multiplier_matrix(B, eta.rows(), seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(eta.rows()));
  DrawAccumulator acc(B);
  acc.add(scale * (w * eta), n_sample);
  return acc.finish(n_sample, observed, B, seed);
}

BootstrapResult multiplier_bootstrap(const InfluenceEstimator& estimator, const Eigen::VectorXd& eval_points,
                                     Eigen::Index n_sample, const TestStatistics& observed, int B, std::uint64_t seed,
                                     Eigen::Index block_size) {
  return multiplier_bootstrap(estimator, eval_points, n_sample, observed, multiplier_matrix(B, estimator.size(), seed),
                              seed, block_size);
}

BootstrapResult multiplier_bootstrap(const InfluenceEstimator& estimator, const Eigen::VectorXd& eval_points,
                                     Eigen::Index n_sample, const TestStatistics& observed,
                                     const Eigen::MatrixXd& multipliers, std::uint64_t seed, Eigen::Index block_size) {
  if (multipliers.cols() != estimator.size()) {
    throw Error(ErrorKind::config, kModule, "multiplier matrix does not match the sample size");
  }
  if (n_sample > eval_points.size()) throw Error(ErrorKind::config, kModule, "more sample columns than evaluation points");
  if (block_size < 1) block_size = 1;
  const int B = static_cast<int>(multipliers.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(estimator.size()));
  DrawAccumulator acc(B);
  for (Eigen::Index start = 0; start < eval_points.size(); start += block_size) {
    const Eigen::Index len = std::min(block_size, eval_points.size() - start);
    const Eigen::MatrixXd eta = estimator.eta(eval_points.segment(start, len));
    if (!eta.allFinite()) throw Error(ErrorKind::data, kModule, "influence matrix has non-finite entries");
    const Eigen::Index sample_cols = std::clamp<Eigen::Index>(n_sample - start, 0, len);
    acc.add(scale * (multipliers * eta), sample_cols);
  }
  return acc.finish(n_sample, observed, B, seed);
}

}  // namespace ctspec
