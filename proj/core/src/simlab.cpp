#include "ctspec/simlab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "ctspec/entropy_balance.hpp"
#include "ctspec/errors.hpp"
#include "ctspec/null_approx.hpp"
#include "ctspec/parallel.hpp"
#include "ctspec/random.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "simlab";

struct Node {
  double x;
  double w;
};

// 2000-point Gauss-Legendre rule mapped to [0, 1].
const std::vector<Node>& legendre_nodes() {
  static const std::vector<Node> nodes = [] {
    using Rule = boost::math::quadrature::gauss<double, 2000>;
    const auto& a = Rule::abscissa();
    const auto& w = Rule::weights();
    std::vector<Node> out;
    out.reserve(2 * a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] == 0.0) {
        out.push_back({0.5, 0.5 * w[k]});
      } else {
        out.push_back({0.5 * (1.0 - a[k]), 0.5 * w[k]});
        out.push_back({0.5 * (1.0 + a[k]), 0.5 * w[k]});
      }
    }
    return out;
  }();
  return nodes;
}

template <typename F>
double integrate_x(F&& f) {
  double s = 0.0;
  for (const auto& n : legendre_nodes()) s += n.w * f(n.x);
  return s;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

bool linear_dgp(DgpId id) { return id == DgpId::dgp0_l || id == DgpId::dgp1_l; }

double outcome(DgpId id, double t, double x, double eps) {
  switch (id) {
    case DgpId::dgp0_l: return 1.0 + x + t + eps;
    case DgpId::dgp0_nl: return x * x + t + eps;
    case DgpId::dgp1_l: return 1.0 + x + 0.1 * t * t * t + eps;
    case DgpId::dgp1_nl: return x * x + 0.2 * t * t * t + eps;
  }
  return 0.0;
}

// tau-quantile of h(X) + eps with X ~ U[0, 1], eps ~ N(0, 1).
template <typename H>
double quantile_of_sum(H&& h, double tau) {
  auto f = [&](double m) { return integrate_x([&](double x) { return normal_cdf(m - h(x)); }) - tau; };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(f, -20.0, 20.0, tol, iters);
  return 0.5 * (lo + hi);
}

std::uint64_t cell_seed(const McCase& cell, std::uint64_t root) {
  const auto tau_bits = std::bit_cast<std::uint64_t>(cell.residual.kind == ResidualKind::quantile ? cell.residual.tau : -1.0);
  return derive_seed(root, {static_cast<std::uint64_t>(cell.residual.kind), tau_bits,
                            static_cast<std::uint64_t>(cell.dgp), static_cast<std::uint64_t>(cell.n)});
}

struct RepOutcome {
  bool ok = false;
  std::string message;
  Eigen::VectorXd theta;
  GridPoint sieve;
  std::vector<double> p_cm;
  std::vector<double> p_ks;
};

SieveSpec select_sieve(const Dataset& data, const ResidualSpec& residual, const DoseResponseModel& model,
                       const InstrumentSpec& instrument, const McOptions& options, std::uint64_t seed) {
  if (options.sieve) return *options.sieve;
  CVOptions cv;
  cv.folds = options.folds;
  cv.seed = seed;
  cv.threads = 1;
  const int r = static_cast<int>(data.dim());
  const auto grid = options.grid.value_or(default_grid(r));
  const CVResult res = cross_validate(data, grid, residual, model, instrument, cv);
  return sieve_for(res.selected, r, cv);
}

RepOutcome run_replication(const McCase& cell, const McOptions& options, std::uint64_t rep_seed,
                           const std::optional<SieveSpec>& frozen) {
  RepOutcome out;
  try {
    const DoseResponseModel model = DoseResponseModel::polynomial(options.model_degree);
    const InstrumentSpec instrument = InstrumentSpec::grad_g();
    const SimSample sample = generate({cell.dgp, cell.n, cell.local_a, false}, derive_seed(rep_seed, {0}), cell.residual);
    const Dataset& data = sample.data;
    const SieveSpec sieve =
        frozen ? *frozen : select_sieve(data, cell.residual, model, instrument, options, derive_seed(rep_seed, {1}));
    out.sieve = {sieve.k1, sieve.k2};
    const BalanceFit fit = fit_weights(data, sieve);
    const ThetaFit theta = fit_theta(data, fit.weights, cell.residual, model, instrument);
    const Eigen::MatrixXd multipliers = multiplier_matrix(options.B, data.size(), derive_seed(rep_seed, {2}));
    for (const auto& wf : cell.weights) {
      const Eigen::VectorXd points = evaluation_points(weight_treatments(data, wf.scale));
      const TestStatistics stats = compute_statistics(theta.residuals, data, wf);
      const InfluenceEstimator est(data, fit, theta, cell.residual, model, instrument, wf);
      const BootstrapResult boot = multiplier_bootstrap(est, points, data.size(), stats, multipliers, rep_seed);
      out.p_cm.push_back(boot.p_cm);
      out.p_ks.push_back(boot.p_ks);
    }
    out.theta = theta.theta;
    out.ok = true;
  } catch (const Error& e) {
    out.message = e.what();
  }
  return out;
}

std::optional<SieveSpec> first_rep_sieve(const McCase& cell, const McOptions& options, std::uint64_t seed) {
  if (options.sieve) return options.sieve;
  if (options.cv_every_rep) return std::nullopt;
  const DoseResponseModel model = DoseResponseModel::polynomial(options.model_degree);
  const std::uint64_t rep_seed = derive_seed(seed, {0});
  const SimSample sample = generate({cell.dgp, cell.n, cell.local_a, false}, derive_seed(rep_seed, {0}), cell.residual);
  return select_sieve(sample.data, cell.residual, model, InstrumentSpec::grad_g(), options, derive_seed(rep_seed, {1}));
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

DgpId parse_dgp(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "dgp0-l") return DgpId::dgp0_l;
  if (s == "dgp0-nl") return DgpId::dgp0_nl;
  if (s == "dgp1-l") return DgpId::dgp1_l;
  if (s == "dgp1-nl") return DgpId::dgp1_nl;
  throw Error(ErrorKind::config, kModule, "unknown DGP '" + name + "'");
}

std::string to_string(DgpId id) {
  switch (id) {
    case DgpId::dgp0_l: return "DGP0-L";
    case DgpId::dgp0_nl: return "DGP0-NL";
    case DgpId::dgp1_l: return "DGP1-L";
    case DgpId::dgp1_nl: return "DGP1-NL";
  }
  return "?";
}

double treatment_mean(DgpId id, double x) { return linear_dgp(id) ? 1.0 + 0.2 * x : 0.1 * x * x; }

double treatment_density(DgpId id, double t) {
  return integrate_x([&](double x) { return normal_pdf(t - treatment_mean(id, x)); });
}

double treatment_cdf(DgpId id, double t) {
  return integrate_x([&](double x) { return normal_cdf(t - treatment_mean(id, x)); });
}

double true_ratio(DgpId id, double t, double x) {
  return treatment_density(id, t) / normal_pdf(t - treatment_mean(id, x));
}

std::optional<Eigen::VectorXd> true_theta(DgpId id, const ResidualSpec& residual) {
  if (id == DgpId::dgp1_l || id == DgpId::dgp1_nl) return std::nullopt;
  Eigen::VectorXd theta(2);
  theta[1] = 1.0;
  if (residual.kind == ResidualKind::average) {
    theta[0] = id == DgpId::dgp0_l ? 1.5 : 1.0 / 3.0;
  } else if (id == DgpId::dgp0_l) {
    theta[0] = 1.0 + quantile_of_sum([](double x) { return x; }, residual.tau);
  } else {
    theta[0] = quantile_of_sum([](double x) { return x * x; }, residual.tau);
  }
  return theta;
}

SimSample generate(const DgpSpec& spec, std::uint64_t seed, const ResidualSpec& residual) {
  if (spec.n < 2) throw Error(ErrorKind::config, kModule, "sample size must be at least 2");
  if (!(spec.local_a >= 0.0)) throw Error(ErrorKind::config, kModule, "local drift scale must be non-negative");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = spec.n;
  Eigen::VectorXd t(n), y(n), pi0(n);
  Eigen::MatrixXd x(n, 1);
  const double drift = spec.local_a / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi_x = unif(rng);
    const double xi = normal(rng);
    const double eps = normal(rng);
    const double ti = treatment_mean(spec.id, xi_x) + (spec.zero_noise ? 0.0 : xi);
    double yi = outcome(spec.id, ti, xi_x, spec.zero_noise ? 0.0 : eps);
    if (drift != 0.0) yi += drift * std::sin(2.0 * std::numbers::pi * treatment_cdf(spec.id, ti));
    x(i, 0) = xi_x;
    t[i] = ti;
    y[i] = yi;
    pi0[i] = true_ratio(spec.id, ti, xi_x);
  }
  HiddenTruth truth{std::move(pi0), true_theta(spec.id, residual)};
  return {Dataset(std::move(t), std::move(x), std::move(y)), std::move(truth)};
}

TestStatistics infeasible_statistic(const Dataset& data, const std::optional<HiddenTruth>& truth,
                                    const ResidualSpec& residual, const DoseResponseModel& model,
                                    const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn) {
  if (!truth || truth->pi0.size() != data.size()) {
    throw Error(ErrorKind::unsupported, kModule, "infeasible statistic needs the true ratio (simulated data only)");
  }
  const ThetaFit theta = fit_theta(data, truth->pi0, residual, model, instrument);
  return compute_statistics(theta.residuals, data, weight_fn);
}

std::string McCase::label() const {
  std::ostringstream s;
  s << residual.name() << '/' << to_string(dgp) << "/N=" << n;
  if (local_a != 0.0) s << "/a=" << local_a;
  return s.str();
}

double rejection_rate(const std::vector<double>& p_values, double level) {
  if (p_values.empty()) return 0.0;
  const auto hits = std::count_if(p_values.begin(), p_values.end(), [&](double p) { return p <= level; });
  return static_cast<double>(hits) / static_cast<double>(p_values.size());
}

double mc_standard_error(double rate, int reps) {
  return reps > 0 ? std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps)) : 0.0;
}

McCell run_cell(const McCase& cell, const McOptions& options) {
  if (options.reps < 1) throw Error(ErrorKind::config, kModule, "replication count must be at least 1");
  if (cell.weights.empty()) throw Error(ErrorKind::config, kModule, "cell has no weight functions");
  cell.residual.validate();
  const std::uint64_t seed = cell_seed(cell, options.seed);
  const std::optional<SieveSpec> frozen = first_rep_sieve(cell, options, seed);

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(options.reps));
  parallel_for(outcomes.size(), options.threads, [&](std::size_t rep) {
    outcomes[rep] = run_replication(cell, options, derive_seed(seed, {rep}), frozen);
  });

  McCell out;
  out.spec = cell;
  out.reps = options.reps;
  if (frozen) {
    out.sieve = {frozen->k1, frozen->k2};
  } else if (!outcomes.empty()) {
    out.sieve = outcomes.front().sieve;
  }
  out.results.resize(cell.weights.size());
  for (std::size_t k = 0; k < cell.weights.size(); ++k) out.results[k].weight = cell.weights[k];
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++out.failures;
      if (out.failure_messages.size() < 10) out.failure_messages.push_back(o.message);
      continue;
    }
    out.theta.push_back(o.theta);
    for (std::size_t k = 0; k < cell.weights.size(); ++k) {
      out.results[k].p_cm.push_back(o.p_cm[k]);
      out.results[k].p_ks.push_back(o.p_ks[k]);
    }
  }
  out.flagged = 100 * out.failures >= options.reps;
  const int ok = options.reps - out.failures;
  for (auto& res : out.results) {
    for (double level : options.levels) {
      res.rate_cm.push_back(rejection_rate(res.p_cm, level));
      res.rate_ks.push_back(rejection_rate(res.p_ks, level));
      res.se_cm.push_back(mc_standard_error(res.rate_cm.back(), ok));
      res.se_ks.push_back(mc_standard_error(res.rate_ks.back(), ok));
    }
  }
  return out;
}

McReport run_table(const std::vector<McCase>& cases, const McOptions& options) {
  McReport report;
  report.levels = options.levels;
  report.reps = options.reps;
  report.B = options.B;
  report.seed = options.seed;
  for (const auto& c : cases) report.cells.push_back(run_cell(c, options));
  return report;
}

namespace {

std::vector<McCase> table_cases(const std::vector<DgpId>& dgps, const std::vector<Eigen::Index>& sizes) {
  const std::vector<WeightFunctionSpec> weights{WeightFunctionSpec::logistic(), WeightFunctionSpec::cosine_sine(),
                                                WeightFunctionSpec::indicator()};
  std::vector<McCase> cases;
  for (const auto& residual : {ResidualSpec::average(), ResidualSpec::quantile(0.5)}) {
    for (DgpId d : dgps) {
      for (Eigen::Index n : sizes) cases.push_back({residual, d, n, 0.0, weights});
    }
  }
  return cases;
}

}  // namespace

std::vector<McCase> size_cases() { return table_cases({DgpId::dgp0_l, DgpId::dgp0_nl}, {100, 200, 500}); }

std::vector<McCase> power_cases() { return table_cases({DgpId::dgp1_l, DgpId::dgp1_nl}, {100, 200}); }

std::vector<LocalPowerPoint> local_power_curve(const std::vector<double>& a_grid, Eigen::Index n,
                                               const WeightFunctionSpec& weight, double level,
                                               const McOptions& options) {
  std::vector<LocalPowerPoint> curve;
  McOptions opts = options;
  opts.levels = {level};
  // Every drift scale reuses the same (X, xi, eps) draws: the cell seed does
  // not depend on a, and the sieve is frozen from the null cell.
  if (!opts.sieve && !opts.cv_every_rep) {
    const McCase null_cell{ResidualSpec::average(), DgpId::dgp0_l, n, 0.0, {weight}};
    opts.sieve = first_rep_sieve(null_cell, opts, cell_seed(null_cell, opts.seed));
  }
  for (double a : a_grid) {
    if (!(a >= 0.0)) throw Error(ErrorKind::config, kModule, "drift scale a must be non-negative");
    const McCell cell = run_cell({ResidualSpec::average(), DgpId::dgp0_l, n, a, {weight}}, opts);
    LocalPowerPoint pt;
    pt.a = a;
    pt.rate = cell.results[0].rate_cm[0];
    pt.se = cell.results[0].se_cm[0];
    pt.reps = cell.reps;
    pt.failures = cell.failures;
    curve.push_back(pt);
  }
  return curve;
}

EfficiencyResult efficiency_experiment(DgpId dgp, Eigen::Index n, const ResidualSpec& residual,
                                       const WeightFunctionSpec& weight, const McOptions& options) {
  if (options.reps < 2) throw Error(ErrorKind::config, kModule, "need at least 2 replications");
  const McCase cell{residual, dgp, n, 0.0, {weight}};
  const std::uint64_t seed = derive_seed(cell_seed(cell, options.seed), {0xEF});
  const std::optional<SieveSpec> frozen = first_rep_sieve(cell, options, seed);
  const DoseResponseModel model = DoseResponseModel::polynomial(options.model_degree);
  const InstrumentSpec instrument = InstrumentSpec::grad_g();

  struct Pair {
    bool ok = false;
    double feasible = 0.0;
    double infeasible = 0.0;
  };
  std::vector<Pair> pairs(static_cast<std::size_t>(options.reps));
  parallel_for(pairs.size(), options.threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(seed, {rep});
    try {
      const SimSample sample = generate({dgp, n, 0.0, false}, derive_seed(rep_seed, {0}), residual);
      const Dataset& data = sample.data;
      const SieveSpec sieve =
          frozen ? *frozen : select_sieve(data, residual, model, instrument, options, derive_seed(rep_seed, {1}));
      const BalanceFit fit = fit_weights(data, sieve);
      const ThetaFit theta = fit_theta(data, fit.weights, residual, model, instrument);
      const ThetaFit theta0 = fit_theta(data, sample.truth.pi0, residual, model, instrument);
      const Eigen::VectorXd& tw = weight_treatments(data, weight.scale);
      std::vector<double> ts(tw.data(), tw.data() + data.size());
      std::sort(ts.begin(), ts.end());
      const std::size_t mid = ts.size() / 2;
      const double t_med = ts.size() % 2 ? ts[mid] : 0.5 * (ts[mid - 1] + ts[mid]);
      const Eigen::VectorXd at = Eigen::VectorXd::Constant(1, t_med);
      pairs[rep].feasible = j_process(theta.residuals, tw, weight, at)[0];
      pairs[rep].infeasible = j_process(theta0.residuals, tw, weight, at)[0];
      pairs[rep].ok = true;
    } catch (const Error&) {
      pairs[rep].ok = false;
    }
  });

  EfficiencyResult res;
  std::vector<double> f, g;
  for (const auto& p : pairs) {
    if (!p.ok) {
      ++res.failures;
      continue;
    }
    f.push_back(p.feasible);
    g.push_back(p.infeasible);
  }
  res.feasible = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  res.infeasible = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  auto variance = [](const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
  };
  res.var_feasible = variance(res.feasible);
  res.var_infeasible = variance(res.infeasible);
  return res;
}

std::string format_report_csv(const McReport& report) {
  std::ostringstream out;
  out << "residual,dgp,n,a,weight,statistic,level,rate,se,reps,failures,flagged,k1,k2\n";
  for (const auto& cell : report.cells) {
    for (const auto& res : cell.results) {
      for (int s = 0; s < 2; ++s) {
        const auto& rate = s == 0 ? res.rate_cm : res.rate_ks;
        const auto& se = s == 0 ? res.se_cm : res.se_ks;
        for (std::size_t l = 0; l < report.levels.size(); ++l) {
          out << cell.spec.residual.name() << ',' << to_string(cell.spec.dgp) << ',' << cell.spec.n << ','
              << cell.spec.local_a << ',' << res.weight.name() << ',' << (s == 0 ? "cm" : "ks") << ','
              << report.levels[l] << ',' << fixed(rate[l], 4) << ',' << fixed(se[l], 4) << ',' << cell.reps << ','
              << cell.failures << ',' << (cell.flagged ? 1 : 0) << ',' << cell.sieve.k1 << ',' << cell.sieve.k2
              << '\n';
        }
      }
    }
  }
  return out.str();
}

std::string format_report_table(const McReport& report, const std::string& statistic) {
  const bool cm = statistic == "cm";
  if (!cm && statistic != "ks") throw Error(ErrorKind::config, kModule, "statistic must be cm or ks");
  std::ostringstream out;
  if (report.cells.empty()) return out.str();
  out << "m\tmodel\tN";
  for (const auto& res : report.cells.front().results) {
    for (double level : report.levels) out << '\t' << res.weight.name() << ' ' << fixed(100.0 * level, 0) << '%';
  }
  out << '\n';
  for (const auto& cell : report.cells) {
    out << cell.spec.residual.name() << '\t' << to_string(cell.spec.dgp);
    if (cell.spec.local_a != 0.0) out << "(a=" << cell.spec.local_a << ')';
    out << '\t' << cell.spec.n;
    for (const auto& res : cell.results) {
      const auto& rate = cm ? res.rate_cm : res.rate_ks;
      const auto& se = cm ? res.se_cm : res.se_ks;
      for (std::size_t l = 0; l < rate.size(); ++l) out << '\t' << fixed(rate[l], 3) << " (" << fixed(se[l], 3) << ')';
    }
    if (cell.flagged) out << "\t[flagged: " << cell.failures << " failures]";
    out << '\n';
  }
  return out.str();
}

}  // namespace ctspec
