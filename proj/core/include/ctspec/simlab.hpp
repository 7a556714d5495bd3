#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"
#include "ctspec/dose_response.hpp"
#include "ctspec/model_select.hpp"
#include "ctspec/sieve_basis.hpp"
#include "ctspec/spec_test.hpp"

namespace ctspec {

/// X ~ U[0, 1], xi, eps ~ N(0, 1) independent.
///   DGP0-L   T = 1 + 0.2 X + xi,  Y = 1 + X + T + eps
///   DGP0-NL  T = 0.1 X^2 + xi,    Y = X^2 + T + eps
///   DGP1-L   T = 1 + 0.2 X + xi,  Y = 1 + X + 0.1 T^3 + eps
///   DGP1-NL  T = 0.1 X^2 + xi,    Y = X^2 + 0.2 T^3 + eps
enum class DgpId { dgp0_l, dgp0_nl, dgp1_l, dgp1_nl };

DgpId parse_dgp(const std::string& name);
std::string to_string(DgpId id);

struct DgpSpec {
  DgpId id = DgpId::dgp0_l;
  Eigen::Index n = 500;
  /// Local alternative: Y += a / sqrt(N) * sin(2 pi F_T(T)), F_T the marginal CDF of T.
  double local_a = 0.0;
  bool zero_noise = false;  // xi = eps = 0 (debugging)
};

struct HiddenTruth {
  Eigen::VectorXd pi0;                 // f_T(T_i) / f_{T|X}(T_i | X_i)
  std::optional<Eigen::VectorXd> theta;  // theta* of the linear model when the null holds
};

struct SimSample {
  Dataset data;
  HiddenTruth truth;
};

SimSample generate(const DgpSpec& spec, std::uint64_t seed, const ResidualSpec& residual = ResidualSpec::average());

/// Conditional mean of T given X.
double treatment_mean(DgpId id, double x);
/// Marginal density and CDF of T (2000-point Gauss-Legendre over X).
double treatment_density(DgpId id, double t);
double treatment_cdf(DgpId id, double t);
/// f_T(t) / f_{T|X}(t | x).
double true_ratio(DgpId id, double t, double x);

/// theta* of g(t) = theta0 + theta1 t for the null DGPs; empty under alternatives.
std::optional<Eigen::VectorXd> true_theta(DgpId id, const ResidualSpec& residual);

/// Statistics computed with the true ratio pi0 in place of the estimated weights.
TestStatistics infeasible_statistic(const Dataset& data, const std::optional<HiddenTruth>& truth,
                                    const ResidualSpec& residual, const DoseResponseModel& model,
                                    const InstrumentSpec& instrument, const WeightFunctionSpec& weight_fn);

/// One Monte Carlo cell: replications share a dataset across weight functions.
struct McCase {
  ResidualSpec residual;
  DgpId dgp = DgpId::dgp0_l;
  Eigen::Index n = 500;
  double local_a = 0.0;
  std::vector<WeightFunctionSpec> weights;

  std::string label() const;
};

struct McOptions {
  int reps = 1000;
  int B = 500;
  std::vector<double> levels{0.01, 0.05, 0.10};
  std::uint64_t seed = 0;
  int folds = 10;
  std::optional<std::vector<GridPoint>> grid;  // default_grid when unset
  std::optional<SieveSpec> sieve;              // skip CV entirely
  bool cv_every_rep = false;
  unsigned threads = 0;
  int model_degree = 1;
};

struct McWeightResult {
  WeightFunctionSpec weight;
  std::vector<double> p_cm;   // successful replications, in replication order
  std::vector<double> p_ks;
  std::vector<double> rate_cm;  // per level
  std::vector<double> rate_ks;
  std::vector<double> se_cm;
  std::vector<double> se_ks;
};

struct McCell {
  McCase spec;
  int reps = 0;
  int failures = 0;
  bool flagged = false;  // failures >= 1% of reps
  std::vector<std::string> failure_messages;
  GridPoint sieve;       // (K1, K2) of the first replication
  std::vector<McWeightResult> results;
  std::vector<Eigen::VectorXd> theta;  // per successful replication
};

struct McReport {
  std::vector<double> levels;
  int reps = 0;
  int B = 0;
  std::uint64_t seed = 0;
  std::vector<McCell> cells;
};

/// Rejection rate with p <= level, and its Monte Carlo standard error.
double rejection_rate(const std::vector<double>& p_values, double level);
double mc_standard_error(double rate, int reps);

McCell run_cell(const McCase& cell, const McOptions& options);
McReport run_table(const std::vector<McCase>& cases, const McOptions& options);

/// Cases of the size table (null DGPs, N = 100, 200, 500) and the power table
/// (alternative DGPs, N = 100, 200), average and median, all three weight functions.
std::vector<McCase> size_cases();
std::vector<McCase> power_cases();

struct LocalPowerPoint {
  double a = 0.0;
  double rate = 0.0;
  double se = 0.0;
  int reps = 0;
  int failures = 0;
};

/// Rejection rate of the CM test at `level` on DGP0-L with drift a / sqrt(N).
std::vector<LocalPowerPoint> local_power_curve(const std::vector<double>& a_grid, Eigen::Index n,
                                               const WeightFunctionSpec& weight, double level,
                                               const McOptions& options);

struct EfficiencyResult {
  Eigen::VectorXd feasible;    // J_N(t_med) per replication
  Eigen::VectorXd infeasible;  // J_0(t_med) per replication
  double var_feasible = 0.0;
  double var_infeasible = 0.0;
  int failures = 0;
};

/// Monte Carlo comparison of J_N and J_0 at the sample median of the
/// treatment on the weight-function scale.
EfficiencyResult efficiency_experiment(DgpId dgp, Eigen::Index n, const ResidualSpec& residual,
                                       const WeightFunctionSpec& weight, const McOptions& options);

/// Delimiter-separated long format: one row per (cell, weight, statistic, level).
std::string format_report_csv(const McReport& report);
/// Tables 1-2 layout (CM statistic), MC standard errors in parentheses.
std::string format_report_table(const McReport& report, const std::string& statistic = "cm");

}  // namespace ctspec
