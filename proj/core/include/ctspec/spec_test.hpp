#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"

namespace ctspec {

enum class WeightKind { logistic, cosine_sine, indicator };

/// Scale of the treatment fed to H: min-max standardized to [0, 1], or as observed.
enum class TreatmentScale { standardized, original };

/// Weight function H(T_i, t) of the empirical process.
struct WeightFunctionSpec {
  WeightKind kind = WeightKind::logistic;
  double c = 5.0;  // logistic offset
  TreatmentScale scale = TreatmentScale::original;

  static WeightFunctionSpec logistic(double c = 5.0, TreatmentScale s = TreatmentScale::original) {
    return {WeightKind::logistic, c, s};
  }
  static WeightFunctionSpec cosine_sine(TreatmentScale s = TreatmentScale::original) {
    return {WeightKind::cosine_sine, 5.0, s};
  }
  static WeightFunctionSpec indicator(TreatmentScale s = TreatmentScale::original) {
    return {WeightKind::indicator, 5.0, s};
  }

  void validate() const;
  std::string name() const;
};

WeightKind parse_weight_kind(const std::string& name);
std::string to_string(WeightKind kind);
TreatmentScale parse_treatment_scale(const std::string& name);
std::string to_string(TreatmentScale scale);

/// Treatments on the scale the weight function is applied to.
const Eigen::VectorXd& weight_treatments(const Dataset& data, TreatmentScale scale);

/// logistic 1 / (1 + exp(c - t * t_i)); cosine-sine cos(t * t_i) + sin(t * t_i);
/// indicator 1(t_i <= t).
double weight_fn(const WeightFunctionSpec& spec, double t_i, double t);

/// N x M matrix H(T_i, t_m).
Eigen::MatrixXd weight_matrix(const WeightFunctionSpec& spec, const Eigen::VectorXd& treatments,
                              const Eigen::VectorXd& eval_points);

/// J_N(t) = N^-1/2 sum_i U_i H(T_i, t) at every evaluation point.
Eigen::VectorXd j_process(const Eigen::VectorXd& residuals, const Eigen::VectorXd& treatments,
                          const WeightFunctionSpec& spec, const Eigen::VectorXd& eval_points);

/// Evaluation points for the statistics: the N sample treatments followed by
/// `grid_size` equispaced points on [min, max] of the treatments ([0, 1] when
/// standardized). The first N entries carry the CM statistic, all of them the
/// KS supremum.
Eigen::VectorXd evaluation_points(const Eigen::VectorXd& treatments, int grid_size = 201);

struct TestStatistics {
  Eigen::VectorXd j_values;  // J_N at the sample treatments
  Eigen::VectorXd j_grid;    // J_N on the full sup grid
  double cm = 0.0;
  double ks = 0.0;
};

/// cm = mean of j_sample^2; ks = max |j| over j_grid.
TestStatistics statistics(const Eigen::VectorXd& j_sample, const Eigen::VectorXd& j_grid);

/// Residuals -> statistics on the given treatments with the default grid.
TestStatistics compute_statistics(const Eigen::VectorXd& residuals, const Eigen::VectorXd& treatments,
                                  const WeightFunctionSpec& spec, int grid_size = 201);

/// Same, taking the treatments from `data` on the scale of `spec`.
TestStatistics compute_statistics(const Eigen::VectorXd& residuals, const Dataset& data,
                                  const WeightFunctionSpec& spec, int grid_size = 201);

}  // namespace ctspec
