#include "ctspec/spec_test.hpp"

#include <cmath>

#include "ctspec/errors.hpp"

namespace ctspec {

namespace {
constexpr const char* kModule = "spec_test";
}

void WeightFunctionSpec::validate() const {
  if (kind == WeightKind::logistic && (c == 0.0 || !std::isfinite(c))) {
    throw Error(ErrorKind::config, kModule, "logistic constant c must be finite and non-zero");
  }
}

std::string WeightFunctionSpec::name() const { return to_string(kind); }

WeightKind parse_weight_kind(const std::string& name) {
  if (name == "logistic") return WeightKind::logistic;
  if (name == "cossin" || name == "cosine_sine" || name == "cosine-sine") return WeightKind::cosine_sine;
  if (name == "indicator") return WeightKind::indicator;
  throw Error(ErrorKind::config, kModule, "unknown weight function '" + name + "'");
}

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::logistic: return "logistic";
    case WeightKind::cosine_sine: return "cossin";
    case WeightKind::indicator: return "indicator";
  }
  return "?";
}

TreatmentScale parse_treatment_scale(const std::string& name) {
  if (name == "standardized" || name == "std") return TreatmentScale::standardized;
  if (name == "original" || name == "raw") return TreatmentScale::original;
  throw Error(ErrorKind::config, kModule, "unknown treatment scale '" + name + "'");
}

std::string to_string(TreatmentScale scale) {
  return scale == TreatmentScale::standardized ? "standardized" : "original";
}

const Eigen::VectorXd& weight_treatments(const Dataset& data, TreatmentScale scale) {
  return scale == TreatmentScale::standardized ? data.t_std() : data.t();
}

double weight_fn(const WeightFunctionSpec& spec, double t_i, double t) {
  switch (spec.kind) {
    case WeightKind::logistic: return 1.0 / (1.0 + std::exp(spec.c - t * t_i));
    case WeightKind::cosine_sine: return std::cos(t * t_i) + std::sin(t * t_i);
    case WeightKind::indicator: return t_i <= t ? 1.0 : 0.0;
  }
  return 0.0;
}

Eigen::MatrixXd weight_matrix(const WeightFunctionSpec& spec, const Eigen::VectorXd& treatments,
                              const Eigen::VectorXd& eval_points) {
  spec.validate();
  Eigen::MatrixXd h(treatments.size(), eval_points.size());
  for (Eigen::Index m = 0; m < eval_points.size(); ++m) {
    const double t = eval_points[m];
    for (Eigen::Index i = 0; i < treatments.size(); ++i) h(i, m) = weight_fn(spec, treatments[i], t);
  }
  return h;
}

Eigen::VectorXd j_process(const Eigen::VectorXd& residuals, const Eigen::VectorXd& treatments,
                          const WeightFunctionSpec& spec, const Eigen::VectorXd& eval_points) {
  if (residuals.size() != treatments.size()) {
    throw Error(ErrorKind::config, kModule, "residuals and treatments differ in length");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(residuals.size()));
  return scale * (weight_matrix(spec, treatments, eval_points).transpose() * residuals);
}

Eigen::VectorXd evaluation_points(const Eigen::VectorXd& treatments, int grid_size) {
  if (grid_size < 0) throw Error(ErrorKind::config, kModule, "grid size must be non-negative");
  const Eigen::Index n = treatments.size();
  Eigen::VectorXd points(n + grid_size);
  points.head(n) = treatments;
  const double lo = n ? treatments.minCoeff() : 0.0;
  const double hi = n ? treatments.maxCoeff() : 1.0;
  for (int k = 0; k < grid_size; ++k) {
    points[n + k] = grid_size == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / (grid_size - 1);
  }
  return points;
}

TestStatistics statistics(const Eigen::VectorXd& j_sample, const Eigen::VectorXd& j_grid) {
  TestStatistics s;
  s.j_values = j_sample;
  s.j_grid = j_grid;
  s.cm = j_sample.size() ? j_sample.squaredNorm() / static_cast<double>(j_sample.size()) : 0.0;
  s.ks = j_grid.size() ? j_grid.cwiseAbs().maxCoeff() : 0.0;
  return s;
}

TestStatistics compute_statistics(const Eigen::VectorXd& residuals, const Eigen::VectorXd& treatments,
                                  const WeightFunctionSpec& spec, int grid_size) {
  const Eigen::VectorXd points = evaluation_points(treatments, grid_size);
  const Eigen::VectorXd j = j_process(residuals, treatments, spec, points);
  return statistics(j.head(treatments.size()), j);
}

TestStatistics compute_statistics(const Eigen::VectorXd& residuals, const Dataset& data,
                                  const WeightFunctionSpec& spec, int grid_size) {
  return compute_statistics(residuals, weight_treatments(data, spec.scale), spec, grid_size);
}

}  // namespace ctspec
