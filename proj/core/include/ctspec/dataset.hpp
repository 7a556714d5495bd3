#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctspec {

/// One observed triple (T, X, Y) on the original scale.
struct Observation {
  double t = 0.0;
  std::vector<double> x;
  double y = 0.0;
};

/// Min-max map v -> (v - offset) / scale onto [0, 1]. A constant column gets
/// scale 1 so that it standardizes to 0.
struct AffineMap {
  double offset = 0.0;
  double scale = 1.0;

  double standardize(double v) const { return (v - offset) / scale; }
  double destandardize(double s) const { return offset + scale * s; }

  static AffineMap min_max(std::span<const double> values);
};

struct Standardization {
  AffineMap t;
  std::vector<AffineMap> x;
};

/// Immutable table of N observations with standardized copies of T and X.
///
/// Downstream modules consume `t_std()` and `x_std()` for basis construction
/// and weight functions; `t()` and `y()` stay on the original scale for the
/// dose-response model and reporting.
class Dataset {
 public:
  /// Builds a dataset and computes min-max standardization from the data.
  Dataset(Eigen::VectorXd t, Eigen::MatrixXd x, Eigen::VectorXd y);

  /// Builds a dataset using a given standardization (for subsets of a parent
  /// dataset, whose rows then stay inside the parent's unit box).
  Dataset(Eigen::VectorXd t, Eigen::MatrixXd x, Eigen::VectorXd y, Standardization standardization);

  static Dataset from_observations(std::span<const Observation> rows);

  Eigen::Index size() const { return t_.size(); }
  Eigen::Index dim() const { return x_.cols(); }

  const Eigen::VectorXd& t() const { return t_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& t_std() const { return t_std_; }
  const Eigen::MatrixXd& x_std() const { return x_std_; }
  const Standardization& standardization() const { return standardization_; }

  Observation observation(Eigen::Index i) const;

  /// Rows `indices` in the given order, keeping this dataset's standardization.
  Dataset subset(std::span<const Eigen::Index> indices) const;

  /// Same rows with a different outcome vector.
  Dataset with_outcome(Eigen::VectorXd y) const;

 private:
  void validate() const;
  void apply_standardization();

  Eigen::VectorXd t_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd t_std_;
  Eigen::MatrixXd x_std_;
  Standardization standardization_;
};

/// Column reference in a CSV header: a name, or a zero-based index when the
/// text is all digits.
struct ColumnSpec {
  std::string treatment;
  std::vector<std::string> covariates;
  std::string outcome;
};

/// Raw numeric table read from a CSV file with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& ref) const;
};

CsvTable read_csv(const std::filesystem::path& path);

Dataset load_csv(const std::filesystem::path& path, const ColumnSpec& columns);

/// Writes t, x1..xr, y with full round-trip precision.
void write_csv(const std::filesystem::path& path, const Dataset& data);

// ---------------------------------------------------------------------------
// Box-Cox outcome transformation

struct BoxCoxParams {
  double lambda1 = 1.0;
  double lambda2 = 0.0;
};

/// ((value + lambda2)^lambda1 - 1) / lambda1. Throws a domain error when
/// value + lambda2 <= 0 or lambda1 == 0.
double boxcox(double value, const BoxCoxParams& params);

struct BoxCoxGrid {
  std::vector<double> lambda1;
  std::vector<double> lambda2;

  /// 60 log-spaced lambda1 in [0.01, 2] and 30 log-spaced lambda2 in [0.001, 1].
  static BoxCoxGrid default_grid();
};

/// Pearson correlation between the sorted transformed values and standard
/// normal quantiles at plotting positions (i - 0.5) / N.
double normal_scores_correlation(std::span<const double> values, const BoxCoxParams& params);

/// Grid point with the largest normal-scores correlation. Grid points at which
/// some value + lambda2 <= 0 are skipped. The first maximum in grid order wins.
BoxCoxParams boxcox_search(std::span<const double> values, const BoxCoxGrid& grid);

/// Transforms all values with `params` and shifts them so the minimum is 0.
Eigen::VectorXd boxcox_shifted(std::span<const double> values, const BoxCoxParams& params);

std::vector<double> log_spaced(double lo, double hi, int count);

}  // namespace ctspec
