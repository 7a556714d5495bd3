#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"
#include "ctspec/dose_response.hpp"
#include "ctspec/entropy_balance.hpp"
#include "ctspec/sieve_basis.hpp"

namespace ctspec {

struct GridPoint {
  int k1 = 1;
  int k2 = 1;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct GridScore {
  GridPoint point;
  double score = 0.0;
  bool valid = true;
  std::string reason;  // why the point was excluded
};

struct CVResult {
  std::vector<GridScore> scores;  // in grid order
  GridPoint selected;
  double selected_score = 0.0;
  int folds = 0;
  std::vector<std::string> warnings;
};

struct CVOptions {
  int folds = 10;
  std::uint64_t seed = 0;
  Composition composition = Composition::additive;
  std::optional<BasisFamily> family;  // default_family per grid point when unset
  BalanceOptions balance;
  unsigned threads = 1;
};

/// K1 in {2..5}, K2 in {1 + r d : d = 1..4}.
std::vector<GridPoint> default_grid(int r);

/// Parses "k1:k2,k1:k2,..." or "k1a,k1b x k2a,k2b" (Cartesian product).
std::vector<GridPoint> parse_grid(const std::string& text);

/// Fold label of every row: a seeded shuffle cut into F contiguous blocks.
std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed);

/// Sieve used for a grid point under the given options.
SieveSpec sieve_for(const GridPoint& point, int r, const CVOptions& options);

/// F-fold cross-validation of (K1, K2):
///   CV = sum_j [ |S_j|^-1 sum_{k in S_j} pi^(-j)(T_k, X_k) m{Y_k; g(T_k; theta^(-j))} ]^2
/// with theta^(-j) minimizing the training moment divided by the full N.
/// Points that cannot be fitted on some fold are marked invalid.
CVResult cross_validate(const Dataset& data, const std::vector<GridPoint>& grid, const ResidualSpec& residual,
                        const DoseResponseModel& model, const InstrumentSpec& instrument,
                        const CVOptions& options = {});

}  // namespace ctspec
