#include "ctspec/model_select.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctspec/errors.hpp"
#include "ctspec/parallel.hpp"
#include "ctspec/random.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "model_select";

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    try {
      std::size_t used = 0;
      const std::string token = item.substr(first, last - first + 1);
      const int v = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, kModule, "cannot parse grid entry '" + item + "'");
    }
  }
  return out;
}

// Strict order used for tie-breaking: smaller K1*K2, then smaller K1.
bool simpler(const GridPoint& a, const GridPoint& b) {
  const long pa = static_cast<long>(a.k1) * a.k2;
  const long pb = static_cast<long>(b.k1) * b.k2;
  if (pa != pb) return pa < pb;
  return a.k1 < b.k1;
}

}  // namespace

std::vector<GridPoint> default_grid(int r) {
  std::vector<GridPoint> grid;
  for (int k1 = 2; k1 <= 5; ++k1) {
    for (int d = 1; d <= 4; ++d) grid.push_back({k1, 1 + r * d});
  }
  return grid;
}

std::vector<GridPoint> parse_grid(const std::string& text) {
  std::vector<GridPoint> grid;
  const auto x = text.find('x');
  if (x != std::string::npos) {
    const auto k1s = parse_int_list(text.substr(0, x));
    const auto k2s = parse_int_list(text.substr(x + 1));
    for (int a : k1s) {
      for (int b : k2s) grid.push_back({a, b});
    }
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw Error(ErrorKind::config, kModule, "grid entry '" + item + "' is not of the form k1:k2");
      }
      const auto a = parse_int_list(item.substr(0, colon));
      const auto b = parse_int_list(item.substr(colon + 1));
      if (a.size() != 1 || b.size() != 1) throw Error(ErrorKind::config, kModule, "bad grid entry '" + item + "'");
      grid.push_back({a[0], b[0]});
    }
  }
  if (grid.empty()) throw Error(ErrorKind::config, kModule, "empty cross-validation grid");
  for (const auto& g : grid) {
    if (g.k1 < 1 || g.k2 < 1) throw Error(ErrorKind::config, kModule, "grid dimensions must be at least 1");
  }
  return grid;
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::config, kModule, "need at least 2 folds");
  if (n < folds) throw Error(ErrorKind::data, kModule, "fewer observations than folds");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_rng(seed, {0xCF});
  // Fisher-Yates with an explicit uniform draw so the permutation does not
  // depend on the standard library's shuffle implementation.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<int> label(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    label[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos * static_cast<std::size_t>(folds) / order.size());
  }
  return label;
}

SieveSpec sieve_for(const GridPoint& point, int r, const CVOptions& options) {
  SieveSpec spec;
  spec.k1 = point.k1;
  spec.k2 = point.k2;
  spec.composition = options.composition;
  spec.family = options.family.value_or(default_family(point.k1, point.k2, r, options.composition));
  return spec;
}

CVResult cross_validate(const Dataset& data, const std::vector<GridPoint>& grid, const ResidualSpec& residual,
                        const DoseResponseModel& model, const InstrumentSpec& instrument, const CVOptions& options) {
  if (grid.empty()) throw Error(ErrorKind::config, kModule, "empty cross-validation grid");
  residual.validate();
  instrument.validate(model);
  const Eigen::Index n = data.size();
  const int r = static_cast<int>(data.dim());
  const auto label = fold_assignment(n, options.folds, options.seed);

  std::vector<Dataset> train;
  std::vector<Dataset> held;
  for (int j = 0; j < options.folds; ++j) {
    std::vector<Eigen::Index> in;
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < n; ++i) (label[static_cast<std::size_t>(i)] == j ? out : in).push_back(i);
    train.push_back(data.subset(in));
    held.push_back(data.subset(out));
  }

  CVResult result;
  result.folds = options.folds;
  result.scores.resize(grid.size());
  parallel_for(grid.size(), options.threads, [&](std::size_t gi) {
    GridScore& gs = result.scores[gi];
    gs.point = grid[gi];
    double score = 0.0;
    try {
      const SieveSpec spec = sieve_for(grid[gi], r, options);
      for (int j = 0; j < options.folds; ++j) {
        const Dataset& tr = train[static_cast<std::size_t>(j)];
        const Dataset& ho = held[static_cast<std::size_t>(j)];
        if (static_cast<Eigen::Index>(spec.k1) * spec.k2 > tr.size()) {
          throw Error(ErrorKind::config, kModule, "K1*K2 exceeds the training fold size");
        }
        const BalanceFit fit = fit_weights(tr, spec, options.balance);
        ThetaOptions topts;
        topts.divisor = static_cast<double>(n);
        const ThetaFit th = fit_theta(tr, fit.weights, residual, model, instrument, topts);
        const Eigen::VectorXd w = dual_weights(fit, ho);
        const Eigen::VectorXd u = weighted_residuals(th.theta, ho, w, residual, model);
        const double mean = u.mean();
        score += mean * mean;
      }
      if (!std::isfinite(score)) throw Error(ErrorKind::data, kModule, "non-finite score");
      gs.score = score;
    } catch (const Error& e) {
      gs.valid = false;
      gs.score = std::numeric_limits<double>::quiet_NaN();
      gs.reason = e.what();
    }
  });

  const GridScore* best = nullptr;
  for (const auto& gs : result.scores) {
    if (!gs.valid) {
      result.warnings.push_back("grid point (" + std::to_string(gs.point.k1) + ", " + std::to_string(gs.point.k2) +
                                ") excluded: " + gs.reason);
      continue;
    }
    if (!best || gs.score < best->score || (gs.score == best->score && simpler(gs.point, best->point))) best = &gs;
  }
  if (!best) throw Error(ErrorKind::data, kModule, "no grid point could be fitted on every fold");
  result.selected = best->point;
  result.selected_score = best->score;
  return result;
}

}  // namespace ctspec
