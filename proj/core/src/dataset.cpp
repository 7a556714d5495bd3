#include "ctspec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "ctspec/errors.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "dataset";

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

AffineMap AffineMap::min_max(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  AffineMap map;
  map.offset = *lo;
  map.scale = (*hi > *lo) ? (*hi - *lo) : 1.0;
  return map;
}

Dataset::Dataset(Eigen::VectorXd t, Eigen::MatrixXd x, Eigen::VectorXd y)
    : t_(std::move(t)), x_(std::move(x)), y_(std::move(y)) {
  validate();
  standardization_.t = AffineMap::min_max(std::span<const double>(t_.data(), static_cast<std::size_t>(t_.size())));
  standardization_.x.resize(static_cast<std::size_t>(x_.cols()));
  for (Eigen::Index j = 0; j < x_.cols(); ++j) {
    const Eigen::VectorXd col = x_.col(j);
    standardization_.x[static_cast<std::size_t>(j)] =
        AffineMap::min_max(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }
  apply_standardization();
}

Dataset::Dataset(Eigen::VectorXd t, Eigen::MatrixXd x, Eigen::VectorXd y, Standardization standardization)
    : t_(std::move(t)), x_(std::move(x)), y_(std::move(y)), standardization_(std::move(standardization)) {
  validate();
  if (standardization_.x.size() != static_cast<std::size_t>(x_.cols())) {
    throw Error(ErrorKind::config, kModule, "standardization has wrong covariate dimension");
  }
  apply_standardization();
}

void Dataset::validate() const {
  const auto n = t_.size();
  if (x_.rows() != n || y_.size() != n) {
    throw Error(ErrorKind::config, kModule, "T, X and Y must have the same number of rows");
  }
  if (n < 2) throw Error(ErrorKind::data, kModule, "need at least 2 observations, got " + std::to_string(n));
  if (x_.cols() < 1) throw Error(ErrorKind::config, kModule, "need at least one covariate");
  for (Eigen::Index i = 0; i < n; ++i) {
    bool ok = std::isfinite(t_[i]) && std::isfinite(y_[i]) && x_.row(i).allFinite();
    if (!ok) throw Error(ErrorKind::data, kModule, "non-finite value in observation " + std::to_string(i));
  }
}

void Dataset::apply_standardization() {
  t_std_ = t_.unaryExpr([this](double v) { return standardization_.t.standardize(v); });
  x_std_.resize(x_.rows(), x_.cols());
  for (Eigen::Index j = 0; j < x_.cols(); ++j) {
    const auto& map = standardization_.x[static_cast<std::size_t>(j)];
    x_std_.col(j) = x_.col(j).unaryExpr([&map](double v) { return map.standardize(v); });
  }
}

Dataset Dataset::from_observations(std::span<const Observation> rows) {
  if (rows.empty()) throw Error(ErrorKind::data, kModule, "no observations");
  const auto r = rows.front().x.size();
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd t(n);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(r));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& obs = rows[static_cast<std::size_t>(i)];
    if (obs.x.size() != r) {
      throw Error(ErrorKind::data, kModule, "observation " + std::to_string(i) + " has a different covariate dimension");
    }
    t[i] = obs.t;
    y[i] = obs.y;
    for (std::size_t j = 0; j < r; ++j) x(i, static_cast<Eigen::Index>(j)) = obs.x[j];
  }
  return Dataset(std::move(t), std::move(x), std::move(y));
}

Observation Dataset::observation(Eigen::Index i) const {
  Observation obs;
  obs.t = t_[i];
  obs.y = y_[i];
  obs.x.resize(static_cast<std::size_t>(x_.cols()));
  for (Eigen::Index j = 0; j < x_.cols(); ++j) obs.x[static_cast<std::size_t>(j)] = x_(i, j);
  return obs;
}

Dataset Dataset::subset(std::span<const Eigen::Index> indices) const {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Eigen::VectorXd t(m);
  Eigen::VectorXd y(m);
  Eigen::MatrixXd x(m, x_.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = indices[static_cast<std::size_t>(k)];
    t[k] = t_[i];
    y[k] = y_[i];
    x.row(k) = x_.row(i);
  }
  return Dataset(std::move(t), std::move(x), std::move(y), standardization_);
}

Dataset Dataset::with_outcome(Eigen::VectorXd y) const {
  return Dataset(t_, x_, std::move(y), standardization_);
}

// ---------------------------------------------------------------------------

std::size_t CsvTable::column(const std::string& ref) const {
  const auto it = std::find(header.begin(), header.end(), ref);
  if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  if (all_digits(ref)) {
    const auto idx = static_cast<std::size_t>(std::stoul(ref));
    if (idx < header.size()) return idx;
  }
  throw Error(ErrorKind::config, kModule, "column '" + ref + "' not found in header");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::file, kModule, "cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, kModule, "missing header row in '" + path.string() + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw Error(ErrorKind::parse, kModule,
                  "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(table.header.size()));
    }
    std::vector<double> values(cells.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto& cell = cells[j];
      if (cell.empty()) continue;  // reported only if the column is used
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      if (*first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) continue;
      values[j] = v;
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

Dataset load_csv(const std::filesystem::path& path, const ColumnSpec& columns) {
  const auto table = read_csv(path);
  if (columns.covariates.empty()) throw Error(ErrorKind::config, kModule, "no covariate columns given");
  const auto ct = table.column(columns.treatment);
  const auto cy = table.column(columns.outcome);
  std::vector<std::size_t> cx;
  for (const auto& c : columns.covariates) cx.push_back(table.column(c));

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n < 2) throw Error(ErrorKind::data, kModule, "need at least 2 rows, got " + std::to_string(n));
  Eigen::VectorXd t(n);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cx.size()));

  auto cell = [&](Eigen::Index i, std::size_t j) {
    const double v = table.rows[static_cast<std::size_t>(i)][j];
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::parse, kModule,
                  "row " + std::to_string(i + 1) + ", column '" + table.header[j] + "': missing or non-numeric value");
    }
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    t[i] = cell(i, ct);
    y[i] = cell(i, cy);
    for (std::size_t k = 0; k < cx.size(); ++k) x(i, static_cast<Eigen::Index>(k)) = cell(i, cx[k]);
  }
  return Dataset(std::move(t), std::move(x), std::move(y));
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::file, kModule, "cannot write '" + path.string() + "'");
  out << "t";
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << ",x" << (j + 1);
  out << ",y\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << data.t()[i];
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << ',' << data.x()(i, j);
    out << ',' << data.y()[i] << '\n';
  }
}

// ---------------------------------------------------------------------------

double boxcox(double value, const BoxCoxParams& params) {
  if (params.lambda1 == 0.0) throw Error(ErrorKind::domain, kModule, "Box-Cox lambda1 must be non-zero");
  const double shifted = value + params.lambda2;
  if (!(shifted > 0.0)) throw Error(ErrorKind::domain, kModule, "Box-Cox requires value + lambda2 > 0");
  return (std::pow(shifted, params.lambda1) - 1.0) / params.lambda1;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {lo};
  const double a = std::log(lo);
  const double b = std::log(hi);
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out.push_back(std::exp(a + (b - a) * k / (count - 1)));
  return out;
}

BoxCoxGrid BoxCoxGrid::default_grid() { return {log_spaced(0.01, 2.0, 60), log_spaced(0.001, 1.0, 30)}; }

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> normal_scores(std::size_t n) {
  const boost::math::normal standard;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = boost::math::quantile(standard, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  }
  return q;
}

double scores_correlation(std::vector<double> sorted_values, const std::vector<double>& scores,
                          const BoxCoxParams& params) {
  for (auto& v : sorted_values) v = boxcox(v, params);
  return pearson(sorted_values, scores);
}

}  // namespace

double normal_scores_correlation(std::span<const double> values, const BoxCoxParams& params) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return scores_correlation(std::move(sorted), normal_scores(sorted.size()), params);
}

BoxCoxParams boxcox_search(std::span<const double> values, const BoxCoxGrid& grid) {
  if (grid.lambda1.empty() || grid.lambda2.empty()) throw Error(ErrorKind::config, kModule, "empty Box-Cox grid");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() < 2 || sorted.front() == sorted.back()) {
    throw Error(ErrorKind::data, kModule, "Box-Cox search needs at least two distinct values");
  }
  const auto scores = normal_scores(sorted.size());

  BoxCoxParams best;
  double best_corr = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (const double l1 : grid.lambda1) {
    if (l1 == 0.0) continue;
    for (const double l2 : grid.lambda2) {
      if (!(sorted.front() + l2 > 0.0)) continue;
      const BoxCoxParams p{l1, l2};
      const double corr = scores_correlation(sorted, scores, p);
      if (corr > best_corr) {
        best_corr = corr;
        best = p;
        found = true;
      }
    }
  }
  if (!found) throw Error(ErrorKind::data, kModule, "no Box-Cox grid point is valid for these values");
  return best;
}

Eigen::VectorXd boxcox_shifted(std::span<const double> values, const BoxCoxParams& params) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Eigen::Index>(i)] = boxcox(values[i], params);
  if (out.size() > 0) out.array() -= out.minCoeff();
  return out;
}

}  // namespace ctspec
