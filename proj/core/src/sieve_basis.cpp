#include "ctspec/sieve_basis.hpp"

#include <algorithm>
#include <cmath>

#include "ctspec/errors.hpp"

namespace ctspec {

namespace {

constexpr const char* kModule = "sieve_basis";
constexpr double kEdgeSlack = 1e-12;

double checked_unit(double t) {
  if (!(t >= -kEdgeSlack && t <= 1.0 + kEdgeSlack)) {
    throw Error(ErrorKind::domain, kModule, "B-spline argument " + std::to_string(t) + " outside [0, 1]");
  }
  return std::clamp(t, 0.0, 1.0);
}

}  // namespace

BasisKind parse_basis_kind(const std::string& name) {
  if (name == "power") return BasisKind::power;
  if (name == "bspline") return BasisKind::bspline;
  throw Error(ErrorKind::config, kModule, "unknown basis family '" + name + "'");
}

Composition parse_composition(const std::string& name) {
  if (name == "additive") return Composition::additive;
  if (name == "tensor") return Composition::tensor;
  throw Error(ErrorKind::config, kModule, "unknown covariate composition '" + name + "'");
}

std::string to_string(BasisKind kind) { return kind == BasisKind::power ? "power" : "bspline"; }
std::string to_string(Composition composition) {
  return composition == Composition::additive ? "additive" : "tensor";
}

BasisFamily default_family(int k1, int k2, int r, Composition composition) {
  int per_dim = k1;
  if (composition == Composition::additive) {
    per_dim = std::max(per_dim, (k2 - 1) / std::max(r, 1) + 1);
  } else {
    per_dim = std::max(per_dim, tensor_degree(k2, r) + 1);
  }
  BasisFamily family;
  family.kind = per_dim <= 6 ? BasisKind::power : BasisKind::bspline;
  return family;
}

Eigen::VectorXd bspline_values(double t, int k, int max_degree) {
  if (k < 1) throw Error(ErrorKind::config, kModule, "basis size must be positive");
  t = checked_unit(t);
  const int degree = std::min(max_degree, k - 1);
  const int interior = k - degree - 1;
  // Clamped knot vector: degree+1 zeros, interior knots, degree+1 ones.
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(k + degree + 1));
  for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
  for (int i = 1; i <= interior; ++i) knots.push_back(static_cast<double>(i) / (interior + 1));
  for (int i = 0; i <= degree; ++i) knots.push_back(1.0);

  // Degree-0 functions on half-open spans; the right end belongs to the last
  // non-empty span so that the basis is right-continuous at t = 1.
  const int n0 = static_cast<int>(knots.size()) - 1;
  std::vector<double> b(static_cast<std::size_t>(n0), 0.0);
  int span = -1;
  for (int i = 0; i < n0; ++i) {
    if (knots[i] < knots[i + 1] && t >= knots[i] && t < knots[i + 1]) span = i;
  }
  if (span < 0) {
    for (int i = n0 - 1; i >= 0; --i) {
      if (knots[i] < knots[i + 1]) {
        span = i;
        break;
      }
    }
  }
  b[static_cast<std::size_t>(span)] = 1.0;

  for (int d = 1; d <= degree; ++d) {
    for (int i = 0; i < n0 - d; ++i) {
      double value = 0.0;
      const double left = knots[i + d] - knots[i];
      const double right = knots[i + d + 1] - knots[i + 1];
      if (left > 0.0) value += (t - knots[i]) / left * b[static_cast<std::size_t>(i)];
      if (right > 0.0) value += (knots[i + d + 1] - t) / right * b[static_cast<std::size_t>(i + 1)];
      b[static_cast<std::size_t>(i)] = value;
    }
  }
  Eigen::VectorXd out(k);
  for (int i = 0; i < k; ++i) out[i] = b[static_cast<std::size_t>(i)];
  return out;
}

Eigen::VectorXd univariate_basis(const BasisFamily& family, double t, int k) {
  if (k < 1) throw Error(ErrorKind::config, kModule, "basis size must be positive");
  Eigen::VectorXd out(k);
  if (family.kind == BasisKind::power) {
    double p = 1.0;
    for (int j = 0; j < k; ++j) {
      out[j] = p;
      p *= t;
    }
    return out;
  }
  out = bspline_values(t, k, family.max_spline_degree);
  out[0] = 1.0;
  return out;
}

Eigen::VectorXd eval_u(const SieveSpec& spec, double t) { return univariate_basis(spec.family, t, spec.k1); }

int additive_order(int k2, int r) {
  if (r < 1 || k2 < 1 || (k2 - 1) % r != 0) {
    throw Error(ErrorKind::config, kModule,
                "K2 = " + std::to_string(k2) + " is not of the form 1 + r*d for r = " + std::to_string(r));
  }
  return (k2 - 1) / r;
}

int tensor_degree(int k2, int r) {
  if (r < 1 || k2 < 1) throw Error(ErrorKind::config, kModule, "invalid tensor dimensions");
  int d = 0;
  while (true) {
    double count = std::pow(static_cast<double>(d + 1), r);
    if (count >= k2) return d;
    ++d;
  }
}

std::vector<std::vector<int>> tensor_terms(int k2, int r) {
  const int d = tensor_degree(k2, r);
  std::vector<std::vector<int>> terms;
  std::vector<int> idx(static_cast<std::size_t>(r), 0);
  // Enumerate the full (d+1)^r grid.
  while (true) {
    terms.push_back(idx);
    int pos = r - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == d) {
      idx[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
  }
  std::stable_sort(terms.begin(), terms.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
    int sa = 0;
    int sb = 0;
    for (int v : a) sa += v;
    for (int v : b) sb += v;
    if (sa != sb) return sa < sb;
    return a > b;  // descending lexicographic: (1,0) before (0,1)
  });
  terms.resize(static_cast<std::size_t>(k2));
  return terms;
}

Eigen::VectorXd eval_v(const SieveSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const int r = static_cast<int>(x.size());
  if (spec.k2 < 1) throw Error(ErrorKind::config, kModule, "K2 must be positive");
  Eigen::VectorXd out(spec.k2);
  if (spec.composition == Composition::additive) {
    const int d = additive_order(spec.k2, r);
    out[0] = 1.0;
    for (int j = 0; j < r; ++j) {
      const Eigen::VectorXd uni = univariate_basis(spec.family, x[j], d + 1);
      out.segment(1 + j * d, d) = uni.tail(d);
    }
    return out;
  }
  const int d = tensor_degree(spec.k2, r);
  std::vector<Eigen::VectorXd> uni;
  uni.reserve(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) uni.push_back(univariate_basis(spec.family, x[j], d + 1));
  const auto terms = tensor_terms(spec.k2, r);
  for (int k = 0; k < spec.k2; ++k) {
    double prod = 1.0;
    for (int j = 0; j < r; ++j) prod *= uni[static_cast<std::size_t>(j)][terms[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]];
    out[k] = prod;
  }
  return out;
}

Eigen::MatrixXd design_u(const SieveSpec& spec, const Eigen::VectorXd& t_std) {
  Eigen::MatrixXd out(t_std.size(), spec.k1);
  for (Eigen::Index i = 0; i < t_std.size(); ++i) out.row(i) = eval_u(spec, t_std[i]).transpose();
  return out;
}

Eigen::MatrixXd design_v(const SieveSpec& spec, const Eigen::MatrixXd& x_std) {
  Eigen::MatrixXd out(x_std.rows(), spec.k2);
  for (Eigen::Index i = 0; i < x_std.rows(); ++i) out.row(i) = eval_v(spec, x_std.row(i).transpose()).transpose();
  return out;
}

Eigen::MatrixXd tensor_design(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  const auto n = u.rows();
  const auto k1 = u.cols();
  const auto k2 = v.cols();
  Eigen::MatrixXd z(n, k1 * k2);
  for (Eigen::Index b = 0; b < k2; ++b) {
    z.middleCols(b * k1, k1) = u.array().colwise() * v.col(b).array();
  }
  return z;
}

}  // namespace ctspec
