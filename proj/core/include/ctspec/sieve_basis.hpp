#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctspec {

enum class BasisKind { power, bspline };

struct BasisFamily {
  BasisKind kind = BasisKind::power;
  int max_spline_degree = 3;  // cubic; lowered automatically when k is small
};

enum class Composition { additive, tensor };

/// Dimensions and families of the sieves u_{K1}(t) and v_{K2}(x).
struct SieveSpec {
  int k1 = 1;
  int k2 = 1;
  BasisFamily family;
  Composition composition = Composition::additive;
};

BasisKind parse_basis_kind(const std::string& name);
Composition parse_composition(const std::string& name);
std::string to_string(BasisKind kind);
std::string to_string(Composition composition);

/// Power series up to K = 6 terms per dimension, cubic B-splines above.
BasisFamily default_family(int k1, int k2, int r, Composition composition);

/// Raw clamped B-spline basis of `k` functions on [0, 1] (degree
/// min(max_degree, k - 1), equally spaced interior knots). Entries sum to 1.
Eigen::VectorXd bspline_values(double t, int k, int max_degree = 3);

/// Univariate constant-first basis with `k` entries. Power: (1, t, ..., t^{k-1}).
/// B-spline: (1, B_2(t), ..., B_k(t)); the first spline is replaced by the
/// constant, which spans the same space because the splines sum to one.
Eigen::VectorXd univariate_basis(const BasisFamily& family, double t, int k);

/// u_{K1}(t) for standardized t.
Eigen::VectorXd eval_u(const SieveSpec& spec, double t);

/// v_{K2}(x) for standardized x (length r).
Eigen::VectorXd eval_v(const SieveSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Per-coordinate order d of the additive composition, K2 = 1 + r * d.
/// Throws a configuration error when K2 is not of that form.
int additive_order(int k2, int r);

/// Univariate degree of the tensor composition: the smallest d with (d+1)^r >= K2.
int tensor_degree(int k2, int r);

/// Multi-indices (one index per coordinate) of the tensor terms, ordered by
/// total degree and then by descending lexicographic order, truncated to K2.
std::vector<std::vector<int>> tensor_terms(int k2, int r);

/// Row i holds u_{K1}(t_i).
Eigen::MatrixXd design_u(const SieveSpec& spec, const Eigen::VectorXd& t_std);

/// Row i holds v_{K2}(x_i).
Eigen::MatrixXd design_v(const SieveSpec& spec, const Eigen::MatrixXd& x_std);

/// Row i holds kron(v_i, u_i), i.e. column a + b*K1 is u_a * v_b. This is the
/// vectorization matching u' Lambda v = vec(Lambda)' kron(v, u) with
/// column-major vec.
Eigen::MatrixXd tensor_design(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v);

}  // namespace ctspec
