#include <cmath>
#include <random>
#include <cstring>
#include <set>

#include <gtest/gtest.h>

#include "ctspec/errors.hpp"
#include "ctspec/sieve_basis.hpp"

using namespace ctspec;

namespace {

SieveSpec power_spec(int k1, int k2, Composition c = Composition::additive) {
  return {k1, k2, BasisFamily{BasisKind::power, 3}, c};
}

// Recursive Cox-de Boor definition on a clamped uniform knot vector.
double cox_de_boor(const std::vector<double>& knots, int i, int p, double t) {
  if (p == 0) {
    const bool last = knots[i + 1] == knots.back() && t == knots.back() && knots[i] < knots[i + 1];
    return ((t >= knots[i] && t < knots[i + 1]) || last) ? 1.0 : 0.0;
  }
  double out = 0.0;
  const double a = knots[i + p] - knots[i];
  const double b = knots[i + p + 1] - knots[i + 1];
  if (a > 0) out += (t - knots[i]) / a * cox_de_boor(knots, i, p - 1, t);
  if (b > 0) out += (knots[i + p + 1] - t) / b * cox_de_boor(knots, i + 1, p - 1, t);
  return out;
}

}  // namespace

TEST(SieveBasis, PowerValues) {
  const auto u0 = eval_u(power_spec(3, 1), 0.0);
  EXPECT_EQ(u0, Eigen::Vector3d(1, 0, 0));
  const auto u5 = eval_u(power_spec(3, 1), 0.5);
  EXPECT_EQ(u5, Eigen::Vector3d(1, 0.5, 0.25));
}

TEST(SieveBasis, AdditiveValues) {
  Eigen::VectorXd x1(1);
  x1 << 0.5;
  EXPECT_EQ(eval_v(power_spec(1, 3), x1), Eigen::Vector3d(1, 0.5, 0.25));
  Eigen::VectorXd x2(2);
  x2 << 0.2, 0.4;
  EXPECT_EQ(eval_v(power_spec(1, 3), x2), Eigen::Vector3d(1, 0.2, 0.4));
  const Eigen::VectorXd v = eval_v(power_spec(1, 5), x2);
  EXPECT_DOUBLE_EQ(v[2], 0.04);
  EXPECT_DOUBLE_EQ(v[4], 0.16);
}

TEST(SieveBasis, AdditiveRejectsBadK2) {
  Eigen::VectorXd x(2);
  x << 0.2, 0.4;
  EXPECT_THROW(eval_v(power_spec(1, 4), x), Error);
}

TEST(SieveBasis, TensorValues) {
  Eigen::VectorXd x(2);
  x << 0.3, 0.7;
  const auto v = eval_v(power_spec(1, 4, Composition::tensor), x);
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], 0.3);
  EXPECT_DOUBLE_EQ(v[2], 0.7);
  EXPECT_DOUBLE_EQ(v[3], 0.3 * 0.7);
}

TEST(SieveBasis, TensorTermsOrderedByDegree) {
  const auto terms = tensor_terms(6, 2);
  ASSERT_EQ(terms.size(), 6u);
  EXPECT_EQ(tensor_degree(6, 2), 2);
  int prev = 0;
  std::set<std::vector<int>> seen;
  for (const auto& t : terms) {
    const int deg = t[0] + t[1];
    EXPECT_GE(deg, prev);
    prev = deg;
    EXPECT_TRUE(seen.insert(t).second);
  }
  EXPECT_EQ(terms[0], (std::vector<int>{0, 0}));
  EXPECT_EQ(terms[1], (std::vector<int>{1, 0}));
  EXPECT_EQ(terms[2], (std::vector<int>{0, 1}));
}

TEST(SieveBasis, ConstantFirst) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (auto kind : {BasisKind::power, BasisKind::bspline}) {
    for (auto comp : {Composition::additive, Composition::tensor}) {
      const SieveSpec spec{5, comp == Composition::additive ? 7 : 9, BasisFamily{kind, 3}, comp};
      for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd x(3);
        x << u(rng), u(rng), u(rng);
        EXPECT_EQ(eval_u(spec, u(rng))[0], 1.0);
        EXPECT_EQ(eval_v(spec, x)[0], 1.0);
      }
    }
  }
}

TEST(SieveBasis, BsplinePartitionOfUnity) {
  for (int k = 1; k <= 9; ++k) {
    for (double t : {0.0, 0.1, 0.25, 0.5, 0.77, 0.999, 1.0}) {
      EXPECT_NEAR(bspline_values(t, k).sum(), 1.0, 1e-10) << "k=" << k << " t=" << t;
      EXPECT_GE(bspline_values(t, k).minCoeff(), 0.0);
    }
  }
}

TEST(SieveBasis, BsplineMatchesCoxDeBoor) {
  for (int k : {4, 5, 7}) {
    const int p = 3;
    const int interior = k - p - 1;
    std::vector<double> knots(p + 1, 0.0);
    for (int i = 1; i <= interior; ++i) knots.push_back(static_cast<double>(i) / (interior + 1));
    for (int i = 0; i <= p; ++i) knots.push_back(1.0);
    for (double t : {0.0, 0.13, 0.4, 0.5, 0.81, 1.0}) {
      const auto b = bspline_values(t, k);
      for (int i = 0; i < k; ++i) EXPECT_NEAR(b[i], cox_de_boor(knots, i, p, t), 1e-13) << k << " " << t << " " << i;
    }
  }
}

TEST(SieveBasis, CubicWithoutInteriorKnotsIsBernstein) {
  const double t = 0.3;
  const auto b = bspline_values(t, 4);
  EXPECT_NEAR(b[0], std::pow(1 - t, 3), 1e-15);
  EXPECT_NEAR(b[1], 3 * t * std::pow(1 - t, 2), 1e-15);
  EXPECT_NEAR(b[2], 3 * t * t * (1 - t), 1e-15);
  EXPECT_NEAR(b[3], t * t * t, 1e-15);
}

TEST(SieveBasis, BsplineRejectsOutsideUnit) {
  EXPECT_THROW(bspline_values(1.5, 4), Error);
  EXPECT_THROW(bspline_values(-0.1, 4), Error);
}

TEST(SieveBasis, Deterministic) {
  const SieveSpec spec{6, 9, BasisFamily{BasisKind::bspline, 3}, Composition::tensor};
  Eigen::VectorXd x(2);
  x << 0.123456789, 0.987654321;
  const auto a = eval_v(spec, x);
  const auto b = eval_v(spec, x);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(SieveBasis, TensorDesignColumns) {
  Eigen::MatrixXd u(2, 2);
  u << 1, 2, 1, 3;
  Eigen::MatrixXd v(2, 2);
  v << 1, 5, 1, 7;
  const auto z = tensor_design(u, v);
  ASSERT_EQ(z.cols(), 4);
  EXPECT_DOUBLE_EQ(z(0, 3), 10.0);
  EXPECT_DOUBLE_EQ(z(1, 3), 21.0);
  EXPECT_DOUBLE_EQ(z(1, 1), 3.0);
}

TEST(SieveBasis, ParseNames) {
  EXPECT_EQ(parse_basis_kind("bspline"), BasisKind::bspline);
  EXPECT_EQ(parse_composition("tensor"), Composition::tensor);
  EXPECT_THROW(parse_basis_kind("fourier"), Error);
}
