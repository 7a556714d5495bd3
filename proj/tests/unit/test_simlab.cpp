#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ctspec/errors.hpp"
#include "ctspec/simlab.hpp"
#include "fixtures.hpp"

using namespace ctspec;

namespace {

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
// antiderivative of the normal CDF
double norm_cdf_integral(double z) { return z * norm_cdf(z) + norm_pdf(z); }

McOptions small_options(int reps, std::uint64_t seed = 1) {
  McOptions o;
  o.reps = reps;
  o.B = 60;
  o.seed = seed;
  o.sieve = SieveSpec{3, 3, BasisFamily{BasisKind::power, 3}, Composition::additive};
  o.threads = 1;
  return o;
}

McCase average_case(DgpId dgp, Eigen::Index n) {
  return {ResidualSpec::average(), dgp, n, 0.0,
          {WeightFunctionSpec::logistic(), WeightFunctionSpec::cosine_sine(), WeightFunctionSpec::indicator()}};
}

}  // namespace

TEST(Simlab, ZeroNoiseLinearDgp) {
  const SimSample s = generate({DgpId::dgp0_l, 50, 0.0, true}, 3);
  for (Eigen::Index i = 0; i < 50; ++i) {
    const double x = s.data.x()(i, 0);
    EXPECT_DOUBLE_EQ(s.data.t()[i], 1.0 + 0.2 * x);
    EXPECT_DOUBLE_EQ(s.data.y()[i], 1.0 + x + s.data.t()[i]);
  }
}

TEST(Simlab, ZeroNoiseOtherDgps) {
  const SimSample nl = generate({DgpId::dgp0_nl, 20, 0.0, true}, 4);
  const SimSample alt = generate({DgpId::dgp1_nl, 20, 0.0, true}, 4);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double x = nl.data.x()(i, 0);
    EXPECT_DOUBLE_EQ(nl.data.t()[i], 0.1 * x * x);
    EXPECT_DOUBLE_EQ(nl.data.y()[i], x * x + nl.data.t()[i]);
    const double xa = alt.data.x()(i, 0);
    const double ta = alt.data.t()[i];
    EXPECT_NEAR(alt.data.y()[i], xa * xa + 0.2 * ta * ta * ta, 1e-15);
  }
}

TEST(Simlab, ConditionalAndMarginalDensities) {
  EXPECT_NEAR(true_ratio(DgpId::dgp0_l, 1.0, 0.0) * norm_pdf(0.0), treatment_density(DgpId::dgp0_l, 1.0), 1e-14);
  for (double t : {-1.0, 0.3, 1.0, 1.7, 3.2}) {
    const double f = (norm_cdf(t - 1.0) - norm_cdf(t - 1.2)) / 0.2;
    EXPECT_NEAR(treatment_density(DgpId::dgp0_l, t), f, 1e-12) << t;
    EXPECT_NEAR(treatment_density(DgpId::dgp1_l, t), f, 1e-12) << t;
    const double cdf = (norm_cdf_integral(t - 1.0) - norm_cdf_integral(t - 1.2)) / 0.2;
    EXPECT_NEAR(treatment_cdf(DgpId::dgp0_l, t), cdf, 1e-12) << t;
  }
  EXPECT_NEAR(treatment_mean(DgpId::dgp0_nl, 0.5), 0.025, 1e-15);
  EXPECT_NEAR(treatment_cdf(DgpId::dgp0_nl, 40.0), 1.0, 1e-12);
}

TEST(Simlab, TrueRatioHasUnitMean) {
  for (DgpId id : {DgpId::dgp0_l, DgpId::dgp0_nl, DgpId::dgp1_l, DgpId::dgp1_nl}) {
    const SimSample s = generate({id, 100000, 0.0, false}, 17);
    EXPECT_NEAR(s.truth.pi0.mean(), 1.0, 0.02) << to_string(id);
  }
}

TEST(Simlab, TrueTheta) {
  const auto avg_l = true_theta(DgpId::dgp0_l, ResidualSpec::average());
  ASSERT_TRUE(avg_l);
  EXPECT_EQ(*avg_l, Eigen::Vector2d(1.5, 1.0));
  const auto avg_nl = true_theta(DgpId::dgp0_nl, ResidualSpec::average());
  EXPECT_NEAR((*avg_nl)[0], 1.0 / 3.0, 1e-15);
  const auto med_l = true_theta(DgpId::dgp0_l, ResidualSpec::quantile(0.5));
  EXPECT_NEAR((*med_l)[0], 1.5, 1e-9);
  EXPECT_FALSE(true_theta(DgpId::dgp1_l, ResidualSpec::average()));

  // quantile of X + eps by bisection on its CDF: int_0^1 Phi(q - x) dx
  const double tau = 0.3;
  double lo = -5.0;
  double hi = 5.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf_integral(mid) - norm_cdf_integral(mid - 1.0) < tau ? lo : hi) = mid;
  }
  const auto q_l = true_theta(DgpId::dgp0_l, ResidualSpec::quantile(tau));
  EXPECT_NEAR((*q_l)[0], 1.0 + 0.5 * (lo + hi), 1e-8);
  EXPECT_EQ((*q_l)[1], 1.0);
}

TEST(Simlab, LocalDriftUsesCommonDraws) {
  const SimSample a = generate({DgpId::dgp0_l, 100, 0.0, false}, 5);
  const SimSample b = generate({DgpId::dgp0_l, 100, 4.0, false}, 5);
  EXPECT_EQ(a.data.t(), b.data.t());
  EXPECT_EQ(a.data.x(), b.data.x());
  for (Eigen::Index i = 0; i < 100; ++i) {
    const double delta = std::sin(2 * std::numbers::pi * treatment_cdf(DgpId::dgp0_l, a.data.t()[i]));
    EXPECT_NEAR(b.data.y()[i] - a.data.y()[i], 4.0 / 10.0 * delta, 1e-12);
  }
}

TEST(Simlab, GenerateIsDeterministic) {
  const SimSample a = generate({DgpId::dgp1_nl, 64, 0.0, false}, 99);
  const SimSample b = generate({DgpId::dgp1_nl, 64, 0.0, false}, 99);
  EXPECT_EQ(a.data.y(), b.data.y());
  EXPECT_EQ(a.truth.pi0, b.truth.pi0);
  EXPECT_THROW(generate({DgpId::dgp0_l, 1, 0.0, false}, 1), Error);
}

TEST(Simlab, InfeasibleWithUnitRatioMatchesFeasibleWithUnitWeights) {
  const SimSample s = generate({DgpId::dgp0_l, 150, 0.0, false}, 7);
  HiddenTruth ones{Eigen::VectorXd::Ones(150), std::nullopt};
  const auto model = DoseResponseModel::polynomial(1);
  const auto wf = WeightFunctionSpec::logistic();
  const TestStatistics a = infeasible_statistic(s.data, ones, ResidualSpec::average(), model,
                                                InstrumentSpec::grad_g(), wf);
  const ThetaFit t = fit_theta(s.data, Eigen::VectorXd::Ones(150), ResidualSpec::average(), model,
                               InstrumentSpec::grad_g());
  const TestStatistics b = compute_statistics(t.residuals, s.data, wf);
  EXPECT_EQ(a.cm, b.cm);
  EXPECT_EQ(a.ks, b.ks);
}

TEST(Simlab, InfeasibleNeedsTruthAndHandlesTwoPoints) {
  const SimSample s = generate({DgpId::dgp0_l, 2, 0.0, false}, 8);
  const auto model = DoseResponseModel::polynomial(1);
  EXPECT_NO_THROW(infeasible_statistic(s.data, s.truth, ResidualSpec::average(), model, InstrumentSpec::grad_g(),
                                       WeightFunctionSpec::indicator()));
  try {
    infeasible_statistic(s.data, std::nullopt, ResidualSpec::average(), model, InstrumentSpec::grad_g(),
                         WeightFunctionSpec::indicator());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported);
  }
}

TEST(Simlab, RejectionRate) {
  const std::vector<double> p{0.01, 0.05, 0.2, 0.5, 0.049};
  EXPECT_DOUBLE_EQ(rejection_rate(p, 0.05), 0.6);
  EXPECT_DOUBLE_EQ(rejection_rate(p, 0.01), 0.2);
  EXPECT_DOUBLE_EQ(mc_standard_error(0.05, 1000), std::sqrt(0.05 * 0.95 / 1000));
}

TEST(Simlab, CellIsReproducibleAcrossThreadCounts) {
  McOptions one = small_options(12, 21);
  McOptions many = one;
  many.threads = 3;
  const McCell a = run_cell(average_case(DgpId::dgp0_l, 100), one);
  const McCell b = run_cell(average_case(DgpId::dgp0_l, 100), many);
  EXPECT_EQ(a.failures, 0);
  ASSERT_EQ(a.results.size(), 3u);
  for (std::size_t w = 0; w < 3; ++w) {
    EXPECT_EQ(a.results[w].p_cm, b.results[w].p_cm);
    EXPECT_EQ(a.results[w].p_ks, b.results[w].p_ks);
    ASSERT_EQ(a.results[w].rate_cm.size(), 3u);
  }
}

TEST(Simlab, CellWithCrossValidation) {
  McOptions o = small_options(4, 3);
  o.sieve.reset();
  o.grid = parse_grid("2:2,3:3");
  const McCell c = run_cell(average_case(DgpId::dgp0_nl, 100), o);
  EXPECT_EQ(c.reps, 4);
  EXPECT_TRUE(c.sieve == (GridPoint{2, 2}) || c.sieve == (GridPoint{3, 3}));
  EXPECT_EQ(c.theta.size(), static_cast<std::size_t>(c.reps - c.failures));
}

TEST(Simlab, WeightScaleChoiceDoesNotChangeData) {
  // logistic on the two scales sees the same datasets: identical theta per replication
  McOptions o = small_options(3, 5);
  McCase orig = average_case(DgpId::dgp0_l, 100);
  McCase stdz = orig;
  for (auto& w : stdz.weights) w.scale = TreatmentScale::standardized;
  const McCell a = run_cell(orig, o);
  const McCell b = run_cell(stdz, o);
  ASSERT_EQ(a.theta.size(), b.theta.size());
  for (std::size_t r = 0; r < a.theta.size(); ++r) EXPECT_EQ(a.theta[r], b.theta[r]);
}

TEST(Simlab, ReportFormats) {
  McReport report;
  report.levels = {0.05};
  report.reps = 4;
  report.B = 60;
  report.cells.push_back(run_cell(average_case(DgpId::dgp0_l, 100), small_options(4, 2)));
  const std::string csv = format_report_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "residual,dgp,n,a,weight,statistic,level,rate,se,reps,failures,flagged,k1,k2");
  const std::string table = format_report_table(report);
  EXPECT_NE(table.find("DGP0-L"), std::string::npos);
  EXPECT_NE(table.find("logistic 5%"), std::string::npos);
}

TEST(Simlab, CaseLists) {
  EXPECT_EQ(size_cases().size(), 12u);
  EXPECT_EQ(power_cases().size(), 8u);
  for (const auto& c : size_cases()) EXPECT_EQ(c.weights.size(), 3u);
}

TEST(Simlab, LocalPowerCurveShape) {
  const auto curve = local_power_curve({0.0, 8.0}, 100, WeightFunctionSpec::logistic(), 0.05, small_options(6, 4));
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].a, 0.0);
  EXPECT_EQ(curve[1].reps, 6);
}

TEST(Simlab, EfficiencyExperimentShape) {
  const EfficiencyResult r = efficiency_experiment(DgpId::dgp0_l, 100, ResidualSpec::average(),
                                                   WeightFunctionSpec::logistic(), small_options(8, 6));
  EXPECT_EQ(r.feasible.size() + r.failures, 8);
  EXPECT_EQ(r.feasible.size(), r.infeasible.size());
  EXPECT_GT(r.var_infeasible, 0.0);
}

TEST(Simlab, ParseDgp) {
  EXPECT_EQ(parse_dgp("DGP0-L"), DgpId::dgp0_l);
  EXPECT_EQ(parse_dgp("dgp1_nl"), DgpId::dgp1_nl);
  EXPECT_THROW(parse_dgp("dgp2"), Error);
}
