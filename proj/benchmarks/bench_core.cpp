#include <benchmark/benchmark.h>

#include "ctspec/entropy_balance.hpp"
#include "ctspec/model_select.hpp"
#include "ctspec/null_approx.hpp"
#include "ctspec/simlab.hpp"

using namespace ctspec;

namespace {

const SieveSpec kSieve{4, 3, BasisFamily{}, Composition::additive};

Dataset sample(Eigen::Index n) { return generate({DgpId::dgp0_l, n, 0.0, false}, 1).data; }

void BM_FitWeights(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_weights(d, kSieve));
}
BENCHMARK(BM_FitWeights)->Arg(200)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_JProcess(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  const Eigen::VectorXd pts = evaluation_points(d.t());
  for (auto _ : state) benchmark::DoNotOptimize(j_process(d.y(), d.t(), WeightFunctionSpec::logistic(), pts));
}
BENCHMARK(BM_JProcess)->Arg(200)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Bootstrap(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  const auto model = DoseResponseModel::polynomial(1);
  const auto wf = WeightFunctionSpec::logistic();
  const BalanceFit fit = fit_weights(d, kSieve);
  const ThetaFit theta = fit_theta(d, fit.weights, ResidualSpec::average(), model, InstrumentSpec::grad_g());
  const Eigen::VectorXd pts = evaluation_points(d.t());
  const TestStatistics obs = compute_statistics(theta.residuals, d, wf);
  for (auto _ : state) {
    const InfluenceEstimator est(d, fit, theta, ResidualSpec::average(), model, InstrumentSpec::grad_g(), wf);
    benchmark::DoNotOptimize(multiplier_bootstrap(est, pts, d.size(), obs, 500, 3));
  }
}
BENCHMARK(BM_Bootstrap)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_CrossValidate(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cross_validate(d, default_grid(1), ResidualSpec::average(),
                                            DoseResponseModel::polynomial(1), InstrumentSpec::grad_g()));
  }
}
BENCHMARK(BM_CrossValidate)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
