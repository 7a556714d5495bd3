// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: ctspec_acceptance [--quick] [--only N[,N...]] [--threads T]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "ctspec/entropy_balance.hpp"
#include "ctspec/errors.hpp"
#include "ctspec/random.hpp"
#include "ctspec/simlab.hpp"
#include "ctspec/spec_test.hpp"

using namespace ctspec;
namespace fs = std::filesystem;

namespace {

struct Settings {
  bool quick = false;
  int reps = 1000;
  double tol_scale = 1.0;
  unsigned threads = 0;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

McOptions mc_options(const Settings& s, int reps, std::uint64_t seed) {
  McOptions o;
  o.reps = reps;
  o.B = 500;
  o.seed = seed;
  o.threads = s.threads;
  return o;
}

Dataset random_dataset(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Eigen::VectorXd t(n);
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    t[i] = 0.5 * x(i, 0) + z(rng);
    y[i] = x(i, 0) + t[i] + z(rng);
  }
  return Dataset(t, x, y);
}

// 1. Size at N = 500 on DGP0-L, average residual.
Outcome size_reproduction(const Settings& s) {
  McCase c{ResidualSpec::average(), DgpId::dgp0_l, 500, 0.0,
           {WeightFunctionSpec::logistic(), WeightFunctionSpec::cosine_sine(), WeightFunctionSpec::indicator()}};
  const McCell cell = run_cell(c, mc_options(s, s.reps, 101));
  const std::vector<std::vector<double>> target{{0.011, 0.051, 0.109}, {0.012, 0.050, 0.101}, {0.014, 0.049, 0.111}};
  const std::vector<double> tol{0.015, 0.02, 0.03};
  Outcome out{true, {}};
  for (std::size_t w = 0; w < 3; ++w) {
    out.detail += cell.results[w].weight.name() + " (";
    for (std::size_t l = 0; l < 3; ++l) {
      const double rate = cell.results[w].rate_cm[l];
      if (std::abs(rate - target[w][l]) > tol[l] * s.tol_scale) out.pass = false;
      out.detail += (l ? " " : "") + fmt(rate);
    }
    out.detail += ") ";
  }
  out.detail += "K=(" + std::to_string(cell.sieve.k1) + "," + std::to_string(cell.sieve.k2) + ")";
  if (cell.failures > 0) out.detail += " failures=" + std::to_string(cell.failures);
  return out;
}

// 2. Power at N = 200.
Outcome power_reproduction(const Settings& s) {
  McCase avg{ResidualSpec::average(), DgpId::dgp1_l, 200, 0.0, {WeightFunctionSpec::logistic()}};
  McCase med{ResidualSpec::quantile(0.5), DgpId::dgp1_nl, 200, 0.0, {WeightFunctionSpec::cosine_sine()}};
  McOptions o = mc_options(s, s.reps, 102);
  o.levels = {0.05};
  const double a = run_cell(avg, o).results[0].rate_cm[0];
  o.seed = 103;
  const double m = run_cell(med, o).results[0].rate_cm[0];
  return {a >= 0.95 && std::abs(m - 0.762) <= 0.08 * s.tol_scale,
          "average/DGP1-L logistic " + fmt(a) + " (>= 0.95), median/DGP1-NL cossin " + fmt(m) + " (0.762 +- " +
              fmt(0.08 * s.tol_scale, 2) + ")"};
}

// 3. Small-sample over-rejection of the median test.
Outcome small_sample_pattern(const Settings& s) {
  McCase c{ResidualSpec::quantile(0.5), DgpId::dgp0_nl, 100, 0.0, {WeightFunctionSpec::logistic()}};
  McOptions o = mc_options(s, s.reps, 104);
  o.levels = {0.05};
  const double rate = run_cell(c, o).results[0].rate_cm[0];
  return {rate > 0.08, "median/DGP0-NL N=100 logistic at 5%: " + fmt(rate) + " (> 0.08)"};
}

// 4. Dual gradient against central differences, constraints at convergence, runtime.
Outcome dual_solver(const Settings&) {
  const SieveSpec spec{3, 3, BasisFamily{BasisKind::power, 3}, Composition::additive};
  double worst_grad = 0.0;
  double worst_gap = 0.0;
  double worst_mean = 0.0;
  double slowest = 0.0;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  for (int f = 0; f < 20; ++f) {
    const Dataset d = random_dataset(50, 1000 + f);
    const DualObjective obj(design_u(spec, d.t_std()), design_v(spec, d.x_std()));
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(3, 3);
    lambda(0, 0) = -1.0;
    for (auto& v : lambda.reshaped()) v += 0.2 * z(rng);
    const Eigen::MatrixXd g = obj.gradient(lambda);
    const double h = 1e-5;
    Eigen::MatrixXd fd(3, 3);
    for (Eigen::Index k = 0; k < 9; ++k) {
      Eigen::MatrixXd up = lambda;
      Eigen::MatrixXd dn = lambda;
      up.reshaped()[k] += h;
      dn.reshaped()[k] -= h;
      fd.reshaped()[k] = (obj.value(up) - obj.value(dn)) / (2 * h);
    }
    worst_grad = std::max(worst_grad, (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()));

    const auto start = std::chrono::steady_clock::now();
    const BalanceFit fit = fit_weights(d, spec);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    worst_gap = std::max(worst_gap, fit.constraint_gap);
    worst_mean = std::max(worst_mean, std::abs(fit.weights.mean() - 1.0));
  }
  std::ostringstream detail;
  detail << "max rel gradient error " << worst_grad << ", max constraint_gap " << worst_gap << ", max |mean(pi)-1| "
         << worst_mean << ", slowest fit " << fmt(slowest, 4) << " s";
  return {worst_grad <= 1e-6 && worst_gap <= 1e-6 && worst_mean <= 1e-6 && slowest < 1.0, detail.str()};
}

// 5. K1 = K2 = 1 gives unit weights.
Outcome trivial_weights(const Settings&) {
  const SieveSpec spec{1, 1, BasisFamily{}, Composition::additive};
  double worst_lambda = 0.0;
  double worst_w = 0.0;
  for (int f = 0; f < 10; ++f) {
    const Dataset d = random_dataset(30 + 40 * f, 2000 + f);
    const BalanceFit fit = fit_weights(d, spec);
    worst_lambda = std::max(worst_lambda, std::abs(fit.lambda(0, 0) + 1.0));
    worst_w = std::max(worst_w, (fit.weights.array() - 1.0).abs().maxCoeff());
  }
  std::ostringstream detail;
  detail << "max |Lambda+1| " << worst_lambda << ", max |pi-1| " << worst_w;
  return {worst_lambda <= 1e-8 && worst_w <= 1e-8, detail.str()};
}

// 6. N = 4 indicator example by hand and by brute force; CM <= KS^2.
Outcome statistic_oracle(const Settings&) {
  const Eigen::Vector4d u(1, -1, 2, 0);
  const Eigen::Vector4d t(0.1, 0.2, 0.3, 0.4);
  const auto wf = WeightFunctionSpec::indicator();
  const TestStatistics st = compute_statistics(u, t, wf);
  // running sums of u over sorted t, divided by sqrt(4)
  const Eigen::Vector4d hand(0.5, 0.0, 1.0, 1.0);
  double err = (st.j_values - hand).cwiseAbs().maxCoeff();
  err = std::max(err, std::abs(st.cm - 0.5625));
  err = std::max(err, std::abs(st.ks - 1.0));
  const Eigen::VectorXd pts = evaluation_points(t);
  double cm = 0.0;
  double ks = 0.0;
  for (Eigen::Index m = 0; m < pts.size(); ++m) {
    double j = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) j += u[i] * (t[i] <= pts[m] ? 1.0 : 0.0);
    j /= 2.0;
    err = std::max(err, std::abs(j - st.j_grid[m]));
    if (m < 4) cm += j * j / 4.0;
    ks = std::max(ks, std::abs(j));
  }
  err = std::max({err, std::abs(cm - st.cm), std::abs(ks - st.ks)});

  int violations = 0;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (int f = 0; f < 100; ++f) {
    Eigen::VectorXd uu(30);
    Eigen::VectorXd tt(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
      uu[i] = z(rng);
      tt[i] = z(rng);
    }
    for (const auto& w :
         {WeightFunctionSpec::indicator(), WeightFunctionSpec::cosine_sine(), WeightFunctionSpec::logistic()}) {
      const TestStatistics r = compute_statistics(uu, tt, w);
      if (r.cm > r.ks * r.ks) ++violations;
    }
  }
  std::ostringstream detail;
  detail << "max error vs hand/brute force " << err << ", CM > KS^2 on " << violations << " of 300 fixtures";
  return {err <= 1e-12 && violations == 0, detail.str()};
}

// 7. Bootstrap p-values are uniform under the null.
Outcome bootstrap_validity(const Settings& s) {
  McCase c{ResidualSpec::average(), DgpId::dgp0_l, 200, 0.0,
           {WeightFunctionSpec::logistic(), WeightFunctionSpec::cosine_sine(), WeightFunctionSpec::indicator()}};
  const McCell cell = run_cell(c, mc_options(s, s.reps, 107));
  const double tol = 0.05 * s.tol_scale;
  Outcome out{true, {}};
  for (const auto& r : cell.results) {
    std::vector<double> p = r.p_cm;
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      sup = std::max({sup, std::abs((i + 1) / n - p[i]), std::abs(p[i] - i / n)});
    }
    if (sup > tol) out.pass = false;
    out.detail += r.weight.name() + " " + fmt(sup) + " ";
  }
  out.detail += "(sup distance <= " + fmt(tol, 2) + ")";
  return out;
}

// 8. Estimated weights do not inflate the variance of J at the median treatment.
Outcome efficiency(const Settings& s) {
  const EfficiencyResult r = efficiency_experiment(DgpId::dgp0_l, 200, ResidualSpec::average(),
                                                   WeightFunctionSpec::logistic(), mc_options(s, s.reps, 108));
  const double ratio = r.var_feasible / r.var_infeasible;
  return {ratio <= 1.05, "var(J_N)=" + fmt(r.var_feasible, 4) + " var(J_0)=" + fmt(r.var_infeasible, 4) +
                             " ratio " + fmt(ratio) + " (<= 1.05)"};
}

// 9. Local alternatives: monotone power, nominal size at a = 0.
Outcome local_power(const Settings& s) {
  const auto curve = local_power_curve({0.0, 2.0, 4.0, 8.0}, 200, WeightFunctionSpec::logistic(), 0.05,
                                       mc_options(s, s.reps, 109));
  bool monotone = true;
  std::string detail;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    detail += "a=" + fmt(curve[k].a, 0) + ":" + fmt(curve[k].rate) + " ";
    if (k > 0) {
      const double se = std::hypot(curve[k].se, curve[k - 1].se);
      if (curve[k].rate < curve[k - 1].rate - 2 * se) monotone = false;
    }
  }
  const bool nominal = std::abs(curve[0].rate - 0.05) <= 0.02 * s.tol_scale;
  detail += monotone ? "monotone" : "not monotone";
  return {monotone && nominal, detail};
}

// 10. Commands are bit-reproducible.
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
  std::set<std::string> other;
  for (const auto& e : fs::directory_iterator(b)) other.insert(e.path().filename().string());
  if (names != other || names.empty()) {
    why = "file sets differ in " + a.filename().string();
    return false;
  }
  for (const auto& n : names) {
    if (slurp(a / n) != slurp(b / n)) {
      why = n + " differs";
      return false;
    }
  }
  return true;
}

Outcome determinism(const Settings& s) {
  const fs::path root = fs::temp_directory_path() / "ctspec_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream log;
  std::string why;
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    cli::GenerateConfig g;
    g.dgp = "dgp1-nl";
    g.n = 300;
    g.seed = 5;
    g.out = (root / run / "generate" / "data.csv").string();
    cli::cmd_generate(g, log);

    cli::TestConfig t;
    t.data.path = (root / "a" / "generate" / "data.csv").string();
    t.model.residual = "median";
    t.B = 200;
    t.seed = 9;
    t.sieve.folds = 5;
    t.out = (root / run / "test").string();
    t.sieve.grid = "2:2,3:3,4:5";
    cli::cmd_test(t, log);

    cli::SimulateConfig sim;
    sim.cases = {"average:dgp0-l:100", "median:dgp0-nl:100"};
    sim.reps = 20;
    sim.B = 100;
    sim.seed = 3;
    sim.threads = s.threads;
    sim.out = (root / run / "simulate").string();
    cli::cmd_simulate(sim, log);
  }
  for (const char* sub : {"generate", "test", "simulate"}) {
    if (!same_tree(root / "a" / sub, root / "b" / sub, why)) ok = false;
  }
  return {ok, ok ? "generate, test (with cv) and simulate outputs identical across runs" : why};
}

// 11. theta is consistent under the null.
Outcome theta_consistency(const Settings& s) {
  McCase c{ResidualSpec::average(), DgpId::dgp0_l, 2000, 0.0, {WeightFunctionSpec::indicator()}};
  McOptions o = mc_options(s, s.quick ? 50 : 200, 111);
  o.B = 20;
  o.levels = {0.05};
  const McCell cell = run_cell(c, o);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& th : cell.theta) mean += th;
  mean /= static_cast<double>(cell.theta.size());
  const double err = std::max(std::abs(mean[0] - 1.5), std::abs(mean[1] - 1.0));
  return {err <= 0.05 * s.tol_scale, "mean theta (" + fmt(mean[0], 4) + ", " + fmt(mean[1], 4) + ") over " +
                                         std::to_string(cell.theta.size()) + " reps"};
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--quick") {
      s.quick = true;
      s.reps = 200;
      s.tol_scale = 2.0;
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (arg == "--threads" && i + 1 < argc) {
      s.threads = static_cast<unsigned>(std::stoul(argv[++i]));
    } else {
      std::cerr << "usage: ctspec_acceptance [--quick] [--only N[,N...]] [--threads T]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome(const Settings&)>>> criteria{
      {"size reproduction", size_reproduction},
      {"power reproduction", power_reproduction},
      {"small-sample over-rejection", small_sample_pattern},
      {"dual solver", dual_solver},
      {"trivial weights", trivial_weights},
      {"statistic oracle", statistic_oracle},
      {"bootstrap validity", bootstrap_validity},
      {"efficiency", efficiency},
      {"local power", local_power},
      {"determinism", determinism},
      {"theta consistency", theta_consistency},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[k].second(s);
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failed;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << " " << criteria[k].first << ": " << out.detail
              << " [" << fmt(secs, 1) << " s]" << std::endl;
  }
  std::cout << (failed ? "FAILED " + std::to_string(failed) + " criteria" : std::string("ALL PASSED"))
            << (s.quick ? " (quick)" : "") << std::endl;
  return failed ? 1 : 0;
}
