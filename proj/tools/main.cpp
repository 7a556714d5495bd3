#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ctspec/errors.hpp"

namespace {

using namespace ctspec::cli;

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.path, "Input CSV")->required();
  app->add_option("--treatment", d.treatment, "Treatment column");
  app->add_option("--covariates", d.covariates, "Covariate columns (default: all others)")->delimiter(',');
  app->add_option("--outcome", d.outcome, "Outcome column");
  app->add_option("--treatment-transform", d.treatment_transform, "none, log1p or triple-log")
      ->check(CLI::IsMember({"none", "log1p", "triple-log"}));
  app->add_flag("--boxcox-outcome", d.boxcox_outcome, "Box-Cox transform the outcome (grid search)");
}

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--residual", m.residual, "average, quantile or median");
  app->add_option("--tau", m.tau, "Quantile level");
  app->add_option("--bandwidth", m.bandwidth, "Quantile smoothing bandwidth");
  app->add_option("--family", m.family, "Dose-response family (poly)");
  app->add_option("--degree", m.degree, "Polynomial degree p - 1");
  app->add_option("--instrument", m.instrument, "grad_g or power");
  app->add_option("--q", m.q, "Power instrument dimension q (w = 1, t, ..., t^(q-1))");
}

void add_sieve_options(CLI::App* app, SieveOptions& s) {
  app->add_option("--k1", s.k1, "Treatment sieve size (skips CV with --k2)");
  app->add_option("--k2", s.k2, "Covariate sieve size");
  app->add_option("--basis", s.basis, "auto, power or bspline");
  app->add_option("--composition", s.composition, "additive or tensor");
  app->add_option("--grid", s.grid, "CV grid, e.g. \"2:3,3:5\"");
  app->add_option("--folds", s.folds, "CV folds");
}

/// Inserts "--flag=value" for config-file keys whose flag is not already on
/// the command line, right after the subcommand name.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::set<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    }
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
  }
  if (path.empty() || args.size() < 2) return args;
  std::vector<std::string> out{args[0], args[1]};
  for (const auto& [key, value] : read_config_file(path)) {
    const std::string flag = config_key_to_flag(key);
    if (!given.count(flag)) out.push_back(flag + "=" + value);
  }
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw(argv, argv + argc);
  try {
    raw = expand_config(raw);
  } catch (const ctspec::Error& e) {
    std::cerr << e.what() << '\n';
    return ctspec::exit_code(e.kind());
  }

  CLI::App app{"Specification tests for continuous-treatment dose-response models"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;

  TestConfig test;
  auto* t = app.add_subcommand("test", "Test a dose-response model on a CSV dataset");
  add_data_options(t, test.data);
  add_model_options(t, test.model);
  add_sieve_options(t, test.sieve);
  t->add_option("--weights", test.weights, "Weight functions")->delimiter(',');
  t->add_option("--c", test.c, "Logistic offset");
  t->add_option("--weight-scale", test.weight_scale, "original or standardized");
  t->add_option("--B", test.B, "Bootstrap draws");
  t->add_option("--seed", test.seed, "Seed");
  t->add_option("--ridge", test.ridge, "Plug-in ridge");
  t->add_option("--density-bandwidth-scale", test.density_bandwidth_scale, "Conditional density bandwidth factor");
  t->add_option("--out", test.out, "Output directory")->required();
  t->add_option("--config", config_path, "key = value config file");

  CvConfig cv;
  auto* c = app.add_subcommand("cv", "Cross-validate the sieve sizes");
  add_data_options(c, cv.data);
  add_model_options(c, cv.model);
  add_sieve_options(c, cv.sieve);
  c->add_option("--seed", cv.seed, "Seed");
  c->add_option("--out", cv.out, "Output directory");
  c->add_option("--config", config_path, "key = value config file");

  SimulateConfig sim;
  auto* s = app.add_subcommand("simulate", "Monte Carlo size, power and local-power tables");
  s->add_option("--table", sim.table, "sizes, power or local")->check(CLI::IsMember({"sizes", "power", "local"}));
  s->add_option("--levels", sim.levels, "Nominal levels")->delimiter(',');
  s->add_option("--reps", sim.reps, "Replications per cell");
  s->add_option("--B", sim.B, "Bootstrap draws");
  s->add_option("--seed", sim.seed, "Root seed");
  s->add_flag("--quick", sim.quick, "At most 200 replications");
  s->add_flag("--cv-every-rep", sim.cv_every_rep, "Cross-validate in every replication");
  s->add_option("--threads", sim.threads, "Worker threads (0: hardware)");
  s->add_option("--folds", sim.folds, "CV folds");
  s->add_option("--weight-scale", sim.weight_scale, "original or standardized");
  s->add_option("--case", sim.cases, "Cell filter residual:dgp:n (repeatable)");
  s->add_option("--n", sim.n, "Sample size for the local table");
  s->add_option("--a-grid", sim.a_grid, "Drift scales for the local table")->delimiter(',');
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--config", config_path, "key = value config file");

  GenerateConfig gen;
  auto* g = app.add_subcommand("generate", "Write a simulated dataset as CSV");
  g->add_option("--dgp", gen.dgp, "dgp0-l, dgp0-nl, dgp1-l or dgp1-nl");
  g->add_option("--n", gen.n, "Sample size");
  g->add_option("--a", gen.a, "Local drift scale");
  g->add_option("--seed", gen.seed, "Seed");
  g->add_option("--out", gen.out, "Output CSV")->required();
  g->add_option("--config", config_path, "key = value config file");

  ReportConfig rep;
  auto* r = app.add_subcommand("report", "Summarize simulate outputs as markdown");
  r->add_option("--in", rep.inputs, "Output directories or CSV files")->required();
  r->add_option("--out", rep.out, "Markdown file");

  std::vector<const char*> cargs;
  for (const auto& a : raw) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ctspec::exit_code(ctspec::ErrorKind::config);
  }

  try {
    if (*t) return cmd_test(test, std::cout);
    if (*c) return cmd_cv(cv, std::cout);
    if (*s) return cmd_simulate(sim, std::cout);
    if (*g) return cmd_generate(gen, std::cout);
    if (*r) return cmd_report(rep, std::cout);
  } catch (const ctspec::Error& e) {
    std::cerr << e.what() << '\n';
    return ctspec::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "[cli] error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
