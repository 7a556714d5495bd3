#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace ctspec::cli {

inline constexpr const char* kVersion = "0.1.0";

struct DataOptions {
  std::string path;
  std::string treatment = "t";
  std::vector<std::string> covariates;  // all remaining columns when empty
  std::string outcome = "y";
  std::string treatment_transform = "none";  // none | log1p | triple-log
  bool boxcox_outcome = false;
};

struct ModelOptions {
  std::string residual = "average";  // average | quantile | median
  double tau = 0.5;
  std::optional<double> bandwidth;
  std::string family = "poly";
  int degree = 1;
  std::string instrument = "grad_g";  // grad_g | power
  int q = 0;
};

struct SieveOptions {
  std::optional<int> k1;
  std::optional<int> k2;
  std::string basis = "auto";  // auto | power | bspline
  std::string composition = "additive";
  std::string grid;            // cv grid, default grid when empty
  int folds = 10;
};

struct TestConfig {
  DataOptions data;
  ModelOptions model;
  SieveOptions sieve;
  std::vector<std::string> weights{"logistic", "cossin", "indicator"};
  double c = 5.0;
  std::string weight_scale = "original";
  int B = 500;
  std::uint64_t seed = 0;
  double ridge = 1e-8;
  double density_bandwidth_scale = 1.0;
  std::string out;
};

struct CvConfig {
  DataOptions data;
  ModelOptions model;
  SieveOptions sieve;
  std::uint64_t seed = 0;
  std::string out;
};

struct SimulateConfig {
  std::string table = "sizes";  // sizes | power | local
  std::vector<double> levels{0.01, 0.05, 0.10};
  int reps = 1000;
  int B = 500;
  std::uint64_t seed = 0;
  bool quick = false;
  bool cv_every_rep = false;
  unsigned threads = 0;
  int folds = 10;
  std::string weight_scale = "original";
  std::vector<std::string> cases;  // residual:dgp:n filters, all table cells when empty
  long n = 200;                    // local table
  std::vector<double> a_grid{0.0, 2.0, 4.0, 8.0};
  std::string out;
};

struct GenerateConfig {
  std::string dgp = "dgp0-l";
  long n = 500;
  double a = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct ReportConfig {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_test(const TestConfig& config, std::ostream& log);
int cmd_cv(const CvConfig& config, std::ostream& log);
int cmd_simulate(const SimulateConfig& config, std::ostream& log);
int cmd_generate(const GenerateConfig& config, std::ostream& log);
int cmd_report(const ReportConfig& config, std::ostream& log);

/// "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Command-line flag for a config key: documented dotted keys (boot.B,
/// residual.kind, ...) map to their flags, anything else to --key.
std::string config_key_to_flag(const std::string& key);

/// p formatted for reports: "< 1/B" when exactly 0.
std::string format_p_value(double p, int B);

}  // namespace ctspec::cli
