#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <Eigen/Core>
#include "json.hpp"

#include "ctspec/dataset.hpp"
#include "ctspec/dose_response.hpp"
#include "ctspec/entropy_balance.hpp"
#include "ctspec/errors.hpp"
#include "ctspec/model_select.hpp"
#include "ctspec/null_approx.hpp"
#include "ctspec/random.hpp"
#include "ctspec/sieve_basis.hpp"
#include "ctspec/simlab.hpp"
#include "ctspec/spec_test.hpp"

namespace ctspec::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kModule = "cli";

std::string num(double v, int digits = 10) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::string join(const std::vector<std::string>& items, const std::string& sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw Error(ErrorKind::config, kModule, "--out is required");
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::file, kModule, "cannot create output directory '" + out + "'");
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::file, kModule, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(ErrorKind::file, kModule, "failed writing '" + path.string() + "'");
}

json versions() {
  return json{{"ctspec", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__}};
}

void write_manifest(const fs::path& dir, const std::string& command, json config, std::uint64_t seed,
                    std::vector<std::string> outputs) {
  std::sort(outputs.begin(), outputs.end());
  json m;
  m["command"] = command;
  m["config"] = std::move(config);
  m["seed"] = seed;
  m["versions"] = versions();
  m["outputs"] = outputs;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

json data_json(const DataOptions& d) {
  return json{{"data.path", d.path},
              {"data.treatment", d.treatment},
              {"data.covariates", join(d.covariates)},
              {"data.outcome", d.outcome},
              {"data.treatment_transform", d.treatment_transform},
              {"data.boxcox_outcome", d.boxcox_outcome}};
}

json model_json(const ModelOptions& m) {
  return json{{"residual.kind", m.residual},
              {"residual.tau", m.tau},
              {"residual.bandwidth", m.bandwidth ? json(*m.bandwidth) : json("default")},
              {"model.family", m.family},
              {"model.degree", m.degree},
              {"instrument.kind", m.instrument},
              {"instrument.q", m.q}};
}

json sieve_json(const SieveOptions& s) {
  return json{{"sieve.k1", s.k1 ? json(*s.k1) : json("cv")},
              {"sieve.k2", s.k2 ? json(*s.k2) : json("cv")},
              {"sieve.basis", s.basis},
              {"sieve.composition", s.composition},
              {"cv.grid", s.grid.empty() ? "default" : s.grid},
              {"cv.folds", s.folds}};
}

ResidualSpec residual_spec(const ModelOptions& m) {
  const ResidualKind kind = parse_residual_kind(m.residual);
  if (kind == ResidualKind::average) return ResidualSpec::average();
  const double tau = m.residual == "median" ? 0.5 : m.tau;
  return ResidualSpec::quantile(tau, m.bandwidth);
}

DoseResponseModel model_spec(const ModelOptions& m) {
  if (m.family != "poly") throw Error(ErrorKind::config, kModule, "model.family must be 'poly'");
  if (m.degree < 0) throw Error(ErrorKind::config, kModule, "model.degree must be non-negative");
  return DoseResponseModel::polynomial(m.degree);
}

InstrumentSpec instrument_spec(const ModelOptions& m) {
  return parse_instrument_kind(m.instrument) == InstrumentKind::grad_g ? InstrumentSpec::grad_g()
                                                                        : InstrumentSpec::power(m.q);
}

double transform_treatment(const std::string& name, double t) {
  if (name == "none") return t;
  if (name == "log1p") return std::log1p(t);
  if (name == "triple-log") return std::log(std::log(std::log(t + 1.0) + 1.0) + 2.0);
  throw Error(ErrorKind::config, kModule, "unknown treatment transform '" + name + "'");
}

struct LoadedData {
  Dataset data;
  std::optional<BoxCoxParams> boxcox;
};

LoadedData load_data(const DataOptions& opts) {
  if (opts.path.empty()) throw Error(ErrorKind::config, kModule, "--data is required");
  ColumnSpec columns{opts.treatment, opts.covariates, opts.outcome};
  if (columns.covariates.empty()) {
    const CsvTable table = read_csv(opts.path);
    const auto ti = table.column(opts.treatment);
    const auto yi = table.column(opts.outcome);
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j != ti && j != yi) columns.covariates.push_back(table.header[j]);
    }
  }
  Dataset data = load_csv(opts.path, columns);
  std::optional<BoxCoxParams> params;
  if (opts.treatment_transform != "none") {
    Eigen::VectorXd t = data.t();
    for (auto& v : t) {
      v = transform_treatment(opts.treatment_transform, v);
      if (!std::isfinite(v)) throw Error(ErrorKind::domain, kModule, "treatment transform produced a non-finite value");
    }
    data = Dataset(std::move(t), data.x(), data.y());
  }
  if (opts.boxcox_outcome) {
    const std::vector<double> y(data.y().data(), data.y().data() + data.size());
    params = boxcox_search(y, BoxCoxGrid::default_grid());
    data = data.with_outcome(boxcox_shifted(y, *params));
  }
  return {std::move(data), params};
}

CVOptions cv_options(const SieveOptions& s, std::uint64_t seed) {
  CVOptions cv;
  cv.folds = s.folds;
  cv.seed = seed;
  cv.composition = parse_composition(s.composition);
  if (s.basis != "auto") cv.family = BasisFamily{parse_basis_kind(s.basis), 3};
  return cv;
}

std::string cv_table(const CVResult& res) {
  std::ostringstream out;
  out << "k1,k2,score,valid\n";
  for (const auto& g : res.scores) {
    out << g.point.k1 << ',' << g.point.k2 << ',' << (g.valid ? num(g.score, 12) : "nan") << ','
        << (g.valid ? 1 : 0) << '\n';
  }
  return out.str();
}

std::vector<GridPoint> grid_for(const SieveOptions& s, int r) {
  return s.grid.empty() ? default_grid(r) : parse_grid(s.grid);
}

}  // namespace

std::string format_p_value(double p, int B) {
  if (p == 0.0) return "< 1/" + std::to_string(B);
  return num(p, 6);
}

int cmd_test(const TestConfig& config, std::ostream& log) {
  const fs::path dir = prepare_out_dir(config.out);
  if (config.B < 1) throw Error(ErrorKind::config, kModule, "boot.B must be at least 1");
  if (config.weights.empty()) throw Error(ErrorKind::config, kModule, "no weight functions requested");
  const LoadedData loaded = load_data(config.data);
  const Dataset& data = loaded.data;
  const ResidualSpec residual = residual_spec(config.model);
  const DoseResponseModel model = model_spec(config.model);
  const InstrumentSpec instrument = instrument_spec(config.model);
  const int r = static_cast<int>(data.dim());
  const TreatmentScale scale = parse_treatment_scale(config.weight_scale);
  std::vector<WeightFunctionSpec> weight_fns;
  for (const auto& w : config.weights) {
    WeightFunctionSpec spec{parse_weight_kind(w), config.c, scale};
    spec.validate();
    weight_fns.push_back(spec);
  }

  std::ostringstream diag;
  diag << std::setprecision(10);
  diag << "n = " << data.size() << "\nr = " << r << '\n';
  if (loaded.boxcox) {
    diag << "boxcox_lambda1 = " << loaded.boxcox->lambda1 << "\nboxcox_lambda2 = " << loaded.boxcox->lambda2 << '\n';
  }

  std::vector<std::string> outputs{"diagnostics.txt", "jprocess.csv", "summary.csv", "theta.csv"};
  const CVOptions cvopt = cv_options(config.sieve, derive_seed(config.seed, {0}));
  SieveSpec sieve;
  if (config.sieve.k1 || config.sieve.k2) {
    if (!config.sieve.k1 || !config.sieve.k2) throw Error(ErrorKind::config, kModule, "give both --k1 and --k2");
    sieve = sieve_for({*config.sieve.k1, *config.sieve.k2}, r, cvopt);
  } else {
    const CVResult cv = cross_validate(data, grid_for(config.sieve, r), residual, model, instrument, cvopt);
    sieve = sieve_for(cv.selected, r, cvopt);
    write_text(dir / "cv.csv", cv_table(cv));
    outputs.push_back("cv.csv");
    for (const auto& w : cv.warnings) diag << "cv_warning = " << w << '\n';
  }
  diag << "k1 = " << sieve.k1 << "\nk2 = " << sieve.k2 << "\nbasis = " << to_string(sieve.family.kind)
       << "\ncomposition = " << to_string(sieve.composition) << '\n';

  const BalanceFit fit = fit_weights(data, sieve);
  diag << diagnostics(fit);
  const ThetaFit theta = fit_theta(data, fit.weights, residual, model, instrument);
  diag << "theta_method = " << theta.method << "\ntheta_objective = " << theta.objective
       << "\ntheta_gradient_norm = " << theta.gradient_norm << "\ntheta_outside_box = "
       << (theta.outside_box ? "true" : "false") << '\n';
  if (residual.kind == ResidualKind::quantile) diag << "smoothing_bandwidth = " << theta.bandwidth << '\n';

  std::ostringstream theta_csv;
  theta_csv << "index,value\n";
  for (Eigen::Index j = 0; j < theta.theta.size(); ++j) theta_csv << j << ',' << num(theta.theta[j], 17) << '\n';

  PluginOptions plugin;
  plugin.ridge = config.ridge;
  plugin.density_bandwidth_scale = config.density_bandwidth_scale;
  const Eigen::MatrixXd multipliers = multiplier_matrix(config.B, data.size(), derive_seed(config.seed, {1}));

  std::ostringstream summary;
  summary << "weight,scale,k1,k2,cm,ks,p_cm,p_ks,p_cm_report,p_ks_report,B\n";
  std::ostringstream jcsv;
  jcsv << "weight,kind,t,j\n";
  log << "N = " << data.size() << ", (K1, K2) = (" << sieve.k1 << ", " << sieve.k2 << "), theta = ("
      << join([&] {
           std::vector<std::string> v;
           for (double x : theta.theta) v.push_back(num(x, 6));
           return v;
         }())
      << ")\n";
  for (const auto& wf : weight_fns) {
    const Eigen::VectorXd& tw = weight_treatments(data, wf.scale);
    const Eigen::VectorXd points = evaluation_points(tw);
    const Eigen::VectorXd j = j_process(theta.residuals, tw, wf, points);
    const TestStatistics stats = statistics(j.head(data.size()), j);
    const InfluenceEstimator est(data, fit, theta, residual, model, instrument, wf, plugin);
    const BootstrapResult boot = multiplier_bootstrap(est, points, data.size(), stats, multipliers, config.seed, 256);
    summary << wf.name() << ',' << to_string(wf.scale) << ',' << sieve.k1 << ',' << sieve.k2 << ','
            << num(stats.cm, 12) << ',' << num(stats.ks, 12) << ',' << num(boot.p_cm, 6) << ','
            << num(boot.p_ks, 6) << ',' << format_p_value(boot.p_cm, config.B) << ','
            << format_p_value(boot.p_ks, config.B) << ',' << config.B << '\n';
    for (Eigen::Index m = 0; m < points.size(); ++m) {
      jcsv << wf.name() << ',' << (m < data.size() ? "sample" : "grid") << ',' << num(points[m], 12) << ','
           << num(j[m], 12) << '\n';
    }
    log << wf.name() << ": CM = " << num(stats.cm, 6) << " (p " << format_p_value(boot.p_cm, config.B)
        << "), KS = " << num(stats.ks, 6) << " (p " << format_p_value(boot.p_ks, config.B) << ")\n";
  }

  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "theta.csv", theta_csv.str());
  write_text(dir / "jprocess.csv", jcsv.str());
  write_text(dir / "diagnostics.txt", diag.str());

  json cfg = data_json(config.data);
  cfg.update(model_json(config.model));
  cfg.update(sieve_json(config.sieve));
  cfg["weights"] = join(config.weights);
  cfg["weight.c"] = config.c;
  cfg["weight.scale"] = config.weight_scale;
  cfg["boot.B"] = config.B;
  cfg["boot.seed"] = config.seed;
  cfg["plugin.ridge"] = config.ridge;
  cfg["plugin.density_bandwidth_scale"] = config.density_bandwidth_scale;
  write_manifest(dir, "test", cfg, config.seed, outputs);
  return 0;
}

int cmd_cv(const CvConfig& config, std::ostream& log) {
  const LoadedData loaded = load_data(config.data);
  const Dataset& data = loaded.data;
  const int r = static_cast<int>(data.dim());
  const CVOptions cvopt = cv_options(config.sieve, derive_seed(config.seed, {0}));
  const CVResult cv = cross_validate(data, grid_for(config.sieve, r), residual_spec(config.model),
                                     model_spec(config.model), instrument_spec(config.model), cvopt);
  const std::string table = cv_table(cv);
  log << table;
  log << "selected k1 = " << cv.selected.k1 << ", k2 = " << cv.selected.k2 << " (score " << num(cv.selected_score, 8)
      << ")\n";
  for (const auto& w : cv.warnings) log << "warning: " << w << '\n';
  if (!config.out.empty()) {
    const fs::path dir = prepare_out_dir(config.out);
    write_text(dir / "cv.csv", table);
    json cfg = data_json(config.data);
    cfg.update(model_json(config.model));
    cfg.update(sieve_json(config.sieve));
    cfg["seed"] = config.seed;
    cfg["selected.k1"] = cv.selected.k1;
    cfg["selected.k2"] = cv.selected.k2;
    write_manifest(dir, "cv", cfg, config.seed, {"cv.csv"});
  }
  return 0;
}

namespace {

std::vector<McCase> filter_cases(std::vector<McCase> cases, const std::vector<std::string>& filters) {
  if (filters.empty()) return cases;
  std::vector<McCase> out;
  for (const auto& f : filters) {
    std::vector<std::string> parts;
    std::stringstream ss(f);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw Error(ErrorKind::config, kModule, "case filter must be residual:dgp:n, got '" + f + "'");
    const ResidualKind kind = parse_residual_kind(parts[0]);
    const DgpId dgp = parse_dgp(parts[1]);
    const long n = std::stol(parts[2]);
    bool found = false;
    for (const auto& c : cases) {
      if (c.residual.kind == kind && c.dgp == dgp && c.n == n) {
        out.push_back(c);
        found = true;
      }
    }
    if (!found) throw Error(ErrorKind::config, kModule, "case '" + f + "' is not part of the table");
  }
  return out;
}

}  // namespace

int cmd_simulate(const SimulateConfig& config, std::ostream& log) {
  const fs::path dir = prepare_out_dir(config.out);
  McOptions opts;
  opts.reps = config.quick ? std::min(config.reps, 200) : config.reps;
  opts.B = config.B;
  opts.levels = config.levels;
  opts.seed = config.seed;
  opts.folds = config.folds;
  opts.cv_every_rep = config.cv_every_rep;
  opts.threads = config.threads;
  if (opts.levels.empty()) throw Error(ErrorKind::config, kModule, "no levels given");
  for (double l : opts.levels) {
    if (!(l > 0.0 && l < 1.0)) throw Error(ErrorKind::config, kModule, "levels must lie in (0, 1)");
  }
  const TreatmentScale scale = parse_treatment_scale(config.weight_scale);

  std::vector<std::string> outputs;
  const std::string stem = "simulate_" + config.table;
  if (config.table == "sizes" || config.table == "power") {
    auto cases = filter_cases(config.table == "sizes" ? size_cases() : power_cases(), config.cases);
    for (auto& c : cases) {
      for (auto& w : c.weights) w.scale = scale;
    }
    const McReport report = run_table(cases, opts);
    write_text(dir / (stem + ".csv"), format_report_csv(report));
    const std::string table = format_report_table(report, "cm");
    write_text(dir / (stem + ".txt"), table + "\nKS statistic\n" + format_report_table(report, "ks"));
    outputs = {stem + ".csv", stem + ".txt"};
    log << table;
  } else if (config.table == "local") {
    const WeightFunctionSpec wf = WeightFunctionSpec::logistic(5.0, scale);
    std::ostringstream csv;
    csv << "a,n,level,rate,se,reps,failures\n";
    for (double level : opts.levels) {
      const auto curve = local_power_curve(config.a_grid, config.n, wf, level, opts);
      for (const auto& pt : curve) {
        csv << num(pt.a) << ',' << config.n << ',' << num(level) << ',' << num(pt.rate, 4) << ',' << num(pt.se, 4)
            << ',' << pt.reps << ',' << pt.failures << '\n';
      }
    }
    write_text(dir / (stem + ".csv"), csv.str());
    outputs = {stem + ".csv"};
    log << csv.str();
  } else {
    throw Error(ErrorKind::config, kModule, "--table must be sizes, power or local");
  }

  json cfg{{"table", config.table},
           {"levels", config.levels},
           {"reps", opts.reps},
           {"boot.B", config.B},
           {"quick", config.quick},
           {"cv_every_rep", config.cv_every_rep},
           {"cv.folds", config.folds},
           {"weight.scale", config.weight_scale},
           {"cases", join(config.cases)},
           {"local.n", config.n},
           {"local.a_grid", config.a_grid}};
  write_manifest(dir, "simulate", cfg, config.seed, outputs);
  return 0;
}

int cmd_generate(const GenerateConfig& config, std::ostream& log) {
  if (config.out.empty()) throw Error(ErrorKind::config, kModule, "--out is required");
  if (config.n < 2) throw Error(ErrorKind::config, kModule, "--n must be at least 2");
  const SimSample s = generate({parse_dgp(config.dgp), config.n, config.a, false}, config.seed);
  const fs::path out(config.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_csv(out, s.data);
  log << "wrote " << s.data.size() << " rows to " << out.string() << '\n';
  return 0;
}

namespace {

struct CsvRows {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvRows read_text_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::file, kModule, "cannot read '" + path.string() + "'");
  CsvRows out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      out.header = cells;
      first = false;
    } else {
      out.rows.push_back(cells);
    }
  }
  return out;
}

std::string sizes_markdown(const CsvRows& csv) {
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < csv.header.size(); ++i) col[csv.header[i]] = i;
  for (const char* k : {"residual", "dgp", "n", "weight", "statistic", "level", "rate", "se"}) {
    if (!col.count(k)) throw Error(ErrorKind::parse, kModule, std::string("report input lacks column '") + k + "'");
  }
  std::vector<std::string> cell_order;
  std::vector<std::string> column_order;
  std::map<std::string, std::map<std::string, std::string>> values;
  for (const auto& r : csv.rows) {
    if (r.size() < csv.header.size() || r[col["statistic"]] != "cm") continue;
    const std::string cell = r[col["residual"]] + " | " + r[col["dgp"]] + " | " + r[col["n"]];
    const std::string column = r[col["weight"]] + " " + num(100.0 * std::stod(r[col["level"]]), 3) + "%";
    if (!values.count(cell)) cell_order.push_back(cell);
    if (std::find(column_order.begin(), column_order.end(), column) == column_order.end()) column_order.push_back(column);
    values[cell][column] = r[col["rate"]] + " (" + r[col["se"]] + ")";
  }
  std::ostringstream out;
  out << "| m | model | N |";
  for (const auto& c : column_order) out << ' ' << c << " |";
  out << "\n|---|---|---|";
  for (std::size_t i = 0; i < column_order.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& cell : cell_order) {
    out << "| " << cell << " |";
    for (const auto& c : column_order) {
      const auto it = values[cell].find(c);
      out << ' ' << (it == values[cell].end() ? "" : it->second) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string local_markdown(const CsvRows& csv) {
  std::ostringstream out;
  out << "| a | N | level | rate | se |\n|---|---|---|---|---|\n";
  for (const auto& r : csv.rows) {
    if (r.size() >= 5) out << "| " << r[0] << " | " << r[1] << " | " << r[2] << " | " << r[3] << " | " << r[4] << " |\n";
  }
  return out.str();
}

}  // namespace

int cmd_report(const ReportConfig& config, std::ostream& log) {
  if (config.inputs.empty()) throw Error(ErrorKind::config, kModule, "give at least one --in directory");
  std::vector<fs::path> files;
  for (const auto& in : config.inputs) {
    const fs::path p(in);
    if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("simulate_", 0) == 0 && e.path().extension() == ".csv") {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      throw Error(ErrorKind::file, kModule, "'" + in + "' does not exist");
    }
  }
  if (files.empty()) throw Error(ErrorKind::file, kModule, "no simulate_*.csv outputs found");

  std::ostringstream out;
  for (const auto& f : files) {
    const CsvRows csv = read_text_csv(f);
    const std::string name = f.stem().string();
    out << "## " << name << "\n\n";
    if (!csv.header.empty() && csv.header[0] == "a") {
      out << local_markdown(csv);
    } else {
      out << "CM statistic, rejection rates (MC s.e.)\n\n" << sizes_markdown(csv);
    }
    out << '\n';
  }
  log << out.str();
  if (!config.out.empty()) {
    const fs::path p(config.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text(p, out.str());
  }
  return 0;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::file, kModule, "cannot read config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::parse, kModule, "config line " + std::to_string(lineno) + " is not key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string config_key_to_flag(const std::string& key) {
  static const std::map<std::string, std::string> known{
      {"boot.B", "--B"},
      {"boot.seed", "--seed"},
      {"plugin.ridge", "--ridge"},
      {"plugin.density_bandwidth_scale", "--density-bandwidth-scale"},
      {"model.family", "--family"},
      {"model.degree", "--degree"},
      {"residual.kind", "--residual"},
      {"residual.tau", "--tau"},
      {"residual.bandwidth", "--bandwidth"},
      {"instrument.kind", "--instrument"},
      {"instrument.q", "--q"},
      {"cv.folds", "--folds"},
      {"cv.grid", "--grid"},
      {"sieve.k1", "--k1"},
      {"sieve.k2", "--k2"},
      {"sieve.basis", "--basis"},
      {"sieve.composition", "--composition"},
      {"weight.c", "--c"},
      {"weight.scale", "--weight-scale"},
      {"data.path", "--data"},
      {"data.treatment", "--treatment"},
      {"data.covariates", "--covariates"},
      {"data.outcome", "--outcome"},
      {"data.treatment_transform", "--treatment-transform"},
      {"data.boxcox_outcome", "--boxcox-outcome"},
  };
  const auto it = known.find(key);
  if (it != known.end()) return it->second;
  std::string flag = "--";
  for (char c : key) flag.push_back(c == '_' || c == '.' ? '-' : c);
  return flag;
}

}  // namespace ctspec::cli
