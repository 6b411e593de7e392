#include "distreg/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "distreg/dataio.hpp"
#include "distreg/experiment.hpp"
#include "distreg/rearrange.hpp"

namespace distreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

unsigned long long fnv1a64(const std::string& bytes) {
  unsigned long long h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr int kSchemaVersion = 1;

struct CliFailure {
  int exit_code;
  std::string code;
  std::string message;
};

struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string grid;
  std::string estimator;
  int r = 1;
  std::vector<double> lambda_grid;
  std::size_t folds = 5;
  std::size_t epochs = 1000;
  std::vector<std::size_t> hidden;
  double lr = 1e-3;
  bool truncate = true;
  bool rearrange = false;
  double train_frac = 0.75;
  std::string out = ".";
  std::size_t threads = 1;
  // simulate
  std::string scenario = "S1";
  std::size_t n = 400;
  std::size_t reps = 100;
  std::string s3_param = "mean";
  bool threshold_mse = false;
  // fit
  std::string dataset;
  std::string data;
  std::size_t resplits = 100;
  std::optional<double> slice_t;
  // rearrange
  std::string sample;
  std::string estimate;
  bool jitter = false;
};

// Everything that can change results; out and threads cannot.
json canonical(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["grid"] = c.grid;
  j["estimator"] = c.estimator;
  j["r"] = c.r;
  j["lambda_grid"] = c.lambda_grid;
  j["folds"] = c.folds;
  j["epochs"] = c.epochs;
  j["hidden"] = c.hidden;
  j["lr"] = c.lr;
  j["truncate"] = c.truncate;
  j["rearrange"] = c.rearrange;
  j["train_frac"] = c.train_frac;
  if (c.command == "simulate") {
    j["scenario"] = c.scenario;
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["s3_param"] = c.s3_param;
  } else if (c.command == "fit") {
    j["dataset"] = c.dataset;
    j["resplits"] = c.resplits;
    j["slice_t"] = c.slice_t ? json(*c.slice_t) : json(nullptr);
  } else {
    j["jitter"] = c.jitter;
  }
  return j;
}

void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliFailure{kExitConfig, "config-unreadable", "cannot open config '" + path + "'"};
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CliFailure{kExitConfig, "config-parse", e.what()};
  }
  if (!j.is_object()) throw CliFailure{kExitConfig, "config-parse", "config must be a JSON object"};
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "grid") c.grid = v.get<std::string>();
      else if (key == "estimator") c.estimator = v.get<std::string>();
      else if (key == "r") c.r = v.get<int>();
      else if (key == "lambda_grid") c.lambda_grid = v.get<std::vector<double>>();
      else if (key == "folds") c.folds = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "hidden") c.hidden = v.get<std::vector<std::size_t>>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "truncate") c.truncate = v.get<bool>();
      else if (key == "rearrange") c.rearrange = v.get<bool>();
      else if (key == "train_frac") c.train_frac = v.get<double>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "threads") c.threads = v.get<std::size_t>();
      else if (key == "scenario") c.scenario = v.get<std::string>();
      else if (key == "n") c.n = v.get<std::size_t>();
      else if (key == "reps") c.reps = v.get<std::size_t>();
      else if (key == "s3_param") c.s3_param = v.get<std::string>();
      else if (key == "threshold_mse") c.threshold_mse = v.get<bool>();
      else if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "data") c.data = v.get<std::string>();
      else if (key == "resplits") c.resplits = v.get<std::size_t>();
      else if (key == "slice_t") c.slice_t = v.get<double>();
      else if (key == "sample") c.sample = v.get<std::string>();
      else if (key == "estimate") c.estimate = v.get<std::string>();
      else if (key == "jitter") c.jitter = v.get<bool>();
      else throw CliFailure{kExitConfig, "unknown-config-key", "unknown config key '" + key + "'"};
    }
  } catch (const json::type_error& e) {
    throw CliFailure{kExitConfig, "config-type", e.what()};
  } catch (const json::out_of_range& e) {
    throw CliFailure{kExitConfig, "config-type", e.what()};
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ThresholdGrid parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw CliFailure{kExitConfig, "bad-grid", "grid must be lo:hi:m"};
  try {
    std::size_t used = 0;
    const double lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    const double hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    const long m = std::stol(parts[2], &used);
    if (used != parts[2].size() || m < 2) throw std::invalid_argument("m");
    return make_grid(lo, hi, static_cast<std::size_t>(m));
  } catch (const ConfigError& e) {
    throw CliFailure{kExitConfig, "bad-grid", e.what()};
  } catch (const std::exception&) {
    throw CliFailure{kExitConfig, "bad-grid", "grid must be lo:hi:m with m >= 2, got '" + text + "'"};
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

EstimatorConfig estimator_config(const RunConfig& c, const std::string& name) {
  EstimatorConfig e;
  try {
    e.kind = parse_estimator(name);
  } catch (const ConfigError& err) {
    throw CliFailure{kExitConfig, "unknown-estimator", err.what()};
  }
  e.tf.r = c.r;
  if (!c.lambda_grid.empty()) e.tf.lambda_grid = c.lambda_grid;
  e.tf.folds = c.folds;
  e.tf.validate();
  if (!c.hidden.empty()) e.arch.hidden = c.hidden;
  e.train.epochs = c.epochs;
  e.train.adam.lr = c.lr;
  e.train.validate();
  e.truncate = c.truncate;
  e.rearrange = c.rearrange;
  return e;
}

fs::path prepare_out(const RunConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliFailure{kExitData, "io-error", "cannot create '" + c.out + "': " + ec.message()};
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliFailure{kExitData, "io-error", "cannot write '" + path.string() + "'"};
  return f;
}

std::string hash_hex(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", fnv1a64(canonical(c).dump()));
  return buf;
}

json grid_json(const ThresholdGrid& g) { return {{"lo", g.lo()}, {"hi", g.hi()}, {"m", g.size()}}; }

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  McPlan plan;
  try {
    plan.scenario.id = parse_scenario(c.scenario);
  } catch (const ConfigError& e) {
    throw CliFailure{kExitConfig, "unknown-scenario", e.what()};
  }
  if (c.s3_param == "mean") plan.scenario.s3_param = ExpParam::kMean;
  else if (c.s3_param == "rate") plan.scenario.s3_param = ExpParam::kRate;
  else throw CliFailure{kExitConfig, "bad-s3-param", "s3_param must be mean or rate"};
  plan.scenario.n = c.n;
  plan.scenario.seed = c.seed;
  plan.reps = c.reps;
  plan.grid = parse_grid(c.grid.empty() ? "-2:2:100" : c.grid);
  plan.estimator = estimator_config(c, c.estimator.empty() ? "isotonic" : c.estimator);
  plan.train_frac = c.train_frac;
  plan.threads = c.threads;

  const AggregateReport report = run_monte_carlo(plan);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";

  const fs::path dir = prepare_out(c);
  {
    auto f = open_out(dir / "metrics.csv");
    f << "rep,crps,msd\n";
    for (std::size_t i = 0; i < report.reps.size(); ++i) {
      f << i << "," << num(report.reps[i].crps) << "," << num(report.reps[i].msd) << "\n";
    }
  }
  if (c.threshold_mse) {
    auto f = open_out(dir / "threshold_mse.csv");
    f << "k,t,mse\n";
    for (std::size_t k = 0; k < plan.grid.size(); ++k) {
      f << k << "," << num(plan.grid[k]) << "," << num(report.mean_per_threshold_mse[k]) << "\n";
    }
  }
  json s;
  s["schema_version"] = kSchemaVersion;
  s["crps_mean"] = report.crps_mean;
  s["crps_std"] = report.crps_std;
  s["msd_mean"] = report.msd_mean;
  s["msd_std"] = report.msd_std;
  s["n"] = c.n;
  s["reps"] = c.reps;
  s["seed"] = c.seed;
  s["scenario"] = to_string(plan.scenario.id);
  s["estimator"] = to_string(plan.estimator.kind);
  s["grid"] = grid_json(plan.grid);
  s["warnings"] = report.warnings;
  s["config_hash"] = hash_hex(c);
  open_out(dir / "summary.json") << s.dump(2) << "\n";

  out << to_string(plan.scenario.id) << " " << to_string(plan.estimator.kind) << " n=" << c.n
      << " reps=" << c.reps << "  crps " << num(report.crps_mean) << " +- "
      << num(report.crps_std) << "  msd " << num(report.msd_mean) << " +- "
      << num(report.msd_std) << "\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.dataset.empty()) throw CliFailure{kExitConfig, "missing-dataset", "--dataset is required"};
  if (c.data.empty()) throw CliFailure{kExitConfig, "missing-data", "--data is required"};
  DatasetRecipe recipe;
  try {
    recipe = dataset_recipe(c.dataset);
  } catch (const ConfigError& e) {
    throw CliFailure{kExitConfig, "unknown-dataset", e.what()};
  }
  if (!fs::exists(c.data)) {
    throw CliFailure{kExitData, "missing-file", "data file '" + c.data + "' not found"};
  }
  std::vector<std::string> warnings;
  const AggregatedSample data = load_dataset(recipe, c.data, &warnings);
  const Sample& sample = data.sample;
  const ThresholdGrid grid = c.grid.empty() ? recipe.eval_grid : parse_grid(c.grid);

  std::vector<std::string> names = split_list(c.estimator.empty() ? "tf" : c.estimator);
  if (names.empty()) throw CliFailure{kExitConfig, "unknown-estimator", "no estimator given"};
  std::vector<EstimatorConfig> configs;
  for (const auto& name : names) {
    EstimatorConfig e = estimator_config(c, name);
    if (c.hidden.empty()) e.arch.hidden = recipe.hidden;
    if (e.kind == EstimatorKind::kRelu && !sample.x) {
      throw CliFailure{kExitConfig, "estimator-mismatch",
                       "relu needs covariates, which recipe '" + recipe.name + "' lacks"};
    }
    if (e.rearrange && e.kind == EstimatorKind::kRelu) {
      throw CliFailure{kExitConfig, "estimator-mismatch", "rearrange is not supported with relu"};
    }
    configs.push_back(e);
  }

  std::optional<std::size_t> slice_k;
  if (c.slice_t) {
    slice_k = grid.nearest_index(*c.slice_t);
    if (grid[*slice_k] != *c.slice_t) {
      warnings.push_back("slice t=" + num(*c.slice_t) + " is not a grid point; using the nearest grid point t=" +
                         num(grid[*slice_k]));
    }
  }
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  const fs::path dir = prepare_out(c);
  auto table = open_out(dir / "results.csv");
  table << "method,crps_mean,crps_std,msd_mean,msd_std,resplits\n";
  json rows = json::array();
  std::optional<std::ofstream> slice;
  if (slice_k) {
    slice = open_out(dir / "slice.csv");
    *slice << "method,unit,cell_row,cell_col,y,t,f_hat\n";
  }

  for (std::size_t e = 0; e < configs.size(); ++e) {
    ResplitPlan plan;
    plan.resplits = c.resplits;
    plan.grid = grid;
    plan.estimator = configs[e];
    plan.train_frac = c.train_frac;
    plan.seed = c.seed;
    plan.threads = c.threads;
    const AggregateReport report = run_resplits(sample, plan);
    const std::string method = to_string(configs[e].kind);
    table << method << "," << num(report.crps_mean) << "," << num(report.crps_std) << ","
          << num(report.msd_mean) << "," << num(report.msd_std) << "," << c.resplits << "\n";
    rows.push_back({{"method", method},
                    {"crps_mean", report.crps_mean},
                    {"crps_std", report.crps_std},
                    {"msd_mean", report.msd_mean},
                    {"msd_std", report.msd_std}});
    out << method << "  crps " << num(report.crps_mean) << " +- " << num(report.crps_std)
        << "  msd " << num(report.msd_mean) << " +- " << num(report.msd_std) << "\n";

    if (slice_k) {
      std::vector<double> pos(sample.size());
      for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(i);
      const auto fitted = fit_predict(configs[e], sample, pos, sample, pos, grid, c.seed);
      for (std::size_t i = 0; i < sample.size(); ++i) {
        *slice << method << "," << i << "," << data.cells[i].row << "," << data.cells[i].col
               << "," << num(sample.y[i]) << "," << num(grid[*slice_k]) << ","
               << num(fitted.f_hat(i, *slice_k)) << "\n";
      }
    }
  }

  json s;
  s["schema_version"] = kSchemaVersion;
  s["dataset"] = recipe.name;
  s["n"] = sample.size();
  s["resplits"] = c.resplits;
  s["seed"] = c.seed;
  s["grid"] = grid_json(grid);
  s["results"] = rows;
  s["warnings"] = warnings;
  s["config_hash"] = hash_hex(c);
  open_out(dir / "summary.json") << s.dump(2) << "\n";
  return kExitOk;
}

int cmd_rearrange(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.sample.empty() || c.estimate.empty()) {
    throw CliFailure{kExitConfig, "missing-input", "--sample and --estimate are required"};
  }
  Table t = load_csv(c.sample, CsvSchema{{{"y"}}});
  for (const auto& w : t.warnings) err << "warning: " << w << "\n";
  std::vector<double> y = t.column("y");
  if (y.size() < 2) throw DataError("rearrange needs at least two responses");
  {
    std::vector<double> s = y;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
      if (!c.jitter) {
        throw CliFailure{kExitData, "duplicate-responses",
                         "sample has tied responses; rerun with --jitter"};
      }
      y = jitter_ties(y, c.seed);
    }
  }

  std::ifstream in(c.estimate, std::ios::binary);
  if (!in) throw DataError("cannot open '" + c.estimate + "'");
  const auto records = read_csv_records(in);
  if (records.empty()) throw DataError("estimate file is empty");
  const std::size_t cols = y.size() - 1;
  if (records.front().size() != cols + 1) {
    throw DataError("estimate needs a unit column and n - 1 = " + std::to_string(cols) +
                    " value columns");
  }
  Matrix values(records.size() - 1, cols);
  std::vector<std::string> units;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != cols + 1) throw DataError("estimate row " + std::to_string(r) + " has the wrong width");
    units.push_back(rec[0]);
    for (std::size_t j = 0; j < cols; ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(rec[j + 1], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || !std::isfinite(v)) {
        throw DataError("estimate row " + std::to_string(r) + " has a non-numeric value");
      }
      values(r - 1, j) = v;
    }
  }
  const auto steps = rearrange_all(y, values);

  const fs::path dir = prepare_out(c);
  auto f = open_out(dir / "steps.csv");
  f << "unit,k,lo,hi,level\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
      f << units[i] << "," << k << "," << num(s.breakpoints[k]) << "," << num(s.breakpoints[k + 1])
        << "," << num(s.levels[k]) << "\n";
    }
  }
  out << "rearranged " << steps.size() << " unit(s) over " << y.size() << " order statistics\n";
  return kExitOk;
}

void report_error(std::ostream& err, int exit_code, const std::string& code, const std::string& msg) {
  err << json{{"error", code}, {"exit_code", exit_code}, {"message", msg}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string config_path;
  CLI::App app{"Distributional regression by per-threshold projection"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--grid", c.grid, "evaluation grid lo:hi:m");
    sub->add_option("--r", c.r, "trend filter order");
    sub->add_option("--lambda-grid", c.lambda_grid, "comma separated lambda values")->delimiter(',');
    sub->add_option("--folds", c.folds, "cross-validation folds");
    sub->add_option("--epochs", c.epochs, "relu training epochs");
    sub->add_option("--hidden", c.hidden, "relu hidden widths, e.g. 64,64")->delimiter(',');
    sub->add_option("--lr", c.lr, "Adam learning rate");
    sub->add_flag("!--no-truncate", c.truncate, "keep raw predictions outside [0,1]");
    sub->add_flag("--rearrange", c.rearrange, "fit at order statistics and rearrange test rows");
    sub->add_option("--train-frac", c.train_frac, "training fraction of each split");
    sub->add_option("--threads", c.threads, "worker threads");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--config", config_path, "JSON run file; its values override flags");
  };

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study on a simulated scenario");
  common(sim);
  sim->add_option("--scenario", c.scenario, "S1..S6");
  sim->add_option("--n", c.n, "sample size");
  sim->add_option("--reps", c.reps, "Monte Carlo repetitions");
  sim->add_option("--estimator", c.estimator, "isotonic|tf|relu|constant|raw");
  sim->add_option("--s3-param", c.s3_param, "S3 exponential parameter: mean|rate");
  sim->add_flag("--threshold-mse", c.threshold_mse, "also write threshold_mse.csv");

  auto* fit = app.add_subcommand("fit", "Random train/test resplits on a dataset");
  common(fit);
  fit->add_option("--dataset", c.dataset, "chicago-crime|california-housing|ozone");
  fit->add_option("--data", c.data, "CSV file");
  fit->add_option("--estimator", c.estimator, "comma separated estimators");
  fit->add_option("--resplits", c.resplits, "number of resplits");
  fit->add_option("--slice-t", c.slice_t, "export fitted F_i(t) at this threshold");

  auto* rea = app.add_subcommand("rearrange", "Monotone rearrangement of an estimate file");
  common(rea);
  rea->add_option("--sample", c.sample, "CSV with column y");
  rea->add_option("--estimate", c.estimate, "CSV: unit,a_1..a_{n-1}");
  rea->add_flag("--jitter", c.jitter, "break tied responses deterministically");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, kExitConfig, "usage", e.what());
    return kExitConfig;
  }

  try {
    c.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) apply_config_file(c, config_path);
    if (c.command == "simulate") return cmd_simulate(c, out, err);
    if (c.command == "fit") return cmd_fit(c, out, err);
    return cmd_rearrange(c, out, err);
  } catch (const CliFailure& f) {
    report_error(err, f.exit_code, f.code, f.message);
    return f.exit_code;
  } catch (const ConfigError& e) {
    report_error(err, kExitConfig, "config-error", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    report_error(err, kExitData, "data-error", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    report_error(err, kExitNumerical, "numerical-error", e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    report_error(err, kExitConfig, "invalid-argument", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    report_error(err, kExitData, "io-error", e.what());
    return kExitData;
  }
}

}  // namespace distreg
