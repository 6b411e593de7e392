#include "distreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "distreg/isotonic.hpp"
#include "distreg/rearrange.hpp"
#include "distreg/seeding.hpp"

namespace distreg {

EstimatorKind parse_estimator(std::string_view name) {
  if (name == "isotonic") return EstimatorKind::kIsotonic;
  if (name == "tf" || name == "trendfilter") return EstimatorKind::kTrendFilter;
  if (name == "relu") return EstimatorKind::kRelu;
  if (name == "constant") return EstimatorKind::kConstant;
  if (name == "raw") return EstimatorKind::kRaw;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kIsotonic:
      return "isotonic";
    case EstimatorKind::kTrendFilter:
      return "tf";
    case EstimatorKind::kRelu:
      return "relu";
    case EstimatorKind::kConstant:
      return "constant";
    case EstimatorKind::kRaw:
      return "raw";
  }
  return "unknown";
}

namespace {

ThresholdGrid inner_order_statistics(const std::vector<double>& y) {
  std::vector<double> s = y;
  std::sort(s.begin(), s.end());
  if (s.size() < 2) throw DataError("rearrangement needs at least two training responses");
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
    throw DataError("duplicate training responses; jitter ties before rearranging");
  }
  s.pop_back();
  return ThresholdGrid::from_points(std::move(s));
}

}  // namespace

CdfEstimate fit_predict(const EstimatorConfig& cfg, const Sample& train,
                        std::span<const double> train_pos, const Sample& test,
                        std::span<const double> test_pos, const ThresholdGrid& grid,
                        std::uint64_t seed) {
  train.validate();
  const ThresholdGrid fit_grid = cfg.rearrange ? inner_order_statistics(train.y) : grid;
  const IndicatorMatrix w = indicators(train, fit_grid);
  const bool index_based = cfg.kind != EstimatorKind::kRelu;
  if (index_based && (train_pos.size() != train.size() || test_pos.size() != test.size())) {
    throw std::invalid_argument("fit_predict: positions do not match the samples");
  }

  CdfEstimate pred;
  switch (cfg.kind) {
    case EstimatorKind::kIsotonic: {
      const auto fit = fit_isotonic(w);
      pred = predict_nn(fit, train_pos, test_pos);
      break;
    }
    case EstimatorKind::kTrendFilter: {
      const auto fit = fit_trendfilter(w, cfg.tf, seed);
      pred = predict_interp(fit.estimate, train_pos, test_pos);
      break;
    }
    case EstimatorKind::kRelu: {
      if (!train.x || !test.x) throw ConfigError("relu estimator needs covariates");
      MlpArchitecture arch = cfg.arch;
      arch.input_dim = train.x->cols();
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      const auto fit = fit_relu(train, w, arch, tc);
      pred = predict_relu(fit, *test.x);
      break;
    }
    case EstimatorKind::kConstant: {
      pred = CdfEstimate{Matrix(test.size(), fit_grid.size()), fit_grid, {"constant", {}, false}};
      for (std::size_t k = 0; k < fit_grid.size(); ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < w.w.rows(); ++i) mean += w.w(i, k);
        mean /= static_cast<double>(w.w.rows());
        for (std::size_t i = 0; i < test.size(); ++i) pred.f_hat(i, k) = mean;
      }
      break;
    }
    case EstimatorKind::kRaw: {
      const CdfEstimate raw{w.w, fit_grid, {"raw", {}, false}};
      pred = predict_interp(raw, train_pos, test_pos);
      break;
    }
  }

  if (cfg.rearrange) {
    const auto steps = rearrange_all(train.y, pred.f_hat);
    CdfEstimate out{Matrix(steps.size(), grid.size()), grid, pred.meta};
    out.meta.params["rearranged"] = 1.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto values = eval_stepcdf(steps[i], grid);
      std::copy(values.begin(), values.end(), out.f_hat.row(i).begin());
    }
    return out;
  }
  if (cfg.truncate) pred = truncate_nonneg(std::move(pred));
  return pred;
}

void McPlan::validate() const {
  scenario.validate();
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train fraction must lie in (0,1)");
  if (estimator.kind == EstimatorKind::kRelu && !has_covariates(scenario.id)) {
    throw ConfigError("relu estimator needs a covariate scenario (S5 or S6)");
  }
}

void aggregate(AggregateReport& report) {
  const auto& reps = report.reps;
  const double n = static_cast<double>(reps.size());
  if (reps.empty()) return;
  auto mean_std = [&](auto get, double& mean, double& sd) {
    mean = 0.0;
    for (const auto& r : reps) mean += get(r);
    mean /= n;
    double ss = 0.0;
    for (const auto& r : reps) ss += (get(r) - mean) * (get(r) - mean);
    sd = reps.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  };
  mean_std([](const MetricReport& r) { return r.crps; }, report.crps_mean, report.crps_std);
  mean_std([](const MetricReport& r) { return r.msd; }, report.msd_mean, report.msd_std);
  report.mean_per_threshold_mse.assign(reps.front().per_threshold_mse.size(), 0.0);
  for (const auto& r : reps) {
    for (std::size_t k = 0; k < r.per_threshold_mse.size(); ++k) {
      report.mean_per_threshold_mse[k] += r.per_threshold_mse[k] / n;
    }
  }
}

namespace {

// Runs job(rep) for rep in [0, count) on `threads` workers. Each job
// writes only its own slot, so the outcome is independent of scheduling.
template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, Job job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> as_positions(const std::vector<std::size_t>& idx) {
  return {idx.begin(), idx.end()};
}

}  // namespace

AggregateReport run_monte_carlo(const McPlan& plan) {
  plan.validate();
  AggregateReport report;
  const ScenarioId id = plan.scenario.id;
  const EstimatorKind kind = plan.estimator.kind;
  const bool index_design = !has_covariates(id);
  if ((kind == EstimatorKind::kIsotonic && !(id == ScenarioId::kS1 || id == ScenarioId::kS2)) ||
      (kind == EstimatorKind::kTrendFilter && !index_design)) {
    report.warnings.push_back("estimator " + to_string(kind) + " is not the default for " +
                              to_string(id));
  }

  report.reps.resize(plan.reps);
  parallel_for(plan.reps, plan.threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(plan.scenario.seed, rep);
    ScenarioSpec spec = plan.scenario;
    spec.seed = derive_seed(rep_seed, 0);
    const auto data = generate(spec);
    const auto parts = split(spec.n, plan.train_frac, derive_seed(rep_seed, 1));
    const auto train_pos = as_positions(parts.train);
    const auto test_pos = as_positions(parts.test);
    const Sample train = data.sample.subset(parts.train);
    const Sample test = data.sample.subset(parts.test);
    const auto pred = fit_predict(plan.estimator, train, train_pos, test, test_pos, plan.grid,
                                  derive_seed(rep_seed, 2));
    const OracleReference ref(data.truth);
    report.reps[rep] = evaluate_metrics(pred, ref, parts.test);
  });
  aggregate(report);
  return report;
}

AggregateReport run_resplits(const Sample& sample, const ResplitPlan& plan) {
  sample.validate();
  if (plan.resplits < 1) throw ConfigError("resplits must be >= 1");
  AggregateReport report;
  report.reps.resize(plan.resplits);
  const IndicatorReference ref(sample.y);
  parallel_for(plan.resplits, plan.threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(plan.seed, rep);
    const auto parts = split(sample.size(), plan.train_frac, derive_seed(rep_seed, 1));
    const auto train_pos = as_positions(parts.train);
    const auto test_pos = as_positions(parts.test);
    const Sample train = sample.subset(parts.train);
    const Sample test = sample.subset(parts.test);
    const auto pred = fit_predict(plan.estimator, train, train_pos, test, test_pos, plan.grid,
                                  derive_seed(rep_seed, 2));
    report.reps[rep] = evaluate_metrics(pred, ref, parts.test);
  });
  aggregate(report);
  return report;
}

}  // namespace distreg
