#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distreg/core.hpp"
#include "distreg/metrics.hpp"
#include "distreg/relunet.hpp"
#include "distreg/scenarios.hpp"
#include "distreg/trendfilter.hpp"

namespace distreg {

enum class EstimatorKind {
  kIsotonic,
  kTrendFilter,
  kRelu,
  // Baselines: per-threshold training mean, and the unsmoothed indicators
  // interpolated to the test positions.
  kConstant,
  kRaw,
};

// "isotonic", "tf", "relu", "constant", "raw".
EstimatorKind parse_estimator(std::string_view name);
std::string to_string(EstimatorKind kind);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kIsotonic;
  TrendFilterConfig tf;
  // input_dim is taken from the data.
  MlpArchitecture arch;
  TrainConfig train;
  // Clamp test predictions to [0, 1].
  bool truncate = true;
  // Fit at the training order statistics and rearrange every test row
  // into a monotone step CDF before evaluating on the grid.
  bool rearrange = false;
};

// Fits on the training units and predicts the test units on grid.
// Positions order the units for the index-based estimators and must be
// sorted; the relu estimator uses the covariates instead.
CdfEstimate fit_predict(const EstimatorConfig& cfg, const Sample& train,
                        std::span<const double> train_pos, const Sample& test,
                        std::span<const double> test_pos, const ThresholdGrid& grid,
                        std::uint64_t seed);

struct McPlan {
  ScenarioSpec scenario;
  std::size_t reps = 100;
  ThresholdGrid grid = make_grid(-2.0, 2.0, 100);
  EstimatorConfig estimator;
  double train_frac = 0.75;
  // Worker threads for repetitions; results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

struct AggregateReport {
  std::vector<MetricReport> reps;
  double crps_mean = 0.0;
  double crps_std = 0.0;
  double msd_mean = 0.0;
  double msd_std = 0.0;
  std::vector<double> mean_per_threshold_mse;
  std::vector<std::string> warnings;
};

// Repeats: fresh draw -> split -> fit on train -> predict test -> metrics
// against the oracle. Standard deviations use n - 1 and are 0 for reps = 1.
AggregateReport run_monte_carlo(const McPlan& plan);

struct ResplitPlan {
  std::size_t resplits = 100;
  ThresholdGrid grid = make_grid(-2.0, 2.0, 100);
  EstimatorConfig estimator;
  double train_frac = 0.75;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// Real data: the units of sample are already ordered (position = row
// index). Test predictions are compared with the test indicators.
AggregateReport run_resplits(const Sample& sample, const ResplitPlan& plan);

void aggregate(AggregateReport& report);

}  // namespace distreg
