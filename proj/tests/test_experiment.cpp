#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "distreg/experiment.hpp"

using namespace distreg;

namespace {

McPlan small_plan(ScenarioId id, EstimatorKind kind, std::size_t reps) {
  McPlan plan;
  plan.scenario.id = id;
  plan.scenario.n = 120;
  plan.scenario.seed = 5;
  plan.reps = reps;
  plan.grid = make_grid(-2, 2, 30);
  plan.estimator.kind = kind;
  plan.estimator.tf.lambda_grid = {0.3, 3.0, 30.0};
  plan.estimator.arch.hidden = {6};
  plan.estimator.train.epochs = 30;
  return plan;
}

}  // namespace

TEST_CASE("estimator names") {
  CHECK(parse_estimator("isotonic") == EstimatorKind::kIsotonic);
  CHECK(parse_estimator("tf") == EstimatorKind::kTrendFilter);
  CHECK(parse_estimator("relu") == EstimatorKind::kRelu);
  CHECK(parse_estimator("constant") == EstimatorKind::kConstant);
  CHECK(parse_estimator("raw") == EstimatorKind::kRaw);
  CHECK_THROWS_AS(parse_estimator("forest"), ConfigError);
  for (auto k : {EstimatorKind::kIsotonic, EstimatorKind::kTrendFilter, EstimatorKind::kRelu,
                 EstimatorKind::kConstant, EstimatorKind::kRaw}) {
    CHECK(parse_estimator(to_string(k)) == k);
  }
}

TEST_CASE("fit_predict baselines") {
  Sample train{{0.0, 1.0, 2.0, 3.0}, std::nullopt};
  Sample test{{1.5}, std::nullopt};
  const std::vector<double> pos{0, 1, 2, 3}, tpos{1.5};
  const auto grid = ThresholdGrid::from_points({0.5, 2.5});
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::kConstant;
  auto p = fit_predict(cfg, train, pos, test, tpos, grid, 0);
  CHECK(p.f_hat(0, 0) == 0.25);
  CHECK(p.f_hat(0, 1) == 0.75);
  cfg.kind = EstimatorKind::kRaw;
  p = fit_predict(cfg, train, pos, test, tpos, grid, 0);
  // halfway between unit 1 (w = 0, 1) and unit 2 (w = 0, 1)
  CHECK(p.f_hat(0, 0) == 0.0);
  CHECK(p.f_hat(0, 1) == 1.0);
  cfg.kind = EstimatorKind::kRelu;
  CHECK_THROWS_AS(fit_predict(cfg, train, pos, test, tpos, grid, 0), ConfigError);
}

TEST_CASE("run_monte_carlo aggregates and is deterministic") {
  auto plan = small_plan(ScenarioId::kS1, EstimatorKind::kIsotonic, 1);
  const auto one = run_monte_carlo(plan);
  REQUIRE(one.reps.size() == 1);
  CHECK(one.crps_std == 0.0);
  CHECK(one.msd_std == 0.0);
  CHECK(one.crps_mean == one.reps[0].crps);

  plan.reps = 4;
  const auto a = run_monte_carlo(plan);
  const auto b = run_monte_carlo(plan);
  plan.threads = 3;
  const auto c = run_monte_carlo(plan);
  REQUIRE(a.reps.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(a.reps[r].crps == b.reps[r].crps);
    CHECK(a.reps[r].crps == c.reps[r].crps);
    CHECK(a.reps[r].msd == c.reps[r].msd);
    CHECK(a.reps[r].n_test == 30);
  }
  CHECK(a.crps_mean == c.crps_mean);
  CHECK(a.crps_std == c.crps_std);
  CHECK(a.crps_std > 0.0);
  // the first rep does not depend on how many reps follow
  CHECK(a.reps[0].crps == one.reps[0].crps);
  CHECK(a.mean_per_threshold_mse.size() == 30);
  CHECK(a.warnings.empty());
}

TEST_CASE("estimators run on their scenarios and mismatches warn") {
  for (auto [id, kind] : {std::pair{ScenarioId::kS3, EstimatorKind::kTrendFilter},
                          std::pair{ScenarioId::kS5, EstimatorKind::kRelu},
                          std::pair{ScenarioId::kS2, EstimatorKind::kIsotonic}}) {
    const auto rep = run_monte_carlo(small_plan(id, kind, 2));
    CHECK(std::isfinite(rep.crps_mean));
    CHECK(rep.crps_mean >= 0.0);
    CHECK(rep.msd_mean >= rep.crps_mean);
  }
  const auto warned = run_monte_carlo(small_plan(ScenarioId::kS4, EstimatorKind::kIsotonic, 1));
  CHECK_FALSE(warned.warnings.empty());
  CHECK_THROWS_AS(run_monte_carlo(small_plan(ScenarioId::kS1, EstimatorKind::kRelu, 1)), ConfigError);
  auto bad = small_plan(ScenarioId::kS1, EstimatorKind::kIsotonic, 0);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.reps = 1;
  bad.train_frac = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("rearranged predictions are monotone in t") {
  auto plan = small_plan(ScenarioId::kS3, EstimatorKind::kTrendFilter, 1);
  plan.estimator.rearrange = true;
  const auto rep = run_monte_carlo(plan);
  CHECK(std::isfinite(rep.crps_mean));

  const auto d = generate(plan.scenario);
  const auto sp = split(d.sample.y.size(), 0.75, 1);
  const auto train = d.sample.subset(sp.train), test = d.sample.subset(sp.test);
  std::vector<double> tp(sp.train.begin(), sp.train.end()), sp_test(sp.test.begin(), sp.test.end());
  const auto pred = fit_predict(plan.estimator, train, tp, test, sp_test, plan.grid, 3);
  for (std::size_t i = 0; i < pred.f_hat.rows(); ++i) {
    const auto row = pred.f_hat.row(i);
    CHECK(std::is_sorted(row.begin(), row.end()));
  }
}

TEST_CASE("run_resplits compares against test indicators") {
  const auto d = generate(small_plan(ScenarioId::kS1, EstimatorKind::kIsotonic, 1).scenario);
  ResplitPlan plan;
  plan.resplits = 3;
  plan.grid = make_grid(-2, 2, 20);
  plan.estimator.kind = EstimatorKind::kConstant;
  const auto rep = run_resplits(d.sample, plan);
  CHECK(rep.reps.size() == 3);
  CHECK(rep.crps_mean > 0.0);
  CHECK(run_resplits(d.sample, plan).crps_mean == rep.crps_mean);
}
