// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: acceptance [C1 C2 ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "distreg/cli.hpp"
#include "distreg/experiment.hpp"
#include "distreg/isotonic.hpp"
#include "distreg/metrics.hpp"
#include "distreg/rearrange.hpp"
#include "distreg/relunet.hpp"
#include "distreg/scenarios.hpp"
#include "distreg/seeding.hpp"
#include "distreg/trendfilter.hpp"

using namespace distreg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------- C1

// Projected gradient on the dual of the monotone-cone projection,
// theta = v - D^T mu with mu >= 0, step 1/2.
std::vector<double> monotone_projection_oracle(const std::vector<double>& v, long iters) {
  const std::size_t n = v.size();
  std::vector<double> mu(n > 0 ? n - 1 : 0, 0.0), theta = v;
  for (long it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i + 1 < n; ++i) mu[i] = std::max(0.0, mu[i] + 0.5 * (theta[i] - theta[i + 1]));
    for (std::size_t i = 0; i < n; ++i) {
      theta[i] = v[i] - (i + 1 < n ? mu[i] : 0.0) + (i > 0 ? mu[i - 1] : 0.0);
    }
  }
  return theta;
}

Outcome c1_pava() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> len(1, 20);
  double worst = 0.0, worst_vi = -INFINITY;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = u(rng);
    const auto fit = pava_project(v);
    worst = std::max(worst, max_abs_diff(fit, monotone_projection_oracle(v, 1000000)));
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> th(v.size());
      for (double& x : th) x = u(rng);
      std::sort(th.begin(), th.end());
      double ip = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) ip += (v[i] - fit[i]) * (th[i] - fit[i]);
      worst_vi = std::max(worst_vi, ip);
    }
  }
  return {worst <= 1e-6 && worst_vi <= 1e-8,
          "max |pava - oracle| = " + fmt("%.3g", worst) + ", max <v-fit, theta-fit> = " + fmt("%.3g", worst_vi)};
}

// ---------------------------------------------------------------- C2

// Proximal gradient on the fused-lasso dual (box-constrained, step 1/4),
// stopped when the primal objective changes by less than 1e-12.
std::vector<double> fused_lasso_oracle(const std::vector<double>& v, double lambda) {
  const std::size_t n = v.size();
  std::vector<double> mu(n - 1, 0.0), theta = v;
  double prev = INFINITY;
  for (long it = 0; it < 200000000L; ++it) {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      mu[k] = std::clamp(mu[k] + 0.25 * (theta[k + 1] - theta[k]), -lambda, lambda);
    }
    for (std::size_t i = 0; i < n; ++i) theta[i] = v[i] + (i + 1 < n ? mu[i] : 0.0) - (i > 0 ? mu[i - 1] : 0.0);
    const double obj = trendfilter_objective(v, theta, lambda, 1);
    if (std::abs(prev - obj) < 1e-12) break;
    prev = obj;
  }
  return theta;
}

Outcome c2_fused() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> lam(0.01, 2.0);
  std::uniform_int_distribution<int> len(2, 50);
  AdmmOptions opts;
  opts.tol_primal = opts.tol_dual = 1e-9;
  opts.max_iter = 200000;
  double worst = 0.0, worst_admm = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = u(rng);
    const double lambda = lam(rng);
    const auto dp = fused_lasso_1d(v, lambda);
    worst = std::max(worst, max_abs_diff(dp, fused_lasso_oracle(v, lambda)));
    worst_admm = std::max(worst_admm, max_abs_diff(trendfilter_admm(v, lambda, 1, opts).theta, dp));
  }
  return {worst <= 1e-6 && worst_admm <= 1e-4,
          "max |dp - oracle| = " + fmt("%.3g", worst) + ", max |admm - dp| = " + fmt("%.3g", worst_admm)};
}

// ---------------------------------------------------------------- C3

Outcome c3_rearrangement() {
  double worst_gap = -INFINITY, worst_measure = 0.0;
  bool monotone = true;
  std::size_t units = 0;
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    ScenarioSpec spec;
    spec.id = ScenarioId::kS1;
    spec.n = 200;
    spec.seed = derive_seed(303, draw);
    const auto data = generate(spec);
    const auto sp = split(spec.n, 0.75, derive_seed(spec.seed, 1));
    const auto train = data.sample.subset(sp.train);
    std::vector<double> ys = train.y;
    std::sort(ys.begin(), ys.end());
    // second-order trend filter at the inner order statistics: its
    // per-threshold fits are not monotone in t, so rearrangement matters
    const auto inner = ThresholdGrid::from_points(std::vector<double>(ys.begin(), ys.end() - 1));
    TrendFilterConfig cfg;
    cfg.r = 2;
    const auto fit = fit_trendfilter(indicators(train, inner), cfg, derive_seed(spec.seed, 2));
    const std::vector<double> tp(sp.train.begin(), sp.train.end()), qp(sp.test.begin(), sp.test.end());
    auto pred = predict_interp(fit.estimate, tp, qp);
    pred = truncate_nonneg(pred);
    const auto rearranged = rearrange_all(ys, pred.f_hat);
    for (std::size_t i = 0; i < sp.test.size(); ++i) {
      const auto raw = step_from_order_statistics(ys, pred.f_hat.row(i));
      const auto& tilde = rearranged[i];
      const double c_tilde = crps_continuous(tilde, data.truth, sp.test[i], 10000);
      const double c_raw = crps_continuous(raw, data.truth, sp.test[i], 10000);
      worst_gap = std::max(worst_gap, c_tilde - c_raw);
      monotone &= std::is_sorted(tilde.levels.begin(), tilde.levels.end());
      std::vector<std::pair<double, double>> a, b;
      for (std::size_t k = 0; k < tilde.levels.size(); ++k) {
        a.emplace_back(tilde.levels[k], tilde.breakpoints[k + 1] - tilde.breakpoints[k]);
        b.emplace_back(raw.levels[k], raw.breakpoints[k + 1] - raw.breakpoints[k]);
      }
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].first != b[k].first) worst_measure = INFINITY;
        worst_measure = std::max(worst_measure, std::abs(a[k].second - b[k].second));
      }
      ++units;
    }
  }
  return {worst_gap <= 1e-3 && monotone && worst_measure <= 1e-12,
          std::to_string(units) + " test units; max CRPS(tilde) - CRPS(F+) = " + fmt("%.3g", worst_gap) +
              ", level-measure error = " + fmt("%.3g", worst_measure) + (monotone ? "" : ", NOT monotone")};
}

// ---------------------------------------------------------------- C4

McPlan mc_plan(ScenarioId id, std::size_t n, std::size_t reps, ThresholdGrid grid, EstimatorKind kind,
               std::uint64_t seed) {
  McPlan plan;
  plan.scenario.id = id;
  plan.scenario.n = n;
  plan.scenario.seed = seed;
  plan.reps = reps;
  plan.grid = std::move(grid);
  plan.estimator.kind = kind;
  plan.threads = worker_count();
  return plan;
}

Outcome c4_isotonic_rate() {
  const auto grid = make_grid(-1.0, 0.4, 100);
  const double small = run_monte_carlo(mc_plan(ScenarioId::kS1, 400, 50, grid, EstimatorKind::kIsotonic, 404)).crps_mean;
  const double large = run_monte_carlo(mc_plan(ScenarioId::kS1, 1600, 50, grid, EstimatorKind::kIsotonic, 404)).crps_mean;
  const double ratio = large / small;
  return {ratio >= 0.25 && ratio <= 0.60, "CRPS n=400 " + fmt("%.5f", small) + ", n=1600 " + fmt("%.5f", large) +
                                               ", ratio " + fmt("%.3f", ratio) + " (target [0.25, 0.60])"};
}

// ---------------------------------------------------------------- C5

Outcome c5_trendfilter() {
  const auto grid = make_grid(-2.0, 2.0, 100);
  bool pass = true;
  std::string detail;
  for (auto [id, r] : {std::pair{ScenarioId::kS3, 2}, std::pair{ScenarioId::kS4, 1}}) {
    double crps[3];
    const EstimatorKind kinds[3] = {EstimatorKind::kTrendFilter, EstimatorKind::kRaw, EstimatorKind::kConstant};
    for (int k = 0; k < 3; ++k) {
      auto plan = mc_plan(id, 800, 20, grid, kinds[k], 505);
      plan.estimator.tf.r = r;
      crps[k] = run_monte_carlo(plan).crps_mean;
    }
    const double vs_raw = 1.0 - crps[0] / crps[1], vs_const = 1.0 - crps[0] / crps[2];
    pass &= vs_raw >= 0.20 && vs_const >= 0.20;
    detail += to_string(id) + ": tf " + fmt("%.5f", crps[0]) + " raw " + fmt("%.5f", crps[1]) + " const " +
              fmt("%.5f", crps[2]) + " (gain " + fmt("%.0f%%", 100 * vs_raw) + "/" + fmt("%.0f%%", 100 * vs_const) +
              ") ";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- C6

Outcome c6_gradient() {
  MlpArchitecture arch;
  arch.input_dim = 5;
  arch.hidden = {8, 8};
  double worst = 0.0;
  int draws = 0;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.2);
  for (std::uint64_t seed = 0; draws < 5; ++seed) {
    auto p = init_params(arch, seed);
    for (double& v : p.values) v += z(rng);
    Matrix x(16, 5);
    std::vector<double> t(16);
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 5; ++j) x(i, j) = u(rng);
      t[i] = static_cast<double>(rng() % 2);
    }
    // reject draws with a hidden pre-activation near a ReLU kink
    bool near_kink = false;
    {
      const auto w = arch.widths();
      for (std::size_t i = 0; i < 16 && !near_kink; ++i) {
        std::vector<double> a(x.row(i).begin(), x.row(i).end());
        std::size_t off = 0;
        for (std::size_t l = 0; l + 2 < w.size(); ++l) {
          std::vector<double> h(w[l + 1], 0.0);
          for (std::size_t o = 0; o < w[l + 1]; ++o) {
            for (std::size_t in = 0; in < w[l]; ++in) h[o] += p.values[off + o * w[l] + in] * a[in];
            h[o] += p.values[off + w[l + 1] * w[l] + o];
            if (std::abs(h[o]) < 1e-3) near_kink = true;
            h[o] = std::max(0.0, h[o]);
          }
          off += w[l + 1] * w[l] + w[l + 1];
          a = h;
        }
      }
    }
    if (near_kink) continue;
    const auto g = backward(arch, p, x, t, Loss::kBce);
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      auto plus = p, minus = p;
      plus.values[j] += 1e-5;
      minus.values[j] -= 1e-5;
      const double fd = (backward(arch, plus, x, t, Loss::kBce).loss - backward(arch, minus, x, t, Loss::kBce).loss) / 2e-5;
      const double scale = std::max({std::abs(fd), std::abs(g.grad[j]), 1e-8});
      worst = std::max(worst, std::abs(fd - g.grad[j]) / scale);
    }
    ++draws;
  }
  return {worst <= 1e-4, "max relative coordinate error " + fmt("%.3g", worst) + " over 5 draws"};
}

// ---------------------------------------------------------------- C7

Outcome c7_relu() {
  ScenarioSpec spec;
  spec.id = ScenarioId::kS5;
  spec.n = 400;
  spec.seed = 707;
  const auto data = generate(spec);
  const auto sp = split(spec.n, 0.75, derive_seed(spec.seed, 1));
  const auto train = data.sample.subset(sp.train), test = data.sample.subset(sp.test);
  const auto grid = make_grid(-2.0, 2.0, 100);
  MlpArchitecture arch;
  arch.input_dim = 5;
  arch.hidden = {16, 16};
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.warm_start = false;
  cfg.seed = derive_seed(spec.seed, 2);
  const auto fit = fit_relu(train, indicators(train, grid), arch, cfg);
  const auto pred = predict_relu(fit, *test.x);
  const Matrix truth = data.truth.evaluate(sp.test, grid);
  // best constant: per-threshold mean of the oracle over the test units
  Matrix constant(truth.rows(), truth.cols());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < truth.rows(); ++i) m += truth(i, k);
    m /= static_cast<double>(truth.rows());
    for (std::size_t i = 0; i < truth.rows(); ++i) constant(i, k) = m;
  }
  const double net = crps_grid(pred.f_hat, truth), base = crps_grid(constant, truth);
  return {net < base, "network CRPS " + fmt("%.5f", net) + ", best constant " + fmt("%.5f", base)};
}

// ---------------------------------------------------------------- C8

Matrix filled(std::size_t r, std::size_t c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) m(i, j) = *it++;
  }
  return m;
}

Outcome c8_metrics() {
  std::vector<std::string> failed;
  auto expect = [&](const char* name, double got, double want) {
    if (got != want) failed.push_back(std::string(name) + " " + fmt("%.17g", got));
  };
  const auto ref = filled(3, 3, {0.25, 0.5, 0.75, 0.0, 0.125, 1.0, 0.375, 0.5, 0.625});
  expect("identical crps", crps_grid(ref, ref), 0.0);
  expect("identical msd", msd_grid(ref, ref), 0.0);
  Matrix up = ref;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) up(i, j) += 0.125;
  }
  expect("offset 1/8 crps", crps_grid(up, ref), 0.015625);
  expect("offset 1/8 msd", msd_grid(up, ref), 0.015625);
  Matrix col = ref;
  for (std::size_t i = 0; i < 3; ++i) col(i, 1) += 0.5;
  expect("one column msd", msd_grid(col, ref), 0.25);
  expect("one column crps", crps_grid(col, ref), 0.25 / 3.0);
  const auto half = filled(3, 3, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  const auto ind = filled(3, 3, {0, 1, 1, 0, 0, 1, 1, 1, 1});
  expect("half vs indicators msd", msd_grid(half, ind), 0.25);
  expect("half vs indicators crps", crps_grid(half, ind), 0.25);
  expect("two-point crps", crps_grid(filled(1, 2, {0, 1}), filled(1, 2, {1, 0})), 1.0);
  // non-dyadic offset, exact up to the rounding of (x + 0.1) - x
  Matrix tenth = ref;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) tenth(i, j) += 0.1;
  }
  if (std::abs(crps_grid(tenth, ref) - 0.01) > 1e-16) failed.push_back("offset 0.1");
  std::string detail = failed.empty() ? "all fixtures exact" : "mismatch:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------- C9

Outcome c9_determinism() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "distreg_acceptance_c9";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> runs{
      {"simulate", "--scenario", "S1", "--estimator", "isotonic", "--n", "400", "--reps", "3", "--seed", "7",
       "--threshold-mse"},
      {"simulate", "--scenario", "S4", "--estimator", "tf", "--r", "1", "--n", "200", "--reps", "3", "--seed", "11",
       "--threads", "4"},
      {"simulate", "--scenario", "S5", "--estimator", "relu", "--n", "120", "--reps", "2", "--seed", "3",
       "--epochs", "40", "--hidden", "8,8"},
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  std::size_t compared = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::string files[2][2];
    for (int rep = 0; rep < 2; ++rep) {
      auto args = runs[r];
      const auto dir = root / (std::to_string(r) + "_" + std::to_string(rep));
      args.insert(args.end(), {"--out", dir.string()});
      std::ostringstream out, err;
      if (run_cli(args, out, err) != 0) return {false, "run " + std::to_string(r) + " failed: " + err.str()};
      files[rep][0] = slurp(dir / "metrics.csv");
      files[rep][1] = slurp(dir / "summary.json");
    }
    for (int f = 0; f < 2; ++f) {
      if (files[0][f].empty() || files[0][f] != files[1][f]) {
        return {false, "run " + std::to_string(r) + " output differs between invocations"};
      }
      ++compared;
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(compared) + " file pairs byte-identical"};
}

// ---------------------------------------------------------------- C10

Outcome c10_generators() {
  const std::size_t n = 1000000;
  const ScenarioId ids[] = {ScenarioId::kS1, ScenarioId::kS2, ScenarioId::kS3,
                            ScenarioId::kS4, ScenarioId::kS5, ScenarioId::kS6};
  double worst_z = 0.0;
  std::string detail;
  for (auto id : ids) {
    ScenarioSpec spec;
    spec.id = id;
    spec.n = n;
    spec.seed = 1010;
    const auto data = generate(spec);
    // probe points: quantiles of a 10^4-unit subsample of the draws
    std::vector<double> probe;
    for (std::size_t i = 0; i < n; i += 100) probe.push_back(data.sample.y[i]);
    std::sort(probe.begin(), probe.end());
    double scenario_z = 0.0;
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const double q = probe[static_cast<std::size_t>(p * static_cast<double>(probe.size()))];
      double expect = 0.0, hits = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        expect += data.truth(i, q);
        hits += data.sample.y[i] <= q;
      }
      expect /= static_cast<double>(n);
      const double se = std::sqrt(expect * (1.0 - expect) / static_cast<double>(n));
      scenario_z = std::max(scenario_z, std::abs(hits / static_cast<double>(n) - expect) / se);
    }
    worst_z = std::max(worst_z, scenario_z);
    detail += to_string(id) + " " + fmt("%.2f", scenario_z) + " ";
  }
  bool ordered = true;
  for (auto id : {ScenarioId::kS1, ScenarioId::kS2}) {
    ScenarioSpec spec;
    spec.id = id;
    spec.n = 400;
    const auto data = generate(spec);
    for (const auto& g : {make_grid(-1.0, 0.4, 100), make_grid(-2.0, 2.0, 100), make_grid(0.8, 10.0, 100)}) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        for (std::size_t i = 1; i < spec.n; ++i) ordered &= data.truth(i, g[k]) >= data.truth(i - 1, g[k]);
      }
    }
  }
  return {worst_z <= 3.0 && ordered,
          "max |z| per scenario: " + detail + (ordered ? "; S1/S2 ordered" : "; S1/S2 NOT ordered")};
}

struct Criterion {
  const char* id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"C1", "PAVA oracle equivalence", c1_pava},
      {"C2", "fused-lasso oracle equivalence", c2_fused},
      {"C3", "rearrangement does not increase CRPS", c3_rearrangement},
      {"C4", "isotonic rate shape", c4_isotonic_rate},
      {"C5", "trend-filter improvement", c5_trendfilter},
      {"C6", "ReLU gradient check", c6_gradient},
      {"C7", "ReLU estimator on S5", c7_relu},
      {"C8", "metric definitions", c8_metrics},
      {"C9", "determinism", c9_determinism},
      {"C10", "generator correctness", c10_generators},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%-4s %s  %s (%.1f s): %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
