#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "distreg/metrics.hpp"
#include "distreg/scenarios.hpp"
#include "distreg/special.hpp"

using namespace distreg;

namespace {

Matrix filled(std::size_t r, std::size_t c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) m(i, j) = *it++;
  }
  return m;
}

// Composite Simpson on [lo, hi] with n (even) panels.
template <class F>
double simpson(F f, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double s = f(lo) + f(hi);
  for (std::size_t k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(k));
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("crps_grid and msd_grid examples") {
  const auto ref = filled(3, 3, {0.1, 0.5, 0.9, 0.0, 0.2, 1.0, 0.3, 0.3, 0.6});
  CHECK(crps_grid(ref, ref) == 0.0);
  CHECK(msd_grid(ref, ref) == 0.0);

  Matrix shifted = ref;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) shifted(i, j) += 0.1;
  }
  CHECK(crps_grid(shifted, ref) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(msd_grid(shifted, ref) == doctest::Approx(0.01).epsilon(1e-12));

  CHECK(crps_grid(filled(1, 2, {0, 1}), filled(1, 2, {1, 0})) == 1.0);

  Matrix col = ref;
  for (std::size_t i = 0; i < 3; ++i) col(i, 1) += 0.5;
  CHECK(msd_grid(col, ref) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(crps_grid(col, ref) == doctest::Approx(0.25 / 3).epsilon(1e-12));

  const auto half = filled(2, 2, {0.5, 0.5, 0.5, 0.5});
  CHECK(msd_grid(half, filled(2, 2, {0, 1, 1, 0})) == 0.25);

  CHECK_THROWS(crps_grid(Matrix(2, 2), Matrix(2, 3)));
  CHECK_THROWS(msd_grid(Matrix(3, 2), Matrix(2, 2)));
}

TEST_CASE("metric report consistency, symmetry and permutation invariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto grid = make_grid(0, 1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(12, 9), b(12, 9);
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t k = 0; k < 9; ++k) {
        a(i, k) = u(rng);
        b(i, k) = u(rng);
      }
    }
    const auto rep = evaluate_metrics(a, b, grid);
    CHECK(rep.n_test == 12);
    CHECK(rep.per_threshold_mse.size() == 9);
    const double mean = std::accumulate(rep.per_threshold_mse.begin(), rep.per_threshold_mse.end(), 0.0) / 9;
    CHECK(rep.crps == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rep.msd == *std::max_element(rep.per_threshold_mse.begin(), rep.per_threshold_mse.end()));
    CHECK(rep.msd >= rep.crps);
    CHECK(crps_grid(a, b) == doctest::Approx(crps_grid(b, a)).epsilon(1e-15));
    CHECK(msd_grid(a, b) == doctest::Approx(msd_grid(b, a)).epsilon(1e-15));

    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(crps_grid(a.select_rows(perm), b.select_rows(perm)) == doctest::Approx(rep.crps).epsilon(1e-12));
    CHECK(msd_grid(a.select_rows(perm), b.select_rows(perm)) == doctest::Approx(rep.msd).epsilon(1e-12));
  }
}

TEST_CASE("reference providers") {
  const std::vector<double> y{0.5, 2.0, -1.0};
  const IndicatorReference ind(y);
  const std::vector<std::size_t> units{2, 0};
  const auto g = ThresholdGrid::from_points({0.0, 1.0});
  const auto m = ind.reference(units, g);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 1.0);
  CHECK(m(1, 0) == 0.0);
  CHECK(m(1, 1) == 1.0);

  ScenarioSpec spec;
  spec.n = 10;
  const auto data = generate(spec);
  const OracleReference oracle(data.truth);
  const auto o = oracle.reference(units, g);
  CHECK(o(0, 0) == doctest::Approx(normal_cdf(0.0 - (1.0 - 3.0 / 10))).epsilon(1e-15));

  CdfEstimate est{o, g, {}};
  const auto rep = evaluate_metrics(est, oracle, units);
  CHECK(rep.crps == 0.0);
  CHECK(rep.n_test == 2);
}

TEST_CASE("crps_continuous") {
  ScenarioSpec spec;
  spec.n = 50;
  const auto data = generate(spec);
  const auto& truth = data.truth;
  const std::size_t unit = 10;
  const double mu = 1.0 - 11.0 / 50.0;

  // the oracle against itself: a step that follows F* on a fine partition
  StepCdf fine;
  for (int k = 0; k <= 20000; ++k) fine.breakpoints.push_back(mu - 9.0 + 18.0 * k / 20000.0);
  for (int k = 0; k < 20000; ++k) fine.levels.push_back(truth(unit, 0.5 * (fine.breakpoints[k] + fine.breakpoints[k + 1])));
  CHECK(crps_continuous(fine, truth, unit) <= 1e-6);

  // unit step at the median vs the oracle; the integral is 2 * int_0^inf Phi(-s)^2 ds
  const StepCdf step{{mu, mu + 1e-12}, {1.0}};
  const double oracle = 2.0 * simpson([](double s) { return std::pow(normal_cdf(-s), 2); }, 0.0, 12.0, 200000);
  CHECK(oracle == doctest::Approx(0.2336949).epsilon(1e-6));
  const double got = crps_continuous(step, truth, unit);
  CHECK(std::abs(got - oracle) <= 1e-4);
  const double coarse = crps_continuous(step, truth, unit, 5000);
  CHECK(std::abs(coarse - got) <= 1e-4);

  // plain function form
  const auto zero = crps_continuous([](double) { return 0.0; }, [](double) { return 1.0; }, 0.0, 2.0, 100);
  CHECK(zero == doctest::Approx(2.0).epsilon(1e-14));
}
