#include "distreg/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace distreg {

double StepCdf::operator()(double t) const {
  if (breakpoints.empty() || t < breakpoints.front()) return 0.0;
  if (t >= breakpoints.back()) return 1.0;
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  return levels[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

void StepCdf::validate() const {
  if (breakpoints.empty()) throw std::invalid_argument("StepCdf: no breakpoints");
  if (levels.size() + 1 != breakpoints.size()) {
    throw std::invalid_argument("StepCdf: need one level per interval");
  }
  for (std::size_t k = 1; k < breakpoints.size(); ++k) {
    if (!(breakpoints[k - 1] < breakpoints[k])) {
      throw std::invalid_argument("StepCdf: breakpoints must be strictly increasing");
    }
  }
  for (double l : levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("StepCdf: level outside [0,1]");
  }
}

void truncate_nonneg(std::span<double> values) {
  for (double& v : values) v = std::clamp(v, 0.0, 1.0);
}

CdfEstimate truncate_nonneg(CdfEstimate estimate) {
  truncate_nonneg(estimate.f_hat.data());
  estimate.meta.raw = false;
  return estimate;
}

namespace {

void check_inputs(std::span<const double> y_sorted, std::span<const double> a) {
  const std::size_t n = y_sorted.size();
  if (n < 2) throw std::invalid_argument("rearrangement needs at least two order statistics");
  if (a.size() != n - 1) {
    throw std::invalid_argument("rearrangement needs n - 1 values, one per order statistic");
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (y_sorted[k - 1] == y_sorted[k]) {
      throw DataError("duplicate order statistics; jitter ties before rearranging");
    }
    if (!(y_sorted[k - 1] < y_sorted[k])) {
      throw std::invalid_argument("order statistics must be sorted");
    }
  }
}

}  // namespace

StepCdf step_from_order_statistics(std::span<const double> y_sorted, std::span<const double> a) {
  check_inputs(y_sorted, a);
  StepCdf out{{y_sorted.begin(), y_sorted.end()}, {a.begin(), a.end()}};
  out.validate();
  return out;
}

StepCdf rearrange_unit(std::span<const double> y_sorted, std::span<const double> a) {
  check_inputs(y_sorted, a);
  const std::size_t n = y_sorted.size();

  // j_1, ..., j_{n-1}: a sorted decreasingly, ties toward the larger j so
  // an already nondecreasing input keeps its breakpoints.
  std::vector<std::size_t> order(n - 1);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
    if (a[p] != a[q]) return a[p] > a[q];
    return p > q;
  });

  // v_0 = y_(n), v_l = v_{l-1} - (y_(j_l + 1) - y_(j_l)); level a_{j_l}
  // sits on [v_l, v_{l-1}).
  std::vector<double> v(n);
  v[0] = y_sorted[n - 1];
  for (std::size_t l = 1; l < n; ++l) {
    const std::size_t j = order[l - 1];
    v[l] = v[l - 1] - (y_sorted[j + 1] - y_sorted[j]);
  }
  v[n - 1] = y_sorted[0];  // exact up to rounding; pin the left end

  StepCdf out;
  out.breakpoints.resize(n);
  out.levels.resize(n - 1);
  for (std::size_t k = 0; k < n; ++k) out.breakpoints[k] = v[n - 1 - k];
  for (std::size_t k = 0; k + 1 < n; ++k) out.levels[k] = a[order[n - 2 - k]];
  out.validate();
  return out;
}

std::vector<StepCdf> rearrange_all(std::span<const double> y, const Matrix& values) {
  std::vector<double> y_sorted(y.begin(), y.end());
  std::sort(y_sorted.begin(), y_sorted.end());
  if (values.cols() + 1 != y_sorted.size()) {
    throw std::invalid_argument("rearrange_all: estimate must have n - 1 columns");
  }
  std::vector<StepCdf> out;
  out.reserve(values.rows());
  std::vector<double> a(values.cols());
  for (std::size_t i = 0; i < values.rows(); ++i) {
    auto row = values.row(i);
    std::copy(row.begin(), row.end(), a.begin());
    truncate_nonneg(a);
    out.push_back(rearrange_unit(y_sorted, a));
  }
  return out;
}

std::vector<StepCdf> rearrange_all(const Sample& sample, const CdfEstimate& estimate) {
  std::vector<double> y_sorted = sample.y;
  std::sort(y_sorted.begin(), y_sorted.end());
  if (estimate.grid.size() + 1 != y_sorted.size()) {
    throw std::invalid_argument("rearrange_all: estimate grid must be the n - 1 inner order statistics");
  }
  const double scale = std::max(1.0, std::abs(y_sorted.back() - y_sorted.front()));
  for (std::size_t k = 0; k < estimate.grid.size(); ++k) {
    if (std::abs(estimate.grid[k] - y_sorted[k]) > 1e-12 * scale) {
      throw std::invalid_argument("rearrange_all: estimate grid is not aligned with sorted y");
    }
  }
  return rearrange_all(sample.y, estimate.f_hat);
}

std::vector<double> eval_stepcdf(const StepCdf& cdf, const ThresholdGrid& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) out[k] = cdf(grid[k]);
  return out;
}

}  // namespace distreg
