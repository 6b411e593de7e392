#include "distreg/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace distreg {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("metric inputs differ in shape");
  }
}

std::vector<double> column_mse(const Matrix& f_hat, const Matrix& reference) {
  check_same_shape(f_hat, reference);
  std::vector<double> mse(f_hat.cols(), 0.0);
  if (f_hat.rows() == 0) return mse;
  for (std::size_t i = 0; i < f_hat.rows(); ++i) {
    for (std::size_t k = 0; k < f_hat.cols(); ++k) {
      const double d = f_hat(i, k) - reference(i, k);
      mse[k] += d * d;
    }
  }
  for (double& m : mse) m /= static_cast<double>(f_hat.rows());
  return mse;
}

}  // namespace

double crps_grid(const Matrix& f_hat, const Matrix& reference) {
  check_same_shape(f_hat, reference);
  if (f_hat.rows() == 0 || f_hat.cols() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < f_hat.rows(); ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < f_hat.cols(); ++k) {
      const double d = f_hat(i, k) - reference(i, k);
      row += d * d;
    }
    total += row / static_cast<double>(f_hat.cols());
  }
  return total / static_cast<double>(f_hat.rows());
}

double msd_grid(const Matrix& f_hat, const Matrix& reference) {
  const auto mse = column_mse(f_hat, reference);
  return mse.empty() ? 0.0 : *std::max_element(mse.begin(), mse.end());
}

MetricReport evaluate_metrics(const Matrix& f_hat, const Matrix& reference,
                              const ThresholdGrid& grid) {
  if (f_hat.cols() != grid.size()) throw std::invalid_argument("estimate does not match grid");
  MetricReport rep;
  rep.per_threshold_mse = column_mse(f_hat, reference);
  rep.crps = crps_grid(f_hat, reference);
  rep.msd = rep.per_threshold_mse.empty()
                ? 0.0
                : *std::max_element(rep.per_threshold_mse.begin(), rep.per_threshold_mse.end());
  rep.n_test = f_hat.rows();
  rep.grid = grid;
  return rep;
}

Matrix OracleReference::reference(std::span<const std::size_t> units,
                                  const ThresholdGrid& grid) const {
  return truth_.evaluate(units, grid);
}

Matrix IndicatorReference::reference(std::span<const std::size_t> units,
                                     const ThresholdGrid& grid) const {
  Matrix out(units.size(), grid.size());
  for (std::size_t r = 0; r < units.size(); ++r) {
    const double y = y_.at(units[r]);
    for (std::size_t k = 0; k < grid.size(); ++k) out(r, k) = y <= grid[k] ? 1.0 : 0.0;
  }
  return out;
}

MetricReport evaluate_metrics(const CdfEstimate& estimate, const ReferenceProvider& ref,
                              std::span<const std::size_t> test_units) {
  if (estimate.f_hat.rows() != test_units.size()) {
    throw std::invalid_argument("estimate rows differ from the number of test units");
  }
  return evaluate_metrics(estimate.f_hat, ref.reference(test_units, estimate.grid), estimate.grid);
}

double crps_continuous(const std::function<double(double)>& g,
                       const std::function<double(double)>& h, double lo, double hi,
                       std::size_t fine_m) {
  if (fine_m == 0) throw std::invalid_argument("crps_continuous: fine_m must be positive");
  if (!(hi > lo)) return 0.0;
  const double dt = (hi - lo) / static_cast<double>(fine_m);
  double total = 0.0;
  for (std::size_t k = 0; k < fine_m; ++k) {
    const double t = lo + (static_cast<double>(k) + 0.5) * dt;
    const double d = g(t) - h(t);
    total += d * d;
  }
  return total * dt;
}

double crps_continuous(const StepCdf& f_hat, const TrueCdf& f_star, std::size_t unit,
                       std::size_t fine_m) {
  auto [lo, hi] = f_star.support(unit);
  if (!f_hat.breakpoints.empty()) {
    lo = std::min(lo, f_hat.breakpoints.front());
    hi = std::max(hi, f_hat.breakpoints.back());
  }
  const double pad = 1e-3 * (hi - lo);
  return crps_continuous([&](double t) { return f_hat(t); },
                         [&](double t) { return f_star(unit, t); }, lo - pad, hi + pad, fine_m);
}

}  // namespace distreg
