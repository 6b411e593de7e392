#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "distreg/core.hpp"
#include "distreg/rearrange.hpp"

namespace distreg {

struct MetricReport {
  double crps = 0.0;
  double msd = 0.0;
  std::vector<double> per_threshold_mse;
  std::size_t n_test = 0;
  ThresholdGrid grid;
};

// (1/|Test|) sum_i (1/m) sum_k (f_hat(i,k) - ref(i,k))^2
double crps_grid(const Matrix& f_hat, const Matrix& reference);
// max_k (1/|Test|) sum_i (f_hat(i,k) - ref(i,k))^2
double msd_grid(const Matrix& f_hat, const Matrix& reference);

MetricReport evaluate_metrics(const Matrix& f_hat, const Matrix& reference,
                              const ThresholdGrid& grid);

// Source of the comparison values ref_i(t_k) for a set of test units.
class ReferenceProvider {
 public:
  virtual ~ReferenceProvider() = default;
  virtual Matrix reference(std::span<const std::size_t> units, const ThresholdGrid& grid) const = 0;
};

// Simulation: the oracle F*_i(t).
class OracleReference final : public ReferenceProvider {
 public:
  explicit OracleReference(TrueCdf truth) : truth_(std::move(truth)) {}
  Matrix reference(std::span<const std::size_t> units, const ThresholdGrid& grid) const override;

 private:
  TrueCdf truth_;
};

// Real data: the empirical indicators w_i(t) = 1{y_i <= t}.
class IndicatorReference final : public ReferenceProvider {
 public:
  explicit IndicatorReference(std::vector<double> y) : y_(std::move(y)) {}
  Matrix reference(std::span<const std::size_t> units, const ThresholdGrid& grid) const override;

 private:
  std::vector<double> y_;
};

MetricReport evaluate_metrics(const CdfEstimate& estimate, const ReferenceProvider& ref,
                              std::span<const std::size_t> test_units);

// Midpoint-rule approximation of int_lo^hi (G(t) - H(t))^2 dt on fine_m cells.
double crps_continuous(const std::function<double(double)>& g,
                       const std::function<double(double)>& h, double lo, double hi,
                       std::size_t fine_m);

// CRPS between a step CDF and unit i's true CDF, integrated over the union
// of the step breakpoints and the oracle support.
double crps_continuous(const StepCdf& f_hat, const TrueCdf& f_star, std::size_t unit,
                       std::size_t fine_m = 10000);

}  // namespace distreg
