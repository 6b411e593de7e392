#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distreg/core.hpp"

namespace distreg {

// Right-continuous step CDF: 0 below breakpoints[0], levels[k] on
// [breakpoints[k], breakpoints[k+1]), 1 at and above breakpoints.back().
struct StepCdf {
  std::vector<double> breakpoints;
  std::vector<double> levels;

  double operator()(double t) const;
  // Throws std::invalid_argument unless breakpoints are strictly
  // increasing, |levels| = |breakpoints| - 1 and levels lie in [0, 1].
  void validate() const;
};

// Entrywise clamp to [0, 1]. The lower clamp is max{0, F}; the upper clamp
// at 1 never increases the L2 distance to a CDF.
CdfEstimate truncate_nonneg(CdfEstimate estimate);
void truncate_nonneg(std::span<double> values);

// The (unrearranged) step function with value a[j] on [y_(j), y_(j+1)).
StepCdf step_from_order_statistics(std::span<const double> y_sorted, std::span<const double> a);

// Monotone rearrangement of the step function above. Its levels, sorted
// decreasingly, are laid out right to left from y_(n) keeping each
// level's original interval length, so the result is nondecreasing and
// equimeasurable with the input. Ties in a keep their original
// left-to-right order.
StepCdf rearrange_unit(std::span<const double> y_sorted, std::span<const double> a);

// estimate must be evaluated at the inner order statistics y_(1..n-1) of
// sample.y; each row is truncated and rearranged. Duplicate responses are
// rejected (see jitter_ties in dataio).
std::vector<StepCdf> rearrange_all(const Sample& sample, const CdfEstimate& estimate);
std::vector<StepCdf> rearrange_all(std::span<const double> y, const Matrix& values);

std::vector<double> eval_stepcdf(const StepCdf& cdf, const ThresholdGrid& grid);

}  // namespace distreg
