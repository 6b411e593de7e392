#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distreg/core.hpp"

namespace distreg {

// Euclidean projection of v onto the nondecreasing cone
// {theta : theta_1 <= ... <= theta_n}, by pool-adjacent-violators.
std::vector<double> pava_project(std::span<const double> v);

struct IsotonicFit {
  CdfEstimate estimate;
  // estimate row r corresponds to input row order[r].
  std::vector<std::size_t> order;
};

// Column-wise PAVA of the indicator matrix. Rows must already be in the
// order along which P(y_i <= t) is nondecreasing.
IsotonicFit fit_isotonic(const IndicatorMatrix& w);

// Same, after stably sorting rows by order_key.
IsotonicFit fit_isotonic(const IndicatorMatrix& w, std::span<const double> order_key);

// Copies, for every query position, the fitted row whose training position
// is nearest. Equidistant queries take the smaller position; queries
// outside the training range clamp to the first/last row.
CdfEstimate predict_nn(const CdfEstimate& fit, std::span<const double> train_index,
                       std::span<const double> query_index);

inline CdfEstimate predict_nn(const IsotonicFit& fit, std::span<const double> train_index,
                              std::span<const double> query_index) {
  return predict_nn(fit.estimate, train_index, query_index);
}

}  // namespace distreg
