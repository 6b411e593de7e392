#include "distreg/isotonic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace distreg {

std::vector<double> pava_project(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("pava_project: empty input");

  // Stack of blocks (sum, count); a new value is merged backwards while
  // the previous block mean exceeds the current one.
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  sums.reserve(v.size());
  counts.reserve(v.size());
  for (double value : v) {
    if (!std::isfinite(value)) throw std::invalid_argument("pava_project: non-finite input");
    double s = value;
    std::size_t c = 1;
    while (!sums.empty() &&
           sums.back() * static_cast<double>(c) > s * static_cast<double>(counts.back())) {
      // mean(prev) > mean(cur): pool. Ties are left alone so monotone input
      // passes through bit-for-bit.
      s += sums.back();
      c += counts.back();
      sums.pop_back();
      counts.pop_back();
    }
    sums.push_back(s);
    counts.push_back(c);
  }

  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t b = 0; b < sums.size(); ++b) {
    const double mean = sums[b] / static_cast<double>(counts[b]);
    out.insert(out.end(), counts[b], mean);
  }
  return out;
}

namespace {

CdfEstimate project_columns(const Matrix& w, const ThresholdGrid& grid) {
  CdfEstimate est{Matrix(w.rows(), w.cols()), grid, {"isotonic", {}, false}};
  for (std::size_t k = 0; k < w.cols(); ++k) {
    est.f_hat.set_column(k, pava_project(w.column(k)));
  }
  return est;
}

}  // namespace

IsotonicFit fit_isotonic(const IndicatorMatrix& w) {
  IsotonicFit fit{project_columns(w.w, w.grid), {}};
  fit.order.resize(w.w.rows());
  std::iota(fit.order.begin(), fit.order.end(), std::size_t{0});
  return fit;
}

IsotonicFit fit_isotonic(const IndicatorMatrix& w, std::span<const double> order_key) {
  if (order_key.size() != w.w.rows()) {
    throw std::invalid_argument("fit_isotonic: order key length mismatch");
  }
  std::vector<std::size_t> order(order_key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return order_key[a] < order_key[b]; });
  IsotonicFit fit{project_columns(w.w.select_rows(order), w.grid), std::move(order)};
  return fit;
}

CdfEstimate predict_nn(const CdfEstimate& fit, std::span<const double> train_index,
                       std::span<const double> query_index) {
  if (train_index.empty()) throw std::invalid_argument("predict_nn: empty training set");
  if (train_index.size() != fit.f_hat.rows()) {
    throw std::invalid_argument("predict_nn: training index length differs from fit rows");
  }
  if (!std::is_sorted(train_index.begin(), train_index.end())) {
    throw std::invalid_argument("predict_nn: training index must be sorted");
  }

  CdfEstimate out{Matrix(query_index.size(), fit.f_hat.cols()), fit.grid, fit.meta};
  for (std::size_t q = 0; q < query_index.size(); ++q) {
    const double t = query_index[q];
    auto it = std::lower_bound(train_index.begin(), train_index.end(), t);
    std::size_t pick;
    if (it == train_index.begin()) {
      pick = 0;
    } else if (it == train_index.end()) {
      pick = train_index.size() - 1;
    } else {
      const auto hi = static_cast<std::size_t>(it - train_index.begin());
      const auto lo = hi - 1;
      pick = (t - train_index[lo] <= train_index[hi] - t) ? lo : hi;
    }
    auto src = fit.f_hat.row(pick);
    std::copy(src.begin(), src.end(), out.f_hat.row(q).begin());
  }
  return out;
}

}  // namespace distreg
