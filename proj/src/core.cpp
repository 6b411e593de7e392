#include "distreg/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace distreg {

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_column(std::size_t j, std::span<const double> values) {
  if (values.size() != rows_) throw std::invalid_argument("set_column: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows_) throw std::out_of_range("select_rows: index out of range");
    auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

ThresholdGrid ThresholdGrid::evenly_spaced(double lo, double hi, std::size_t m) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError("grid bounds must be finite");
  }
  if (!(lo < hi)) throw ConfigError("grid requires lo < hi");
  if (m < 2) throw ConfigError("evenly spaced grid requires m >= 2");
  ThresholdGrid g;
  g.kind_ = GridKind::kEvenlySpaced;
  g.points_.resize(m);
  const double step = (hi - lo) / static_cast<double>(m - 1);
  for (std::size_t k = 0; k < m; ++k) g.points_[k] = lo + step * static_cast<double>(k);
  g.points_.back() = hi;
  return g;
}

ThresholdGrid ThresholdGrid::from_points(std::vector<double> points) {
  if (points.empty()) throw ConfigError("grid must contain at least one point");
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!std::isfinite(points[k])) throw ConfigError("grid points must be finite");
    if (k > 0 && !(points[k - 1] < points[k])) {
      throw ConfigError("grid points must be strictly increasing");
    }
  }
  ThresholdGrid g;
  g.kind_ = GridKind::kExplicit;
  g.points_ = std::move(points);
  return g;
}

std::size_t ThresholdGrid::nearest_index(double t) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), t);
  if (it == points_.begin()) return 0;
  if (it == points_.end()) return points_.size() - 1;
  const auto hi = static_cast<std::size_t>(it - points_.begin());
  const auto lo = hi - 1;
  return (t - points_[lo] <= points_[hi] - t) ? lo : hi;
}

ThresholdGrid make_grid(double lo, double hi, std::size_t m) {
  return ThresholdGrid::evenly_spaced(lo, hi, m);
}

void Sample::validate() const {
  if (y.empty()) throw DataError("sample is empty");
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("sample contains a non-finite response");
  }
  if (x) {
    if (x->rows() != y.size()) throw DataError("covariate row count differs from n");
    for (double v : x->data()) {
      if (!std::isfinite(v)) throw DataError("sample contains a non-finite covariate");
    }
  }
}

Sample Sample::subset(std::span<const std::size_t> idx) const {
  Sample out;
  out.y.reserve(idx.size());
  for (auto i : idx) out.y.push_back(y.at(i));
  if (x) out.x = x->select_rows(idx);
  return out;
}

Matrix TrueCdf::evaluate(std::span<const std::size_t> units, const ThresholdGrid& grid) const {
  Matrix out(units.size(), grid.size());
  for (std::size_t r = 0; r < units.size(); ++r) {
    for (std::size_t k = 0; k < grid.size(); ++k) out(r, k) = cdf(units[r], grid[k]);
  }
  return out;
}

IndicatorMatrix indicators(std::span<const double> y, const ThresholdGrid& grid) {
  if (y.empty()) throw DataError("indicators: empty sample");
  IndicatorMatrix out{Matrix(y.size(), grid.size()), grid};
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw DataError("indicators: non-finite response");
    // First threshold with t_k >= y_i; everything from there on is 1.
    auto first = std::lower_bound(grid.points().begin(), grid.points().end(), y[i]);
    auto k0 = static_cast<std::size_t>(first - grid.points().begin());
    for (std::size_t k = k0; k < grid.size(); ++k) out.w(i, k) = 1.0;
  }
  return out;
}

IndicatorMatrix indicators(const Sample& sample, const ThresholdGrid& grid) {
  return indicators(std::span<const double>(sample.y), grid);
}

std::vector<double> diff_matrix_apply(std::span<const double> theta, int r) {
  if (r < 0) throw std::invalid_argument("difference order must be >= 0");
  if (theta.size() <= static_cast<std::size_t>(r)) {
    throw std::invalid_argument("diff_matrix_apply: need length > r");
  }
  std::vector<double> d(theta.begin(), theta.end());
  for (int level = 0; level < r; ++level) {
    for (std::size_t i = 0; i + 1 < d.size(); ++i) d[i] = d[i + 1] - d[i];
    d.pop_back();
  }
  return d;
}

double tv_order_r(std::span<const double> theta, int r) {
  if (r < 1) throw std::invalid_argument("tv_order_r: r must be >= 1");
  const auto d = diff_matrix_apply(theta, r);
  double l1 = 0.0;
  for (double v : d) l1 += std::abs(v);
  return std::pow(static_cast<double>(theta.size()), r - 1) * l1;
}

std::size_t count_strict_increases(std::span<const double> theta, double tol) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < theta.size(); ++i) {
    if (theta[i + 1] - theta[i] > tol) ++count;
  }
  return count;
}

}  // namespace distreg
