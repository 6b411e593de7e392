#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace distreg {

// Error taxonomy. The CLI maps these onto exit codes 2/3/4.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Rows are units, columns thresholds
// (or covariates) throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double> column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> values);

  // Rows selected (and reordered) by index.
  Matrix select_rows(std::span<const std::size_t> idx) const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class GridKind { kEvenlySpaced, kExplicit };

// Ordered evaluation points shared by every per-threshold fit.
class ThresholdGrid {
 public:
  ThresholdGrid() = default;

  // Evenly spaced points lo = t_1 < ... < t_m = hi, m >= 2.
  static ThresholdGrid evenly_spaced(double lo, double hi, std::size_t m);
  // Arbitrary strictly increasing finite points, m >= 1.
  static ThresholdGrid from_points(std::vector<double> points);

  GridKind kind() const { return kind_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t k) const { return points_[k]; }
  std::span<const double> points() const { return points_; }
  double lo() const { return points_.front(); }
  double hi() const { return points_.back(); }

  // Index of the grid point closest to t; ties go to the smaller index.
  std::size_t nearest_index(double t) const;

  bool operator==(const ThresholdGrid&) const = default;

 private:
  GridKind kind_ = GridKind::kExplicit;
  std::vector<double> points_;
};

ThresholdGrid make_grid(double lo, double hi, std::size_t m);

struct Sample {
  std::vector<double> y;
  std::optional<Matrix> x;

  std::size_t size() const { return y.size(); }
  // Throws DataError when n == 0, a value is non-finite or x has the wrong
  // row count.
  void validate() const;
  Sample subset(std::span<const std::size_t> idx) const;
};

struct IndicatorMatrix {
  Matrix w;
  ThresholdGrid grid;
};

struct EstimateMeta {
  std::string estimator;
  std::map<std::string, double> params;
  // Raw penalized output that may leave [0,1] before truncation.
  bool raw = false;
};

struct CdfEstimate {
  Matrix f_hat;
  ThresholdGrid grid;
  EstimateMeta meta;
};

// Population CDFs of a simulated design. cdf(i, t) = F*_i(t); support(i)
// returns an interval outside of which F*_i is 0 or 1 up to ~1e-15.
struct TrueCdf {
  std::size_t n = 0;
  std::function<double(std::size_t, double)> cdf;
  std::function<std::pair<double, double>(std::size_t)> support;

  double operator()(std::size_t i, double t) const { return cdf(i, t); }
  // Matrix of F*_i(t_k) for the listed units.
  Matrix evaluate(std::span<const std::size_t> units, const ThresholdGrid& grid) const;
};

// w[i][k] = 1{y_i <= t_k}.
IndicatorMatrix indicators(const Sample& sample, const ThresholdGrid& grid);
IndicatorMatrix indicators(std::span<const double> y, const ThresholdGrid& grid);

// D^(r) theta; D^(0) is the identity. Requires theta.size() > r.
std::vector<double> diff_matrix_apply(std::span<const double> theta, int r);

// TV^(r)(theta) = n^(r-1) * ||D^(r) theta||_1 for r >= 1.
double tv_order_r(std::span<const double> theta, int r);

// |{i : theta_{i+1} - theta_i > tol}|.
std::size_t count_strict_increases(std::span<const double> theta, double tol = 1e-9);

}  // namespace distreg
