#include "distreg/trendfilter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

namespace distreg {

void TrendFilterConfig::validate() const {
  if (r < 1) throw ConfigError("trend filter order r must be >= 1");
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("lambda grid values must be positive");
  }
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (!(admm.rho > 0.0)) throw ConfigError("ADMM rho must be positive");
  if (admm.max_iter < 1) throw ConfigError("ADMM max_iter must be >= 1");
  auto tol_ok = [](double t) { return t > 0.0 && t <= 1e-2; };
  if (!tol_ok(admm.tol_primal) || !tol_ok(admm.tol_dual)) {
    throw ConfigError("ADMM tolerances must lie in (0, 1e-2]");
  }
}

std::vector<double> TrendFilterConfig::default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -4; e <= 16; ++e) grid.push_back(std::pow(10.0, e / 4.0));
  return grid;
}

// ---------------------------------------------------------------------------
// Exact 1-d fused lasso.
//
// Forward pass keeps the derivative of
//   g_k(b) = min_{b'} f_k(b') + lambda |b - b'|
// as a piecewise-linear function: -lambda left of the first knot, +lambda
// right of the last, and each knot adds (a * b + c) when crossed from the
// left. f_{k+1}(b) = 1/2 (b - v_{k+1})^2 + g_k(b). The clip points
// lo_k / hi_k (where f_k' = -lambda / +lambda) are the back pointers:
// theta_k = clamp(theta_{k+1}, lo_k, hi_k).
// ---------------------------------------------------------------------------
std::vector<double> fused_lasso_1d(std::span<const double> v, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("fused_lasso_1d: lambda must be >= 0");
  const std::size_t n = v.size();
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("fused_lasso_1d: non-finite input");
  }
  if (n == 0) return {};
  if (lambda == 0.0 || n == 1) return {v.begin(), v.end()};

  // Knot deque stored in fixed arrays; at most one push per side per step.
  const std::size_t cap = 2 * n + 2;
  std::vector<double> kx(cap), ka(cap), kc(cap);
  std::size_t head = n + 1, tail = n + 1;  // [head, tail)
  std::vector<double> lo(n - 1), hi(n - 1);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    // The incoming message is clipped at +-lambda outside its knots; the
    // first stage has no message.
    const double clip = k == 0 ? 0.0 : lambda;
    // Left scan: smallest b with f_k'(b) >= -lambda.
    double a = 1.0, c = -v[k] - clip;
    while (head < tail && a * kx[head] + c < -lambda) {
      a += ka[head];
      c += kc[head];
      ++head;
    }
    const double b_lo = (-lambda - c) / a;
    const double a_lo = a, c_lo = c;

    // Right scan: largest b with f_k'(b) <= lambda.
    a = 1.0;
    c = -v[k] + clip;
    while (head < tail && a * kx[tail - 1] + c > lambda) {
      a -= ka[tail - 1];
      c -= kc[tail - 1];
      --tail;
    }
    const double b_hi = (lambda - c) / a;

    --head;
    kx[head] = b_lo;
    ka[head] = a_lo;
    kc[head] = c_lo + lambda;
    kx[tail] = b_hi;
    ka[tail] = -a;
    kc[tail] = lambda - c;
    ++tail;

    lo[k] = b_lo;
    hi[k] = b_hi;
  }

  // Root of f_n'.
  double a = 1.0, c = -v[n - 1] - lambda;
  while (head < tail && a * kx[head] + c < 0.0) {
    a += ka[head];
    c += kc[head];
    ++head;
  }
  std::vector<double> theta(n);
  theta[n - 1] = -c / a;
  for (std::size_t k = n - 1; k-- > 0;) {
    theta[k] = std::clamp(theta[k + 1], lo[k], hi[k]);
  }
  return theta;
}

namespace {

// Rows of D^(q) are the signed binomial coefficients (-1)^(q-j) C(q, j).
std::vector<double> diff_stencil(int q) {
  std::vector<double> s(static_cast<std::size_t>(q) + 1);
  double binom = 1.0;
  for (int j = 0; j <= q; ++j) {
    s[static_cast<std::size_t>(j)] = ((q - j) % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * (q - j) / (j + 1);
  }
  return s;
}

void apply_diff(const std::vector<double>& stencil, std::span<const double> x,
                std::vector<double>& out) {
  const std::size_t q = stencil.size() - 1;
  out.assign(x.size() - q, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= q; ++j) s += stencil[j] * x[i + j];
    out[i] = s;
  }
}

// out = D^T y, y of length n - q.
void apply_diff_transpose(const std::vector<double>& stencil, std::span<const double> y,
                          std::size_t n, std::vector<double>& out) {
  const std::size_t q = stencil.size() - 1;
  out.assign(n, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j <= q; ++j) out[i + j] += stencil[j] * y[i];
  }
}

// Cholesky factor of I + rho * D^T D with D = D^(q); lower band of width q.
class BandedSystem {
 public:
  BandedSystem(std::size_t n, int q, double rho) : n_(n), q_(static_cast<std::size_t>(q)) {
    const auto stencil = diff_stencil(q);
    // band_[i * (q+1) + d] holds M(i, i - d).
    band_.assign(n_ * (q_ + 1), 0.0);
    for (std::size_t i = 0; i < n_; ++i) band_[i * (q_ + 1)] = 1.0;
    if (n_ > q_) {
      for (std::size_t row = 0; row + q_ < n_; ++row) {
        for (std::size_t a = 0; a <= q_; ++a) {
          for (std::size_t b = 0; b <= a; ++b) {
            band_[(row + a) * (q_ + 1) + (a - b)] += rho * stencil[a] * stencil[b];
          }
        }
      }
    }
    // In-place banded Cholesky.
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t jmin = i >= q_ ? i - q_ : 0;
      for (std::size_t j = jmin; j <= i; ++j) {
        double s = at(i, j);
        const std::size_t kmin = std::max(jmin, j >= q_ ? j - q_ : 0);
        for (std::size_t k = kmin; k < j; ++k) s -= at(i, k) * at(j, k);
        if (i == j) {
          if (!(s > 0.0)) throw NumericalError("banded Cholesky: matrix not positive definite");
          at(i, i) = std::sqrt(s);
        } else {
          at(i, j) = s / at(j, j);
        }
      }
    }
  }

  void solve(std::vector<double>& x) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double s = x[i];
      const std::size_t kmin = i >= q_ ? i - q_ : 0;
      for (std::size_t k = kmin; k < i; ++k) s -= at(i, k) * x[k];
      x[i] = s / at(i, i);
    }
    for (std::size_t i = n_; i-- > 0;) {
      double s = x[i];
      const std::size_t kmax = std::min(n_ - 1, i + q_);
      for (std::size_t k = i + 1; k <= kmax; ++k) s -= at(k, i) * x[k];
      x[i] = s / at(i, i);
    }
  }

 private:
  double& at(std::size_t i, std::size_t j) { return band_[i * (q_ + 1) + (i - j)]; }
  double at(std::size_t i, std::size_t j) const { return band_[i * (q_ + 1) + (i - j)]; }

  std::size_t n_;
  std::size_t q_;
  std::vector<double> band_;
};

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

double trendfilter_objective(std::span<const double> v, std::span<const double> theta,
                             double lambda, int r) {
  double fit = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) fit += 0.5 * (v[i] - theta[i]) * (v[i] - theta[i]);
  double pen = 0.0;
  for (double d : diff_matrix_apply(theta, r)) pen += std::abs(d);
  return fit + lambda * pen;
}

AdmmResult trendfilter_admm(std::span<const double> v, double lambda, int r,
                            const AdmmOptions& opts, const AdmmRequest& req) {
  if (r < 1) throw std::invalid_argument("trendfilter_admm: r must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("trendfilter_admm: lambda must be >= 0");
  const std::size_t n = v.size();
  if (n <= static_cast<std::size_t>(r)) {
    throw std::invalid_argument("trendfilter_admm: need length > r");
  }

  AdmmResult res;
  if (lambda == 0.0) {
    res.theta.assign(v.begin(), v.end());
    res.converged = true;
    return res;
  }

  const bool specialized = req.variant == AdmmVariant::kSpecialized;
  const int q = specialized ? r - 1 : r;
  const double rho = opts.scale_rho ? opts.rho * lambda : opts.rho;
  const auto stencil = diff_stencil(q);
  const BandedSystem system(n, q, rho);
  const std::size_t m = n - static_cast<std::size_t>(q);

  std::vector<double> split(m, 0.0), dual(m, 0.0);
  if (req.warm_start && req.warm_start->split.size() == m && req.warm_start->dual.size() == m) {
    split = req.warm_start->split;
    dual = req.warm_start->dual;
  } else {
    apply_diff(stencil, v, split);
  }

  std::vector<double> theta(n), rhs, dtheta, tmp, split_old;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    // theta-update: (I + rho D^T D) theta = v + rho D^T (split - dual).
    tmp.resize(m);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = split[i] - dual[i];
    apply_diff_transpose(stencil, tmp, n, rhs);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = v[i] + rho * rhs[i];
    system.solve(rhs);
    theta = rhs;

    apply_diff(stencil, theta, dtheta);
    split_old = split;
    for (std::size_t i = 0; i < m; ++i) tmp[i] = dtheta[i] + dual[i];
    if (specialized) {
      split = fused_lasso_1d(tmp, lambda / rho);
    } else {
      const double kappa = lambda / rho;
      for (std::size_t i = 0; i < m; ++i) {
        const double x = tmp[i];
        split[i] = x > kappa ? x - kappa : (x < -kappa ? x + kappa : 0.0);
      }
    }
    for (std::size_t i = 0; i < m; ++i) dual[i] += dtheta[i] - split[i];

    for (std::size_t i = 0; i < m; ++i) tmp[i] = dtheta[i] - split[i];
    const double primal = rms(tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = split[i] - split_old[i];
    std::vector<double> dt;
    apply_diff_transpose(stencil, tmp, n, dt);
    const double dual_res = rho * rms(dt);

    if (req.record_objective) {
      res.objective_trace.push_back(trendfilter_objective(v, theta, lambda, r));
    }
    if (!std::isfinite(primal) || !std::isfinite(dual_res)) {
      throw NumericalError("trendfilter_admm: non-finite residual");
    }
    res.iterations = it;
    res.primal_residual = primal;
    res.dual_residual = dual_res;
    if (primal <= opts.tol_primal && dual_res <= opts.tol_dual) {
      res.converged = true;
      break;
    }
  }
  res.theta = std::move(theta);
  res.split = std::move(split);
  res.dual = std::move(dual);
  return res;
}

std::vector<double> interpolate_linear(std::span<const double> positions,
                                       std::span<const double> values,
                                       std::span<const double> query) {
  if (positions.empty() || positions.size() != values.size()) {
    throw std::invalid_argument("interpolate_linear: bad knot arrays");
  }
  std::vector<double> out(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    const double t = query[q];
    auto it = std::lower_bound(positions.begin(), positions.end(), t);
    if (it == positions.begin()) {
      out[q] = values.front();
    } else if (it == positions.end()) {
      out[q] = values.back();
    } else {
      const auto hi = static_cast<std::size_t>(it - positions.begin());
      const auto lo = hi - 1;
      if (positions[hi] == t) {
        out[q] = values[hi];
      } else {
        const double w = (t - positions[lo]) / (positions[hi] - positions[lo]);
        out[q] = (1.0 - w) * values[lo] + w * values[hi];
      }
    }
  }
  return out;
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, FoldScheme scheme,
                                      std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least 2 folds");
  if (folds > n) throw ConfigError("fold count exceeds number of observations");
  std::vector<std::size_t> label(n);
  switch (scheme) {
    case FoldScheme::kInterleaved:
      for (std::size_t i = 0; i < n; ++i) label[i] = i % folds;
      break;
    case FoldScheme::kContiguous:
      for (std::size_t i = 0; i < n; ++i) label[i] = i * folds / n;
      break;
    case FoldScheme::kRandom: {
      for (std::size_t i = 0; i < n; ++i) label[i] = i % folds;
      std::mt19937_64 rng(seed);
      std::shuffle(label.begin(), label.end(), rng);
      break;
    }
  }
  return label;
}

namespace {

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// Column solver with warm-start state carried between calls.
class ColumnSolver {
 public:
  ColumnSolver(const TrendFilterConfig& cfg, double lambda) : cfg_(cfg), lambda_(lambda) {}

  std::vector<double> solve(std::span<const double> v, ThresholdDiagnostics* diag = nullptr) {
    if (is_constant(v) || v.size() <= static_cast<std::size_t>(cfg_.r)) {
      if (diag) *diag = ThresholdDiagnostics{};
      return {v.begin(), v.end()};
    }
    if (cfg_.r == 1) {
      if (diag) *diag = ThresholdDiagnostics{};
      return fused_lasso_1d(v, lambda_);
    }
    AdmmRequest req;
    req.variant = cfg_.variant;
    const std::size_t q = cfg_.variant == AdmmVariant::kSpecialized
                              ? static_cast<std::size_t>(cfg_.r - 1)
                              : static_cast<std::size_t>(cfg_.r);
    if (state_ && state_->split.size() + q == v.size()) req.warm_start = &*state_;
    auto res = trendfilter_admm(v, lambda_, cfg_.r, cfg_.admm, req);
    if (diag) {
      diag->iterations = res.iterations;
      diag->primal_residual = res.primal_residual;
      diag->dual_residual = res.dual_residual;
      diag->converged = res.converged;
    }
    auto theta = res.theta;
    state_ = std::move(res);
    return theta;
  }

 private:
  const TrendFilterConfig& cfg_;
  double lambda_;
  std::optional<AdmmResult> state_;
};

// Squared held-out error of every column at one lambda, summed.
std::vector<double> cv_errors_per_column(const Matrix& w, const TrendFilterConfig& cfg,
                                         double lambda,
                                         const std::vector<std::size_t>& fold_label) {
  const std::size_t n = w.rows();
  std::vector<double> sse(w.cols(), 0.0);
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (fold_label[i] == f ? test : train).push_back(i);
    if (test.empty() || train.empty()) continue;
    std::vector<double> train_pos(train.begin(), train.end());
    std::vector<double> test_pos(test.begin(), test.end());
    ColumnSolver solver(cfg, lambda);
    std::vector<double> col(train.size());
    for (std::size_t k = 0; k < w.cols(); ++k) {
      for (std::size_t r = 0; r < train.size(); ++r) col[r] = w(train[r], k);
      const auto fitted = solver.solve(col);
      const auto pred = interpolate_linear(train_pos, fitted, test_pos);
      for (std::size_t r = 0; r < test.size(); ++r) {
        const double e = pred[r] - w(test[r], k);
        sse[k] += e * e;
      }
    }
  }
  return sse;
}

// argmin with ties broken toward the larger lambda.
double pick_lambda(const std::vector<double>& grid, const std::vector<double>& err) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (err[j] < err[best] || (err[j] == err[best] && grid[j] > grid[best])) best = j;
  }
  return grid[best];
}

}  // namespace

CvResult cv_select_lambda_pooled(const Matrix& w, const TrendFilterConfig& cfg,
                                 std::uint64_t rng_seed) {
  cfg.validate();
  if (w.rows() < cfg.folds) throw ConfigError("fold count exceeds number of observations");
  const auto labels = assign_folds(w.rows(), cfg.folds, cfg.fold_scheme, rng_seed);
  CvResult out;
  const double denom = static_cast<double>(w.rows() * std::max<std::size_t>(w.cols(), 1));
  for (double lambda : cfg.lambda_grid) {
    const auto sse = cv_errors_per_column(w, cfg, lambda, labels);
    out.cv_error.push_back(std::accumulate(sse.begin(), sse.end(), 0.0) / denom);
  }
  out.lambda = pick_lambda(cfg.lambda_grid, out.cv_error);
  return out;
}

CvResult cv_select_lambda(std::span<const double> w_col, const TrendFilterConfig& cfg,
                          std::uint64_t rng_seed) {
  Matrix w(w_col.size(), 1);
  w.set_column(0, w_col);
  return cv_select_lambda_pooled(w, cfg, rng_seed);
}

TrendFilterFit fit_trendfilter_fixed(const IndicatorMatrix& w, const TrendFilterConfig& cfg,
                                     double lambda) {
  const std::size_t n = w.w.rows();
  if (n <= static_cast<std::size_t>(cfg.r)) throw ConfigError("fit_trendfilter: need n > r");
  TrendFilterFit fit;
  fit.estimate = CdfEstimate{Matrix(n, w.w.cols()), w.grid,
                             {"trendfilter", {{"r", cfg.r}, {"lambda", lambda}}, true}};
  fit.lambda_per_threshold.assign(w.w.cols(), lambda);
  fit.diagnostics.resize(w.w.cols());
  ColumnSolver solver(cfg, lambda);
  for (std::size_t k = 0; k < w.w.cols(); ++k) {
    const auto col = w.w.column(k);
    auto& d = fit.diagnostics[k];
    const auto theta = solver.solve(col, &d);
    d.tv = tv_order_r(theta, cfg.r);
    std::size_t active = 0;
    for (double x : diff_matrix_apply(theta, cfg.r)) active += std::abs(x) > 1e-8 ? 1 : 0;
    d.active_differences = active;
    fit.estimate.f_hat.set_column(k, theta);
  }
  return fit;
}

TrendFilterFit fit_trendfilter(const IndicatorMatrix& w, const TrendFilterConfig& cfg,
                               std::uint64_t rng_seed) {
  cfg.validate();
  const std::size_t n = w.w.rows();
  if (n <= static_cast<std::size_t>(cfg.r)) throw ConfigError("fit_trendfilter: need n > r");

  if (cfg.lambda_mode == LambdaMode::kShared) {
    const auto cv = cv_select_lambda_pooled(w.w, cfg, rng_seed);
    auto fit = fit_trendfilter_fixed(w, cfg, cv.lambda);
    fit.cv_error = cv.cv_error;
    return fit;
  }

  // Per-threshold: CV curve per column, then one solve per column.
  const auto labels = assign_folds(n, cfg.folds, cfg.fold_scheme, rng_seed);
  std::vector<std::vector<double>> err(w.w.cols(), std::vector<double>(cfg.lambda_grid.size()));
  for (std::size_t j = 0; j < cfg.lambda_grid.size(); ++j) {
    const auto sse = cv_errors_per_column(w.w, cfg, cfg.lambda_grid[j], labels);
    for (std::size_t k = 0; k < sse.size(); ++k) err[k][j] = sse[k];
  }
  TrendFilterFit fit;
  fit.estimate = CdfEstimate{Matrix(n, w.w.cols()), w.grid,
                             {"trendfilter", {{"r", cfg.r}, {"per_threshold", 1.0}}, true}};
  fit.diagnostics.resize(w.w.cols());
  for (std::size_t k = 0; k < w.w.cols(); ++k) {
    const double lambda = pick_lambda(cfg.lambda_grid, err[k]);
    fit.lambda_per_threshold.push_back(lambda);
    IndicatorMatrix single{Matrix(n, 1), ThresholdGrid::from_points({w.grid[k]})};
    single.w.set_column(0, w.w.column(k));
    auto one = fit_trendfilter_fixed(single, cfg, lambda);
    fit.estimate.f_hat.set_column(k, one.estimate.f_hat.column(0));
    fit.diagnostics[k] = one.diagnostics[0];
  }
  return fit;
}

CdfEstimate predict_interp(const CdfEstimate& fit, std::span<const double> train_index,
                           std::span<const double> query_index) {
  if (train_index.size() != fit.f_hat.rows()) {
    throw std::invalid_argument("predict_interp: training index length differs from fit rows");
  }
  if (!std::is_sorted(train_index.begin(), train_index.end())) {
    throw std::invalid_argument("predict_interp: training index must be sorted");
  }
  CdfEstimate out{Matrix(query_index.size(), fit.f_hat.cols()), fit.grid, fit.meta};
  for (std::size_t k = 0; k < fit.f_hat.cols(); ++k) {
    const auto col = fit.f_hat.column(k);
    out.f_hat.set_column(k, interpolate_linear(train_index, col, query_index));
  }
  return out;
}

}  // namespace distreg
