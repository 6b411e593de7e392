#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "distreg/core.hpp"

namespace distreg {

// Penalized trend filtering per threshold:
//
//   minimize_theta  1/2 ||w(t) - theta||^2 + lambda * ||D^(r) theta||_1
//
// lambda here is the solver-scale tuning parameter; a TV^(r) budget maps to
// it through lambda_solver = lambda_tv * n^(r-1).

struct AdmmOptions {
  double rho = 1.0;
  // Use rho * lambda as the augmented-Lagrangian parameter, which keeps the
  // iteration count roughly independent of lambda.
  bool scale_rho = true;
  std::size_t max_iter = 5000;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
};

enum class AdmmVariant {
  // z = D^(r) theta split with soft-thresholding.
  kStandard,
  // alpha = D^(r-1) theta split with an exact 1-d fused lasso step
  // (Ramdas & Tibshirani). Much faster for r >= 2.
  kSpecialized,
};

enum class FoldScheme { kInterleaved, kContiguous, kRandom };
enum class LambdaMode { kShared, kPerThreshold };

struct TrendFilterConfig {
  int r = 1;
  std::vector<double> lambda_grid = default_lambda_grid();
  AdmmOptions admm;
  AdmmVariant variant = AdmmVariant::kSpecialized;
  std::size_t folds = 5;
  FoldScheme fold_scheme = FoldScheme::kInterleaved;
  LambdaMode lambda_mode = LambdaMode::kShared;

  // Throws ConfigError on an empty/non-positive lambda grid, r < 1, folds < 2
  // or tolerances outside (0, 1e-2].
  void validate() const;

  // 10^-1 ... 10^4, four points per decade.
  static std::vector<double> default_lambda_grid();
};

// Exact minimizer of 1/2||v - theta||^2 + lambda ||D^(1) theta||_1 by the
// linear-time dynamic program of Johnson (2013).
std::vector<double> fused_lasso_1d(std::span<const double> v, double lambda);

struct AdmmResult {
  std::vector<double> theta;
  // Split variable (z for kStandard, alpha for kSpecialized) and scaled
  // dual; kept so that a later solve can warm start.
  std::vector<double> split;
  std::vector<double> dual;
  std::size_t iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
  // Objective per iteration, only filled when requested.
  std::vector<double> objective_trace;
};

struct AdmmRequest {
  AdmmVariant variant = AdmmVariant::kSpecialized;
  const AdmmResult* warm_start = nullptr;
  bool record_objective = false;
};

// Approximate minimizer of 1/2||v - theta||^2 + lambda ||D^(r) theta||_1.
// Stops once the RMS primal and dual residuals are both below tolerance;
// otherwise returns after max_iter with converged = false.
AdmmResult trendfilter_admm(std::span<const double> v, double lambda, int r,
                            const AdmmOptions& opts, const AdmmRequest& req = {});

// Objective 1/2||v - theta||^2 + lambda ||D^(r) theta||_1.
double trendfilter_objective(std::span<const double> v, std::span<const double> theta,
                             double lambda, int r);

// Linear interpolation of values known at sorted positions; flat beyond the
// ends.
std::vector<double> interpolate_linear(std::span<const double> positions,
                                       std::span<const double> values,
                                       std::span<const double> query);

// Fold label per index in [0, folds).
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, FoldScheme scheme,
                                      std::uint64_t seed);

struct CvResult {
  double lambda = 0.0;
  // Mean held-out squared error per lambda_grid entry.
  std::vector<double> cv_error;
};

CvResult cv_select_lambda(std::span<const double> w_col, const TrendFilterConfig& cfg,
                          std::uint64_t rng_seed);

// CV error pooled over every column of w.
CvResult cv_select_lambda_pooled(const Matrix& w, const TrendFilterConfig& cfg,
                                 std::uint64_t rng_seed);

struct ThresholdDiagnostics {
  std::size_t iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = true;
  // TV^(r) of the fitted column and number of nonzero r-th differences.
  double tv = 0.0;
  std::size_t active_differences = 0;
};

struct TrendFilterFit {
  CdfEstimate estimate;
  std::vector<double> lambda_per_threshold;
  std::vector<ThresholdDiagnostics> diagnostics;
  // Pooled CV curve in shared mode; empty in per-threshold mode.
  std::vector<double> cv_error;
};

TrendFilterFit fit_trendfilter(const IndicatorMatrix& w, const TrendFilterConfig& cfg,
                               std::uint64_t rng_seed);

// Solves every column of w at a fixed lambda (no CV).
TrendFilterFit fit_trendfilter_fixed(const IndicatorMatrix& w, const TrendFilterConfig& cfg,
                                     double lambda);

// Predicts unseen positions by linear interpolation of the fitted rows.
CdfEstimate predict_interp(const CdfEstimate& fit, std::span<const double> train_index,
                           std::span<const double> query_index);

}  // namespace distreg
