#pragma once

namespace distreg {

// Standard normal CDF.
double normal_cdf(double z);

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a), a > 0.
// Series for x < a + 1, Lentz continued fraction for the complement
// otherwise; relative accuracy around 1e-14.
double gamma_p(double a, double x);

// CDF of Gamma(shape, scale) at t.
double gamma_cdf(double t, double shape, double scale);

}  // namespace distreg
