#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distreg/core.hpp"

namespace distreg {

// The six simulation designs. Units are indexed i = 1..n in the formulas
// below and stored 0-based.
//
//   S1  y_i ~ Normal(1 - i/n, 1)
//   S2  y_i ~ Unif(a_i, a_i + 1),  a_i = (n - i)/n
//   S3  y_i ~ Exponential with mean 1 + 0.5 sin(2 pi i / n)
//   S4  y_i ~ Gamma(shape 0.7, scale mu_i), mu_i = 6, 2, 8, 4 on the quarters
//   S5  x_i ~ Unif[0,1]^5,  y_i ~ Normal(h5(x_i), 0.5^2)
//   S6  x_i ~ Unif[0,1]^10, y_i ~ ChiSquare(h6(x_i))
enum class ScenarioId { kS1, kS2, kS3, kS4, kS5, kS6 };

// "S1".."S6" (case-insensitive). Throws ConfigError otherwise.
ScenarioId parse_scenario(std::string_view name);
std::string to_string(ScenarioId id);
bool has_covariates(ScenarioId id);
std::size_t covariate_dim(ScenarioId id);

// How "Exp(mu)" in S3 is read.
enum class ExpParam { kMean, kRate };

struct ScenarioSpec {
  ScenarioId id = ScenarioId::kS1;
  std::size_t n = 400;
  std::uint64_t seed = 0;
  ExpParam s3_param = ExpParam::kMean;

  void validate() const;
};

struct ScenarioData {
  Sample sample;
  TrueCdf truth;
};

ScenarioData generate(const ScenarioSpec& spec);

// Location parameter of unit i (0-based) for the index designs S1-S4:
// mean (S1), left end (S2), exponential mean (S3) or gamma scale (S4).
double unit_parameter(ScenarioId id, std::size_t i, std::size_t n);

double s5_location(std::span<const double> x);
double s6_degrees_of_freedom(std::span<const double> x);

struct SplitIndices {
  std::vector<std::size_t> train;  // sorted
  std::vector<std::size_t> test;   // sorted
};

// Uniform random split with floor(train_frac * n) training units.
SplitIndices split(std::size_t n, double train_frac, std::uint64_t seed);

}  // namespace distreg
