#include "distreg/scenarios.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "distreg/special.hpp"

namespace distreg {

ScenarioId parse_scenario(std::string_view name) {
  std::string s(name);
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (s == "S1") return ScenarioId::kS1;
  if (s == "S2") return ScenarioId::kS2;
  if (s == "S3") return ScenarioId::kS3;
  if (s == "S4") return ScenarioId::kS4;
  if (s == "S5") return ScenarioId::kS5;
  if (s == "S6") return ScenarioId::kS6;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

std::string to_string(ScenarioId id) {
  return "S" + std::to_string(static_cast<int>(id) + 1);
}

bool has_covariates(ScenarioId id) { return id == ScenarioId::kS5 || id == ScenarioId::kS6; }

std::size_t covariate_dim(ScenarioId id) {
  switch (id) {
    case ScenarioId::kS5:
      return 5;
    case ScenarioId::kS6:
      return 10;
    default:
      return 0;
  }
}

void ScenarioSpec::validate() const {
  if (n < 8) throw ConfigError("scenario sample size must be >= 8");
}

double unit_parameter(ScenarioId id, std::size_t i0, std::size_t n) {
  const double i = static_cast<double>(i0 + 1);
  const double nn = static_cast<double>(n);
  switch (id) {
    case ScenarioId::kS1:
      return 1.0 - i / nn;
    case ScenarioId::kS2:
      return (nn - i) / nn;
    case ScenarioId::kS3:
      return 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * i / nn);
    case ScenarioId::kS4:
      if (i <= nn / 4.0) return 6.0;
      if (i <= nn / 2.0) return 2.0;
      if (i <= 3.0 * nn / 4.0) return 8.0;
      return 4.0;
    default:
      throw std::invalid_argument("unit_parameter: covariate scenario");
  }
}

double s5_location(std::span<const double> x) {
  return -3.0 * x[0] + 2.0 * std::log(1.0 + x[1]) + x[2] + 5.0 * x[3] + x[4] * x[4];
}

double s6_degrees_of_freedom(std::span<const double> x) {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) s += std::sin(std::numbers::pi * x[j]);
  double lin = 0.0;
  for (int j = 3; j < 9; ++j) lin += x[j];
  return std::log(std::abs(-0.5 * s - 0.5 * lin + 0.5 * std::cos(x[9])) + 2.0);
}

namespace {

constexpr double kS4Shape = 0.7;
constexpr double kS5Scale = 0.5;

}  // namespace

ScenarioData generate(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  std::mt19937_64 rng(spec.seed);
  ScenarioData data;
  data.sample.y.resize(n);
  // Per-unit parameter: location/scale for S1-S5, degrees of freedom for S6.
  auto param = std::make_shared<std::vector<double>>(n);

  const ScenarioId id = spec.id;
  if (has_covariates(id)) {
    const std::size_t d = covariate_dim(id);
    Matrix x(n, d);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = unif(rng);
      if (id == ScenarioId::kS5) {
        (*param)[i] = s5_location(x.row(i));
        std::normal_distribution<double> noise((*param)[i], kS5Scale);
        data.sample.y[i] = noise(rng);
      } else {
        (*param)[i] = s6_degrees_of_freedom(x.row(i));
        std::gamma_distribution<double> chi2((*param)[i] / 2.0, 2.0);
        data.sample.y[i] = chi2(rng);
      }
    }
    data.sample.x = std::move(x);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = unit_parameter(id, i, n);
      double y = 0.0;
      switch (id) {
        case ScenarioId::kS1: {
          std::normal_distribution<double> dist(p, 1.0);
          y = dist(rng);
          break;
        }
        case ScenarioId::kS2: {
          std::uniform_real_distribution<double> dist(p, p + 1.0);
          y = dist(rng);
          break;
        }
        case ScenarioId::kS3: {
          const double rate = spec.s3_param == ExpParam::kMean ? 1.0 / p : p;
          std::exponential_distribution<double> dist(rate);
          y = dist(rng);
          break;
        }
        case ScenarioId::kS4: {
          std::gamma_distribution<double> dist(kS4Shape, p);
          y = dist(rng);
          break;
        }
        default:
          break;
      }
      (*param)[i] = p;
      data.sample.y[i] = y;
    }
  }

  TrueCdf& truth = data.truth;
  truth.n = n;
  const ExpParam s3 = spec.s3_param;
  switch (id) {
    case ScenarioId::kS1:
      truth.cdf = [param](std::size_t i, double t) { return normal_cdf(t - (*param)[i]); };
      truth.support = [param](std::size_t i) {
        return std::pair{(*param)[i] - 9.5, (*param)[i] + 9.5};
      };
      break;
    case ScenarioId::kS2:
      truth.cdf = [param](std::size_t i, double t) {
        return std::clamp(t - (*param)[i], 0.0, 1.0);
      };
      truth.support = [param](std::size_t i) { return std::pair{(*param)[i], (*param)[i] + 1.0}; };
      break;
    case ScenarioId::kS3: {
      auto mean_of = [param, s3](std::size_t i) {
        return s3 == ExpParam::kMean ? (*param)[i] : 1.0 / (*param)[i];
      };
      truth.cdf = [mean_of](std::size_t i, double t) {
        return t <= 0.0 ? 0.0 : -std::expm1(-t / mean_of(i));
      };
      truth.support = [mean_of](std::size_t i) { return std::pair{0.0, 40.0 * mean_of(i)}; };
      break;
    }
    case ScenarioId::kS4:
      truth.cdf = [param](std::size_t i, double t) {
        return gamma_cdf(t, kS4Shape, (*param)[i]);
      };
      truth.support = [param](std::size_t i) { return std::pair{0.0, 45.0 * (*param)[i]}; };
      break;
    case ScenarioId::kS5:
      truth.cdf = [param](std::size_t i, double t) {
        return normal_cdf((t - (*param)[i]) / kS5Scale);
      };
      truth.support = [param](std::size_t i) {
        return std::pair{(*param)[i] - 9.5 * kS5Scale, (*param)[i] + 9.5 * kS5Scale};
      };
      break;
    case ScenarioId::kS6:
      truth.cdf = [param](std::size_t i, double t) { return gamma_cdf(t, (*param)[i] / 2.0, 2.0); };
      truth.support = [](std::size_t) { return std::pair{0.0, 100.0}; };
      break;
  }
  return data;
}

SplitIndices split(std::size_t n, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw ConfigError("split leaves an empty train or test set");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace distreg
