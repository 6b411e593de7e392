#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distreg/core.hpp"

namespace distreg {

enum class OutputKind {
  // sigma(z); predictions always in (0, 1).
  kSigmoid,
  // z during training, clipped to [0, 1] when predicting.
  kLinear,
};

enum class Loss { kBce, kSquared };

// Dense ReLU network R^{d0} -> R: hidden layers of the given widths with
// ReLU activations, then one output unit.
struct MlpArchitecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden = {64, 64};
  OutputKind output = OutputKind::kSigmoid;

  void validate() const;
  std::size_t parameter_count() const;
  // Widths including input and output: {d0, h1, ..., hL, 1}.
  std::vector<std::size_t> widths() const;
};

// Flat parameter vector. Layer l stores its weight matrix (out x in,
// row-major) followed by its bias vector.
struct MlpParams {
  std::vector<double> values;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  AdamOptions adam;
  std::size_t epochs = 1000;
  // 0 means full batch.
  std::size_t batch = 0;
  Loss loss = Loss::kBce;
  std::uint64_t seed = 0;
  // Start threshold k from the parameters trained for threshold k-1.
  bool warm_start = true;
  // Center/scale covariates with training means and standard deviations.
  bool standardize = true;

  void validate() const;
};

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
MlpParams init_params(const MlpArchitecture& arch, std::uint64_t seed);

double forward(const MlpArchitecture& arch, const MlpParams& params, std::span<const double> x);

// Forward pass for every row of x.
std::vector<double> forward_batch(const MlpArchitecture& arch, const MlpParams& params,
                                  const Matrix& x);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean loss over the batch and its exact gradient. ReLU'(0) = 0. Throws
// NumericalError when an intermediate value is non-finite.
LossGradient backward(const MlpArchitecture& arch, const MlpParams& params, const Matrix& x,
                      std::span<const double> targets, Loss loss);

struct ThresholdTraining {
  std::vector<double> loss_curve;  // mean loss per epoch
  bool diverged = false;
  std::string diagnostic;
};

struct NetFit {
  MlpArchitecture arch;
  std::vector<MlpParams> params;  // one per threshold
  std::vector<double> x_mean;
  std::vector<double> x_scale;
  CdfEstimate estimate;  // fitted values on the training covariates
  std::vector<ThresholdTraining> training;
};

// Trains one network per threshold on (x_i, w[i][k]) in grid order.
// A threshold whose loss turns non-finite is marked diverged and predicts
// the training mean of its column.
NetFit fit_relu(const Sample& sample, const IndicatorMatrix& w, const MlpArchitecture& arch,
                const TrainConfig& cfg);

CdfEstimate predict_relu(const NetFit& fit, const Matrix& x_query);

}  // namespace distreg
