#include "distreg/relunet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "distreg/seeding.hpp"

namespace distreg {

void MlpArchitecture::validate() const {
  if (input_dim < 1) throw ConfigError("network input dimension must be >= 1");
  for (auto h : hidden) {
    if (h < 1) throw ConfigError("hidden layer widths must be >= 1");
  }
}

std::vector<std::size_t> MlpArchitecture::widths() const {
  std::vector<std::size_t> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

std::size_t MlpArchitecture::parameter_count() const {
  const auto w = widths();
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) count += w[l + 1] * w[l] + w[l + 1];
  return count;
}

void TrainConfig::validate() const {
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
}

namespace {

struct LayerView {
  std::size_t in;
  std::size_t out;
  std::size_t w_offset;
  std::size_t b_offset;
};

std::vector<LayerView> layer_views(const MlpArchitecture& arch) {
  const auto w = arch.widths();
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    LayerView v{w[l], w[l + 1], offset, offset + w[l + 1] * w[l]};
    offset = v.b_offset + v.out;
    views.push_back(v);
  }
  return views;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_shapes(const MlpArchitecture& arch, const MlpParams& params) {
  if (params.values.size() != arch.parameter_count()) {
    throw std::invalid_argument("network parameters do not match the architecture");
  }
}

// Pre-activations per layer; the input batch is pre[0] conceptually held
// by the caller. pre[l] has shape batch x out_l.
struct Activations {
  std::vector<Matrix> pre;   // z per layer
  std::vector<Matrix> post;  // inputs to each layer: post[0] = x, post[l] = relu(z_{l-1})
};

Activations run_forward(const std::vector<LayerView>& views, const MlpParams& params,
                        const Matrix& x) {
  Activations act;
  act.post.push_back(x);
  const auto& p = params.values;
  for (std::size_t l = 0; l < views.size(); ++l) {
    const auto& v = views[l];
    const Matrix& a = act.post.back();
    Matrix z(a.rows(), v.out);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const auto arow = a.row(i);
      for (std::size_t o = 0; o < v.out; ++o) {
        const double* wrow = p.data() + v.w_offset + o * v.in;
        double s = p[v.b_offset + o];
        for (std::size_t j = 0; j < v.in; ++j) s += wrow[j] * arow[j];
        z(i, o) = s;
      }
    }
    if (l + 1 < views.size()) {
      Matrix h = z;
      for (double& e : h.data()) e = e > 0.0 ? e : 0.0;
      act.post.push_back(std::move(h));
    }
    act.pre.push_back(std::move(z));
  }
  return act;
}

}  // namespace

MlpParams init_params(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  MlpParams params{std::vector<double>(arch.parameter_count(), 0.0)};
  std::mt19937_64 rng(seed);
  for (const auto& v : layer_views(arch)) {
    const double bound = std::sqrt(6.0 / static_cast<double>(v.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < v.in * v.out; ++k) params.values[v.w_offset + k] = dist(rng);
  }
  return params;
}

double forward(const MlpArchitecture& arch, const MlpParams& params, std::span<const double> x) {
  if (x.size() != arch.input_dim) throw std::invalid_argument("forward: input dimension mismatch");
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.row(0).begin());
  return forward_batch(arch, params, m)[0];
}

std::vector<double> forward_batch(const MlpArchitecture& arch, const MlpParams& params,
                                  const Matrix& x) {
  check_shapes(arch, params);
  if (x.rows() > 0 && x.cols() != arch.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  std::vector<double> out(x.rows());
  if (x.rows() == 0) return out;
  const auto act = run_forward(layer_views(arch), params, x);
  const Matrix& z = act.pre.back();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out[i] = arch.output == OutputKind::kSigmoid ? sigmoid(z(i, 0)) : z(i, 0);
  }
  return out;
}

LossGradient backward(const MlpArchitecture& arch, const MlpParams& params, const Matrix& x,
                      std::span<const double> targets, Loss loss) {
  check_shapes(arch, params);
  if (x.rows() == 0) throw std::invalid_argument("backward: empty batch");
  if (x.cols() != arch.input_dim) throw std::invalid_argument("backward: input dimension mismatch");
  if (targets.size() != x.rows()) throw std::invalid_argument("backward: target length mismatch");
  if (loss == Loss::kBce && arch.output != OutputKind::kSigmoid) {
    throw ConfigError("BCE loss requires a sigmoid output");
  }

  const auto views = layer_views(arch);
  const auto act = run_forward(views, params, x);
  for (const Matrix& z : act.pre) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (double v : z.row(i)) {
        if (!std::isfinite(v)) throw NumericalError("backward: non-finite pre-activation");
      }
    }
  }
  const std::size_t batch = x.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);

  LossGradient out;
  out.grad.assign(params.values.size(), 0.0);

  // dL/dz at the output unit, per row.
  Matrix delta(batch, 1);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double z = act.pre.back()(i, 0);
    const double y = targets[i];
    double d;
    if (loss == Loss::kBce) {
      total += softplus(z) - y * z;
      d = sigmoid(z) - y;
    } else if (arch.output == OutputKind::kSigmoid) {
      const double s = sigmoid(z);
      total += (s - y) * (s - y);
      d = 2.0 * (s - y) * s * (1.0 - s);
    } else {
      total += (z - y) * (z - y);
      d = 2.0 * (z - y);
    }
    delta(i, 0) = d * inv_b;
  }
  out.loss = total * inv_b;
  if (!std::isfinite(out.loss)) throw NumericalError("backward: non-finite loss");

  const auto& p = params.values;
  for (std::size_t l = views.size(); l-- > 0;) {
    const auto& v = views[l];
    const Matrix& a = act.post[l];
    for (std::size_t i = 0; i < batch; ++i) {
      const auto arow = a.row(i);
      for (std::size_t o = 0; o < v.out; ++o) {
        const double d = delta(i, o);
        if (d == 0.0) continue;
        double* g = out.grad.data() + v.w_offset + o * v.in;
        for (std::size_t j = 0; j < v.in; ++j) g[j] += d * arow[j];
        out.grad[v.b_offset + o] += d;
      }
    }
    if (l == 0) break;
    // Propagate to the previous layer's pre-activations.
    Matrix prev(batch, v.in, 0.0);
    const Matrix& zprev = act.pre[l - 1];
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t o = 0; o < v.out; ++o) {
        const double d = delta(i, o);
        if (d == 0.0) continue;
        const double* wrow = p.data() + v.w_offset + o * v.in;
        for (std::size_t j = 0; j < v.in; ++j) prev(i, j) += d * wrow[j];
      }
      for (std::size_t j = 0; j < v.in; ++j) {
        if (!(zprev(i, j) > 0.0)) prev(i, j) = 0.0;
      }
    }
    delta = std::move(prev);
  }
  for (double g : out.grad) {
    if (!std::isfinite(g)) throw NumericalError("backward: non-finite gradient");
  }
  return out;
}

namespace {

class Adam {
 public:
  Adam(std::size_t size, const AdamOptions& opts) : opts_(opts), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = opts_.beta1 * m_[k] + (1.0 - opts_.beta1) * grad[k];
      v_[k] = opts_.beta2 * v_[k] + (1.0 - opts_.beta2) * grad[k] * grad[k];
      const double mhat = m_[k] / c1;
      const double vhat = v_[k] / c2;
      params[k] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }

 private:
  AdamOptions opts_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

Matrix standardized(const Matrix& x, const std::vector<double>& mean,
                    const std::vector<double>& scale) {
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale[j];
  }
  return out;
}

// Trains params in place; returns the per-epoch loss curve.
ThresholdTraining train_one(const MlpArchitecture& arch, MlpParams& params, const Matrix& x,
                            std::span<const double> targets, const TrainConfig& cfg,
                            std::uint64_t seed) {
  ThresholdTraining tr;
  Adam adam(params.values.size(), cfg.adam);
  const std::size_t n = x.rows();
  const bool full = cfg.batch == 0 || cfg.batch >= n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  tr.loss_curve.reserve(cfg.epochs);
  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (full) {
        auto g = backward(arch, params, x, targets, cfg.loss);
        adam.step(params.values, g.grad);
        tr.loss_curve.push_back(g.loss);
        continue;
      }
      std::shuffle(order.begin(), order.end(), rng);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < n; start += cfg.batch) {
        const std::size_t stop = std::min(n, start + cfg.batch);
        std::span<const std::size_t> idx(order.data() + start, stop - start);
        const Matrix xb = x.select_rows(idx);
        std::vector<double> yb;
        for (auto i : idx) yb.push_back(targets[i]);
        auto g = backward(arch, params, xb, yb, cfg.loss);
        adam.step(params.values, g.grad);
        epoch_loss += g.loss * static_cast<double>(idx.size());
      }
      tr.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
  } catch (const NumericalError& e) {
    tr.diverged = true;
    tr.diagnostic = e.what();
  }
  for (double v : params.values) {
    if (!std::isfinite(v)) {
      tr.diverged = true;
      if (tr.diagnostic.empty()) tr.diagnostic = "non-finite parameter after training";
      break;
    }
  }
  return tr;
}

}  // namespace

NetFit fit_relu(const Sample& sample, const IndicatorMatrix& w, const MlpArchitecture& arch,
                const TrainConfig& cfg) {
  arch.validate();
  cfg.validate();
  if (!sample.x) throw ConfigError("fit_relu: the sample has no covariates");
  const Matrix& x_raw = *sample.x;
  if (x_raw.cols() != arch.input_dim) throw ConfigError("fit_relu: covariate dimension mismatch");
  if (x_raw.rows() != w.w.rows()) throw ConfigError("fit_relu: indicator rows differ from n");
  if (cfg.loss == Loss::kBce && arch.output != OutputKind::kSigmoid) {
    throw ConfigError("BCE loss requires a sigmoid output");
  }

  NetFit fit;
  fit.arch = arch;
  const std::size_t n = x_raw.rows();
  const std::size_t d = x_raw.cols();
  fit.x_mean.assign(d, 0.0);
  fit.x_scale.assign(d, 1.0);
  if (cfg.standardize) {
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x_raw(i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (x_raw(i, j) - mean) * (x_raw(i, j) - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      fit.x_mean[j] = mean;
      fit.x_scale[j] = sd > 0.0 ? sd : 1.0;
    }
  }
  const Matrix x = standardized(x_raw, fit.x_mean, fit.x_scale);

  fit.estimate = CdfEstimate{Matrix(n, w.w.cols()), w.grid, {"relu", {}, false}};
  fit.estimate.meta.params = {{"epochs", static_cast<double>(cfg.epochs)},
                              {"lr", cfg.adam.lr},
                              {"layers", static_cast<double>(arch.hidden.size())}};

  MlpParams current;
  for (std::size_t k = 0; k < w.w.cols(); ++k) {
    const std::uint64_t seed_k = derive_seed(cfg.seed, k);
    if (k == 0 || !cfg.warm_start || fit.training.back().diverged) {
      current = init_params(arch, seed_k);
    }
    const auto targets = w.w.column(k);
    auto tr = train_one(arch, current, x, targets, cfg, seed_k ^ 0x9e3779b97f4a7c15ULL);

    std::vector<double> fitted;
    if (tr.diverged) {
      const double mean =
          std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
      fitted.assign(n, mean);
    } else {
      fitted = forward_batch(arch, current, x);
      if (arch.output == OutputKind::kLinear) {
        for (double& f : fitted) f = std::clamp(f, 0.0, 1.0);
      }
    }
    fit.estimate.f_hat.set_column(k, fitted);
    fit.params.push_back(current);
    fit.training.push_back(std::move(tr));
  }
  return fit;
}

CdfEstimate predict_relu(const NetFit& fit, const Matrix& x_query) {
  const std::size_t m = fit.params.size();
  CdfEstimate out{Matrix(x_query.rows(), m), fit.estimate.grid, fit.estimate.meta};
  if (x_query.rows() == 0) return out;
  if (x_query.cols() != fit.arch.input_dim) {
    throw std::invalid_argument("predict_relu: covariate dimension mismatch");
  }
  const Matrix x = standardized(x_query, fit.x_mean, fit.x_scale);
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> pred;
    if (fit.training[k].diverged) {
      // Fall back to the constant stored in the training estimate.
      pred.assign(x.rows(), fit.estimate.f_hat.rows() ? fit.estimate.f_hat(0, k) : 0.5);
    } else {
      pred = forward_batch(fit.arch, fit.params[k], x);
      if (fit.arch.output == OutputKind::kLinear) {
        for (double& f : pred) f = std::clamp(f, 0.0, 1.0);
      }
    }
    out.f_hat.set_column(k, pred);
  }
  return out;
}

}  // namespace distreg
