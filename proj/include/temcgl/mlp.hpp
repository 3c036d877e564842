#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/binary_io.hpp"
#include "temcgl/matrix.hpp"
#include "temcgl/rng.hpp"

namespace temcgl {

struct Layer {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feed-forward head: ReLU between layers, identity at the output.
/// Gradients and optimizer moments reuse this type.
struct MlpParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }

  static MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    for (const auto& l : p.layers) z.layers.push_back({Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim(), 0.0)});
    return z;
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("MlpParams: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].bias.size() != layers[i].out_dim()) throw std::invalid_argument("MlpParams: bias size mismatch");
      if (i > 0 && layers[i].in_dim() != layers[i - 1].out_dim()) {
        throw std::invalid_argument("MlpParams: layer " + std::to_string(i) + " does not chain");
      }
    }
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weight.all_finite()) return false;
      for (double b : l.bias) {
        if (!std::isfinite(b)) return false;
      }
    }
    return true;
  }

  /// Visits every scalar parameter in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (auto& l : layers) {
      for (double& w : l.weight.values()) f(w);
      for (double& b : l.bias) f(b);
    }
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& l : layers) {
      for (double w : l.weight.values()) f(w);
      for (double b : l.bias) f(b);
    }
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Uniform fan-in initialization U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
/// `hidden` lists hidden widths; an empty list gives a single linear layer.
inline MlpParams init_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                          std::uint64_t seed) {
  Rng rng = make_rng(seed, "mlp.init");
  MlpParams p;
  std::size_t in = input_dim;
  std::vector<std::size_t> widths(hidden.begin(), hidden.end());
  widths.push_back(output_dim);
  for (std::size_t out : widths) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer l{Matrix(out, in), std::vector<double>(out)};
    for (double& w : l.weight.values()) w = u(rng);
    for (double& b : l.bias) b = u(rng);
    p.layers.push_back(std::move(l));
    in = out;
  }
  return p;
}

namespace detail {

/// Forward pass of one input; keeps every layer's post-activation output.
inline std::vector<std::vector<double>> forward_trace(const MlpParams& p, std::span<const double> x) {
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const Layer& l = p.layers[li];
    const auto& in = acts.back();
    std::vector<double> out(l.out_dim());
    for (std::size_t r = 0; r < l.out_dim(); ++r) {
      auto w = l.weight.row(r);
      double acc = l.bias[r];
      for (std::size_t c = 0; c < in.size(); ++c) acc += w[c] * in[c];
      out[r] = (li + 1 < p.layers.size()) ? std::max(acc, 0.0) : acc;
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

}  // namespace detail

/// Logits for each input row (rows x output_dim).
inline Matrix forward(const MlpParams& p, const Matrix& inputs) {
  if (inputs.cols() != p.input_dim()) {
    throw std::invalid_argument("forward: input dim " + std::to_string(inputs.cols()) + " != model input dim " +
                                std::to_string(p.input_dim()));
  }
  Matrix out(inputs.rows(), p.output_dim());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    auto acts = detail::forward_trace(p, inputs.row(i));
    std::copy(acts.back().begin(), acts.back().end(), out.row(i).begin());
  }
  return out;
}

/// Penultimate-layer activations (the input itself for a single-layer head).
inline Matrix hidden_representation(const MlpParams& p, const Matrix& inputs) {
  const std::size_t idx = p.layers.size() - 1;
  const std::size_t d = idx == 0 ? p.input_dim() : p.layers[idx - 1].out_dim();
  Matrix out(inputs.rows(), d);
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    auto acts = detail::forward_trace(p, inputs.row(i));
    std::copy(acts[idx].begin(), acts[idx].end(), out.row(i).begin());
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) s += (p[k] = std::exp(z[k] - m));
  for (double& x : p) x /= s;
  return p;
}

struct LossConfig {
  double lambda = 1.0;
  bool class_balance = true;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Rows of `inputs` with their labels and positive loss weights.
struct WeightedBatch {
  Matrix inputs;
  std::vector<ClassId> labels;
  std::vector<double> weights;

  std::size_t size() const { return labels.size(); }
};

struct LossAndGrad {
  double loss = 0.0;
  MlpParams grad;
};

/// Weighted mean softmax cross-entropy, sum_i w_i CE_i / sum_i w_i, and its
/// exact gradient. Items are reduced in a canonical order (label, weight,
/// input bits) so the result does not depend on batch order.
inline LossAndGrad loss_and_grad(const MlpParams& p, const WeightedBatch& batch) {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (batch.inputs.rows() != n || batch.weights.size() != n) {
    throw std::invalid_argument("loss_and_grad: batch arrays disagree in length");
  }
  if (batch.inputs.cols() != p.input_dim()) throw std::invalid_argument("loss_and_grad: input dim mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(batch.weights[i] > 0.0)) throw std::invalid_argument("loss_and_grad: weights must be > 0");
    if (batch.labels[i] >= p.output_dim()) throw std::invalid_argument("loss_and_grad: label out of range");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (batch.labels[a] != batch.labels[b]) return batch.labels[a] < batch.labels[b];
    if (batch.weights[a] != batch.weights[b]) return batch.weights[a] < batch.weights[b];
    auto ra = batch.inputs.row(a), rb = batch.inputs.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });

  double total_w = 0.0;
  for (std::size_t i : order) total_w += batch.weights[i];

  LossAndGrad out{0.0, MlpParams::zeros_like(p)};
  const std::size_t nl = p.layers.size();
  for (std::size_t i : order) {
    const double scale = batch.weights[i] / total_w;
    auto acts = detail::forward_trace(p, batch.inputs.row(i));
    const auto& logits = acts.back();
    const ClassId y = batch.labels[i];
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double z : logits) s += std::exp(z - m);
    const double log_z = m + std::log(s);
    out.loss += scale * (log_z - logits[y]);

    std::vector<double> delta(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      delta[k] = scale * (std::exp(logits[k] - log_z) - (k == y ? 1.0 : 0.0));
    }
    for (std::size_t li = nl; li-- > 0;) {
      const Layer& l = p.layers[li];
      Layer& g = out.grad.layers[li];
      const auto& in = acts[li];
      for (std::size_t r = 0; r < l.out_dim(); ++r) {
        if (delta[r] == 0.0) continue;
        auto gw = g.weight.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) gw[c] += delta[r] * in[c];
        g.bias[r] += delta[r];
      }
      if (li == 0) break;
      std::vector<double> prev(l.in_dim(), 0.0);
      for (std::size_t r = 0; r < l.out_dim(); ++r) {
        if (delta[r] == 0.0) continue;
        auto w = l.weight.row(r);
        for (std::size_t c = 0; c < prev.size(); ++c) prev[c] += w[c] * delta[r];
      }
      for (std::size_t c = 0; c < prev.size(); ++c) {
        if (in[c] <= 0.0) prev[c] = 0.0;  // ReLU gate
      }
      delta = std::move(prev);
    }
  }
  return out;
}

/// Weight N_total / (C_present * N_c) for an item of class c, so every
/// present class carries the same total weight.
inline std::vector<double> class_balance_weights(std::span<const ClassId> labels) {
  if (labels.empty()) return {};
  std::map<ClassId, std::size_t> counts;
  for (ClassId y : labels) ++counts[y];
  const double total = static_cast<double>(labels.size());
  const double present = static_cast<double>(counts.size());
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    w[i] = total / (present * static_cast<double>(counts[labels[i]]));
  }
  return w;
}

// Optimizer ----------------------------------------------------------------------

enum class OptimizerKind : std::uint8_t { kSgd, kAdam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }
inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  MlpParams first_moment;
  MlpParams second_moment;
  std::uint64_t steps = 0;

  static OptimizerState make(OptimizerKind kind, double step_size, const MlpParams& like) {
    OptimizerState s;
    s.kind = kind;
    s.step_size = step_size;
    s.first_moment = MlpParams::zeros_like(like);
    s.second_moment = MlpParams::zeros_like(like);
    return s;
  }
};

inline void optimizer_step(OptimizerState& state, MlpParams& params, const MlpParams& grad) {
  std::vector<double*> p, m, v;
  std::vector<double> g;
  params.for_each([&](double& x) { p.push_back(&x); });
  grad.for_each([&](double x) { g.push_back(x); });
  if (p.size() != g.size()) throw std::invalid_argument("optimizer_step: gradient shape mismatch");
  ++state.steps;
  if (state.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < p.size(); ++i) *p[i] -= state.step_size * g[i];
    return;
  }
  state.first_moment.for_each([&](double& x) { m.push_back(&x); });
  state.second_moment.for_each([&](double& x) { v.push_back(&x); });
  if (m.size() != p.size() || v.size() != p.size()) throw std::invalid_argument("optimizer_step: moment shape mismatch");
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    *m[i] = state.beta1 * *m[i] + (1.0 - state.beta1) * gi;
    *v[i] = state.beta2 * *v[i] + (1.0 - state.beta2) * gi * gi;
    const double mhat = *m[i] / c1;
    const double vhat = *v[i] / c2;
    *p[i] -= state.step_size * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

// Checkpoint ---------------------------------------------------------------------

inline constexpr char kModelMagic[4] = {'T', 'E', 'M', 'P'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Layout (little-endian): magic "TEMP", u32 version, u64 layer count, then per
/// layer u64 in, u64 out, out*in f64 weights (row-major), out f64 biases.
inline void save_model(const MlpParams& p, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.bytes(kModelMagic, 4);
  w.u32(kModelFormatVersion);
  w.u64(p.layers.size());
  for (const auto& l : p.layers) {
    w.u64(l.in_dim());
    w.u64(l.out_dim());
    for (double x : l.weight.values()) w.f64(x);
    for (double x : l.bias) w.f64(x);
  }
  w.finish();
}

inline MlpParams load_model(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kModelMagic);
  if (r.u32() != kModelFormatVersion) throw std::runtime_error("model checkpoint: unsupported version");
  MlpParams p;
  const std::size_t nl = r.u64();
  for (std::size_t i = 0; i < nl; ++i) {
    const std::size_t in = r.u64();
    const std::size_t out = r.u64();
    Layer l{Matrix(out, in), std::vector<double>(out)};
    for (double& x : l.weight.values()) x = r.f64();
    for (double& x : l.bias) x = r.f64();
    p.layers.push_back(std::move(l));
  }
  r.expect_end();
  p.validate();
  return p;
}

}  // namespace temcgl
