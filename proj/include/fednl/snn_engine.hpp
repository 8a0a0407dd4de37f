// Copyright 2026 The fednl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense leaky integrate-and-fire networks with surrogate-gradient BPTT,
// fire-rate MSE loss, Adam, and flat parameter vectors.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fednl/common.hpp"
#include "fednl/neuro_data.hpp"

namespace fednl::snn {

enum class ResetMode { Hard, Soft };

/// Spiking: Heaviside spikes with reset (training and evaluation).
/// Relaxed: logistic spikes and a smooth subtractive reset; exists so the
/// analytic gradient can be checked against finite differences.
enum class ExecMode { Spiking, Relaxed };

struct LifConfig {
  double leak = 0.5;  // lambda, in (0, 1]
  double threshold = 1.0;
  ResetMode reset = ResetMode::Hard;
  double u_rest = 0.0;
  double surrogate_width = 4.0;

  void validate() const {
    if (!(leak > 0.0 && leak <= 1.0)) throw std::invalid_argument("lif: leak must be in (0, 1]");
    if (!(threshold > 0.0)) throw std::invalid_argument("lif: threshold must be > 0");
    if (!(surrogate_width > 0.0))
      throw std::invalid_argument("lif: surrogate width must be > 0");
  }
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// d/du of logistic(width * (u - threshold)).
inline double surrogate_grad(double u_pre, const LifConfig& cfg) {
  const double s = logistic(cfg.surrogate_width * (u_pre - cfg.threshold));
  return cfg.surrogate_width * s * (1.0 - s);
}

struct LifStep {
  double u_pre = 0.0;  // potential after leak + input, before reset
  double u_new = 0.0;
  double spike = 0.0;
};

inline LifStep lif_step(double u_prev, double weighted_input, const LifConfig& cfg,
                        ExecMode mode) {
  LifStep out;
  out.u_pre = cfg.leak * u_prev + weighted_input;
  if (mode == ExecMode::Relaxed) {
    out.spike = logistic(cfg.surrogate_width * (out.u_pre - cfg.threshold));
    out.u_new = out.u_pre - cfg.threshold * out.spike;
    return out;
  }
  const bool fired = out.u_pre >= cfg.threshold;
  out.spike = fired ? 1.0 : 0.0;
  if (!fired)
    out.u_new = out.u_pre;
  else
    out.u_new = cfg.reset == ResetMode::Hard ? cfg.u_rest : out.u_pre - cfg.threshold;
  return out;
}

/// Row-major real matrix; a dense layer stores weights as in x out.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

class SnnModel {
 public:
  SnnModel() = default;
  SnnModel(std::vector<Matrix> layers, LifConfig lif, int timesteps, int num_classes,
           int neurons_per_class)
      : layers_(std::move(layers)),
        lif_(lif),
        timesteps_(timesteps),
        num_classes_(num_classes),
        neurons_per_class_(neurons_per_class) {
    lif_.validate();
    if (layers_.empty()) throw DimensionError("snn: model needs at least one layer");
    if (timesteps_ < 1) throw std::invalid_argument("snn: timesteps must be >= 1");
    if (num_classes_ < 1 || neurons_per_class_ < 1)
      throw std::invalid_argument("snn: class count and neurons per class must be >= 1");
    for (std::size_t l = 1; l < layers_.size(); ++l)
      if (layers_[l].rows != layers_[l - 1].cols)
        throw DimensionError("snn: layer " + std::to_string(l) + " input width mismatch");
    if (output_width() != static_cast<std::size_t>(num_classes_ * neurons_per_class_))
      throw DimensionError("snn: output width must equal classes * neurons_per_class");
  }

  const std::vector<Matrix>& layers() const noexcept { return layers_; }
  std::vector<Matrix>& layers() noexcept { return layers_; }
  const LifConfig& lif() const noexcept { return lif_; }
  int timesteps() const noexcept { return timesteps_; }
  int num_classes() const noexcept { return num_classes_; }
  int neurons_per_class() const noexcept { return neurons_per_class_; }
  std::size_t input_width() const { return layers_.front().rows; }
  std::size_t output_width() const { return layers_.back().cols; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : layers_) n += w.data.size();
    return n;
  }

  bool same_shape(const SnnModel& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l)
      if (layers_[l].rows != other.layers_[l].rows || layers_[l].cols != other.layers_[l].cols)
        return false;
    return true;
  }

  friend bool operator==(const SnnModel& a, const SnnModel& b) {
    return a.layers_ == b.layers_ && a.timesteps_ == b.timesteps_ &&
           a.num_classes_ == b.num_classes_ && a.neurons_per_class_ == b.neurons_per_class_;
  }

 private:
  std::vector<Matrix> layers_;
  LifConfig lif_;
  int timesteps_ = 1;
  int num_classes_ = 1;
  int neurons_per_class_ = 1;
};

struct ModelSpec {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden;
  int num_classes = 2;
  int neurons_per_class = 4;
  int timesteps = 12;
  LifConfig lif;
  double init_gain = 1.0;  // weights ~ U(-g/sqrt(fan_in), g/sqrt(fan_in))
};

inline SnnModel make_model(const ModelSpec& spec, std::uint64_t seed) {
  std::vector<std::size_t> widths{spec.input_width};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(static_cast<std::size_t>(spec.num_classes * spec.neurons_per_class));
  std::mt19937_64 rng(seed);
  std::vector<Matrix> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] == 0) throw DimensionError("snn: zero layer width");
    Matrix w(widths[l], widths[l + 1]);
    const double bound = spec.init_gain / std::sqrt(static_cast<double>(widths[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : w.data) x = dist(rng);
    layers.push_back(std::move(w));
  }
  return {std::move(layers), spec.lif, spec.timesteps, spec.num_classes, spec.neurons_per_class};
}

struct LayerTrace {
  std::size_t width = 0;
  std::vector<double> u_pre;   // T x width
  std::vector<double> spikes;  // T x width
};

struct ForwardTrace {
  ExecMode mode = ExecMode::Spiking;
  int timesteps = 0;
  std::vector<double> input;  // T x input_width
  std::vector<LayerTrace> layers;
  std::vector<double> rates;   // per output neuron, (1/T) sum_t S(t)
  std::vector<double> scores;  // per class, mean rate of its voting group
};

using Gradients = std::vector<Matrix>;

/// Mean of each consecutive group of `neurons_per_class` rates.
inline std::vector<double> voting_scores(std::span<const double> rates, int neurons_per_class) {
  const auto group = static_cast<std::size_t>(neurons_per_class);
  std::vector<double> scores(rates.size() / group, 0.0);
  for (std::size_t c = 0; c < scores.size(); ++c) {
    double sum = 0.0;
    for (std::size_t k = 0; k < group; ++k) sum += rates[c * group + k];
    scores[c] = sum / static_cast<double>(group);
  }
  return scores;
}

/// Runs the network on a real-valued input sequence (T x input_width,
/// time-major). Membrane potentials start at u_rest.
inline ForwardTrace forward(const SnnModel& model, std::span<const double> input,
                            ExecMode mode) {
  const auto T = static_cast<std::size_t>(model.timesteps());
  if (input.size() != T * model.input_width())
    throw DimensionError("snn forward: input has " + std::to_string(input.size()) +
                         " values, expected " + std::to_string(T * model.input_width()));
  const LifConfig& lif = model.lif();
  ForwardTrace trace;
  trace.mode = mode;
  trace.timesteps = model.timesteps();
  trace.input.assign(input.begin(), input.end());
  std::span<const double> below = trace.input;
  std::vector<double> current;
  for (const Matrix& w : model.layers()) {
    LayerTrace lt;
    lt.width = w.cols;
    lt.u_pre.assign(T * w.cols, 0.0);
    lt.spikes.assign(T * w.cols, 0.0);
    std::vector<double> u(w.cols, lif.u_rest);
    current.assign(w.cols, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      std::fill(current.begin(), current.end(), 0.0);
      for (std::size_t i = 0; i < w.rows; ++i) {
        const double s = below[t * w.rows + i];
        if (s == 0.0) continue;
        const auto wr = w.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) current[j] += s * wr[j];
      }
      for (std::size_t j = 0; j < w.cols; ++j) {
        const LifStep step = lif_step(u[j], current[j], lif, mode);
        u[j] = step.u_new;
        lt.u_pre[t * w.cols + j] = step.u_pre;
        lt.spikes[t * w.cols + j] = step.spike;
      }
    }
    trace.layers.push_back(std::move(lt));
    below = trace.layers.back().spikes;
  }
  const LayerTrace& out = trace.layers.back();
  trace.rates.assign(out.width, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < out.width; ++j) trace.rates[j] += out.spikes[t * out.width + j];
  for (auto& r : trace.rates) r /= static_cast<double>(T);
  trace.scores = voting_scores(trace.rates, model.neurons_per_class());
  return trace;
}

inline std::vector<double> flatten_frames(const data::FrameTensor& x) {
  const auto cells = x.cells();
  return {cells.begin(), cells.end()};
}

inline ForwardTrace forward(const SnnModel& model, const data::FrameTensor& x, ExecMode mode) {
  if (x.frames() != model.timesteps())
    throw DimensionError("snn forward: sample has " + std::to_string(x.frames()) +
                         " frames, model expects " + std::to_string(model.timesteps()));
  if (x.shape().frame_cells() != model.input_width())
    throw DimensionError("snn forward: frame flattens to " +
                         std::to_string(x.shape().frame_cells()) + " inputs, model expects " +
                         std::to_string(model.input_width()));
  return forward(model, flatten_frames(x), mode);
}

/// Index of the highest score; ties go to the lowest class index.
inline int argmax_class(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

inline int predict(const SnnModel& model, const data::FrameTensor& x) {
  return argmax_class(forward(model, x, ExecMode::Spiking).scores);
}

/// (1/C) sum_c (score_c - onehot(label)_c)^2
inline double rate_mse_loss(const ForwardTrace& trace, int label) {
  const auto C = trace.scores.size();
  if (label < 0 || static_cast<std::size_t>(label) >= C)
    throw std::invalid_argument("rate_mse_loss: label out of range");
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double d = trace.scores[c] - (c == static_cast<std::size_t>(label) ? 1.0 : 0.0);
    sum += d * d;
  }
  return sum / static_cast<double>(C);
}

/// Gradient of rate_mse_loss with respect to every weight, summed over
/// timesteps. In Spiking mode dS/du is the logistic surrogate and the reset
/// is detached; in Relaxed mode the gradient is exact.
inline Gradients backward(const SnnModel& model, const ForwardTrace& trace, int label) {
  const auto T = static_cast<std::size_t>(model.timesteps());
  const auto& layers = model.layers();
  if (trace.layers.size() != layers.size() || trace.timesteps != model.timesteps())
    throw DimensionError("snn backward: trace does not match model");
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (trace.layers[l].width != layers[l].cols)
      throw DimensionError("snn backward: trace layer width mismatch");
  const auto C = static_cast<std::size_t>(model.num_classes());
  if (label < 0 || static_cast<std::size_t>(label) >= C)
    throw std::invalid_argument("snn backward: label out of range");

  const LifConfig& lif = model.lif();
  const bool relaxed = trace.mode == ExecMode::Relaxed;
  const auto group = static_cast<std::size_t>(model.neurons_per_class());

  // dL/dS for the output layer, one entry per (t, neuron)
  std::vector<double> grad_spikes(T * layers.back().cols);
  for (std::size_t j = 0; j < layers.back().cols; ++j) {
    const std::size_t c = j / group;
    const double y = c == static_cast<std::size_t>(label) ? 1.0 : 0.0;
    const double g = 2.0 / static_cast<double>(C) * (trace.scores[c] - y) /
                     static_cast<double>(group) / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) grad_spikes[t * layers.back().cols + j] = g;
  }

  Gradients grads;
  grads.reserve(layers.size());
  for (const auto& w : layers) grads.emplace_back(w.rows, w.cols);

  std::vector<double> delta, carry, grad_below;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& w = layers[l];
    const LayerTrace& lt = trace.layers[l];
    const std::span<const double> below =
        l == 0 ? std::span<const double>(trace.input) : std::span<const double>(trace.layers[l - 1].spikes);
    const bool need_below = l > 0;
    if (need_below) grad_below.assign(T * w.rows, 0.0);
    carry.assign(w.cols, 0.0);  // dL/du_t arriving from step t+1
    delta.assign(w.cols, 0.0);
    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t j = 0; j < w.cols; ++j) {
        const double u_pre = lt.u_pre[t * w.cols + j];
        const double sg = surrogate_grad(u_pre, lif);
        double du_dpre = 1.0;
        if (relaxed)
          du_dpre = 1.0 - lif.threshold * sg;
        else if (lif.reset == ResetMode::Hard)
          du_dpre = 1.0 - lt.spikes[t * w.cols + j];
        delta[j] = grad_spikes[t * w.cols + j] * sg + carry[j] * du_dpre;
        carry[j] = lif.leak * delta[j];
      }
      Matrix& gw = grads[l];
      for (std::size_t i = 0; i < w.rows; ++i) {
        const double s = below[t * w.rows + i];
        if (s != 0.0) {
          auto gr = gw.row(i);
          for (std::size_t j = 0; j < w.cols; ++j) gr[j] += s * delta[j];
        }
        if (need_below) {
          const auto wr = w.row(i);
          double acc = 0.0;
          for (std::size_t j = 0; j < w.cols; ++j) acc += wr[j] * delta[j];
          grad_below[t * w.rows + i] = acc;
        }
      }
    }
    if (need_below) grad_spikes.swap(grad_below);
  }
  return grads;
}

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Batch-mean loss and gradient over `batch` in Spiking mode.
inline LossAndGradients batch_gradients(const SnnModel& model,
                                        std::span<const data::Sample> batch) {
  LossAndGradients out;
  for (const auto& w : model.layers()) out.grads.emplace_back(w.rows, w.cols);
  if (batch.empty()) return out;
  for (const auto& s : batch) {
    const ForwardTrace trace = forward(model, s.frames, ExecMode::Spiking);
    out.loss += rate_mse_loss(trace, s.label);
    const Gradients g = backward(model, trace, s.label);
    for (std::size_t l = 0; l < g.size(); ++l)
      for (std::size_t k = 0; k < g[l].data.size(); ++k) out.grads[l].data[k] += g[l].data[k];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& g : out.grads)
    for (auto& x : g.data) x *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates; empty before the first step.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

inline void adam_step(SnnModel& model, const Gradients& grads, const AdamParams& p,
                      AdamState& state) {
  auto& layers = model.layers();
  if (grads.size() != layers.size()) throw DimensionError("adam: gradient layer count mismatch");
  const std::size_t n = model.parameter_count();
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (grads[l].rows != layers[l].rows || grads[l].cols != layers[l].cols)
      throw DimensionError("adam: gradient shape mismatch at layer " + std::to_string(l));
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.step = 0;
  }
  if (state.m.size() != n || state.v.size() != n)
    throw DimensionError("adam: optimizer state does not match model");
  ++state.step;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].data;
    const auto& g = grads[l].data;
    for (std::size_t i = 0; i < w.size(); ++i, ++k) {
      state.m[k] = p.beta1 * state.m[k] + (1.0 - p.beta1) * g[i];
      state.v[k] = p.beta2 * state.v[k] + (1.0 - p.beta2) * g[i] * g[i];
      const double m_hat = state.m[k] / c1;
      const double v_hat = state.v[k] / c2;
      w[i] -= p.lr * m_hat / (std::sqrt(v_hat) + p.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Flat parameter vectors: layer-major, row-major within a layer.

using ParamVector = std::vector<double>;

inline ParamVector params_to_vector(const SnnModel& model) {
  ParamVector out;
  out.reserve(model.parameter_count());
  for (const auto& w : model.layers()) out.insert(out.end(), w.data.begin(), w.data.end());
  return out;
}

/// Copies `params` into a model shaped like `shape`.
inline SnnModel vector_to_params(std::span<const double> params, const SnnModel& shape) {
  if (params.size() != shape.parameter_count())
    throw DimensionError("vector_to_params: got " + std::to_string(params.size()) +
                         " values, model has " + std::to_string(shape.parameter_count()));
  SnnModel out = shape;
  std::size_t k = 0;
  for (auto& w : out.layers())
    for (auto& x : w.data) x = params[k++];
  return out;
}

// ---------------------------------------------------------------------------
// FNLM checkpoint: magic | version u16 | layer count u16 | per layer rows u32,
// cols u32 | f64 weights in canonical order. Little-endian.

inline constexpr std::array<char, 4> kModelMagic{'F', 'N', 'L', 'M'};
inline constexpr std::uint16_t kModelVersion = 1;

inline std::string encode_model(const SnnModel& model) {
  std::string out(kModelMagic.begin(), kModelMagic.end());
  data::detail::put_u16(out, kModelVersion);
  data::detail::put_u16(out, static_cast<std::uint16_t>(model.layers().size()));
  for (const auto& w : model.layers()) {
    data::detail::put_u32(out, static_cast<std::uint32_t>(w.rows));
    data::detail::put_u32(out, static_cast<std::uint32_t>(w.cols));
  }
  for (const auto& w : model.layers())
    for (double x : w.data) {
      std::uint64_t bits = 0;
      static_assert(sizeof(bits) == sizeof(x));
      std::memcpy(&bits, &x, sizeof(x));
      for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
    }
  return out;
}

inline SnnModel decode_model(std::string_view bytes, const LifConfig& lif, int timesteps,
                             int num_classes, int neurons_per_class) {
  data::detail::ByteReader in(bytes, "model");
  const auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), kModelMagic.begin()))
    throw FormatError("model: bad magic");
  if (in.u16() != kModelVersion) throw FormatError("model: unsupported version");
  const std::size_t n_layers = in.u16();
  if (n_layers == 0) throw FormatError("model: no layers");
  std::vector<Matrix> layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t rows = in.u32();
    const std::size_t cols = in.u32();
    layers.emplace_back(rows, cols);
  }
  for (auto& w : layers)
    for (auto& x : w.data) {
      const std::uint64_t bits = in.u64();
      std::memcpy(&x, &bits, sizeof(x));
    }
  if (!in.done()) throw FormatError("model: trailing bytes");
  try {
    return {std::move(layers), lif, timesteps, num_classes, neurons_per_class};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

inline void write_model(const SnnModel& model, const std::string& path) {
  data::detail::spit(path, encode_model(model), "model");
}

inline SnnModel read_model(const std::string& path, const LifConfig& lif, int timesteps,
                           int num_classes, int neurons_per_class) {
  return decode_model(data::detail::slurp(path, "model"), lif, timesteps, num_classes,
                      neurons_per_class);
}

}  // namespace fednl::snn
