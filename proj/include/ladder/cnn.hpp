#ifndef LADDER_CNN_HPP_
#define LADDER_CNN_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "ladder/ladder.hpp"
#include "ladder/layers.hpp"
#include "ladder/tensor.hpp"

namespace ladder {

/// Temporal convolution over [batch x channels x frames] with same padding
/// and ReLU activation.
template <typename Real>
struct Conv1dLayer {
  Tensor<Real> weight;  // [filters x in_channels x kernel]
  Tensor<Real> bias;    // [filters]

  struct Cache {
    Tensor<Real> input;
    ReluCache<Real> relu;
    bool valid = false;
  };

  static Conv1dLayer glorot(std::size_t in_channels, std::size_t filters, std::size_t kernel,
                            RngStream& rng) {
    if (kernel < 1) throw ParameterError("conv kernel must be >= 1");
    const double fan = static_cast<double>(in_channels * kernel + filters * kernel);
    const double bound = std::sqrt(6.0 / fan);
    Conv1dLayer layer;
    layer.weight = sample_uniform<Real>({filters, in_channels, kernel}, -bound, bound, rng);
    layer.bias = Tensor<Real>::zeros({filters});
    return layer;
  }

  Conv1dLayer zeros_like() const {
    return {Tensor<Real>::zeros(weight.shape), Tensor<Real>::zeros(bias.shape)};
  }

  std::size_t in_channels() const { return weight.shape[1]; }
  std::size_t filters() const { return weight.shape[0]; }
  std::size_t kernel() const { return weight.shape[2]; }

  // The convolution runs as a per-sample patch-matrix product: rows of P are
  // the kernel windows (zero padded), columns of W stay in their row-major
  // [filters x channels*kernel] layout, pre = P * W^T.

  Tensor<Real> im2col(const Tensor<Real>& x, std::size_t sample) const {
    const std::size_t c_in = x.shape[1], frames = x.shape[2], k = kernel();
    const std::size_t pad_left = (k - 1) / 2;
    Tensor<Real> patches = Tensor<Real>::zeros({frames, c_in * k});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t c = 0; c < c_in; ++c)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t s =
              static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(pad_left);
          if (s < 0 || s >= static_cast<std::ptrdiff_t>(frames)) continue;
          patches(t, c * k + kk) = x(sample, c, static_cast<std::size_t>(s));
        }
    return patches;
  }

  Tensor<Real> forward(const Tensor<Real>& x, Cache* cache = nullptr) const {
    x.require_rank(3);
    if (x.shape[1] != in_channels())
      throw DimensionError("conv input has " + std::to_string(x.shape[1]) +
                           " channels, layer expects " + std::to_string(in_channels()));
    const std::size_t n = x.shape[0], c_in = x.shape[1], frames = x.shape[2];
    const std::size_t f = filters(), k = kernel();
    Tensor<Real> pre = Tensor<Real>::zeros({n, f, frames});
    Tensor<Real> w_flat = weight;
    w_flat.shape = {f, c_in * k};
    for (std::size_t i = 0; i < n; ++i) {
      Tensor<Real> patches = im2col(x, i);
      Tensor<Real> y = matmul_nt(patches, w_flat);  // [frames x filters]
      for (std::size_t o = 0; o < f; ++o)
        for (std::size_t t = 0; t < frames; ++t) pre(i, o, t) = y(t, o) + bias(o);
    }
    Tensor<Real> out = relu_forward(pre, cache ? &cache->relu : nullptr);
    if (cache) {
      cache->input = x;
      cache->valid = true;
    }
    return out;
  }

  Tensor<Real> backward(const Tensor<Real>& grad_out, const Cache& cache,
                        Conv1dLayer& grad) const {
    if (!cache.valid) throw StateError("conv backward requires a cached forward pass");
    Tensor<Real> dpre = relu_backward(grad_out, cache.relu);
    const Tensor<Real>& x = cache.input;
    const std::size_t n = x.shape[0], c_in = x.shape[1], frames = x.shape[2];
    const std::size_t f = filters(), k = kernel();
    const std::size_t pad_left = (k - 1) / 2;
    Tensor<Real> w_flat = weight;
    w_flat.shape = {f, c_in * k};
    Tensor<Real> dx = Tensor<Real>::zeros(x.shape);
    for (std::size_t i = 0; i < n; ++i) {
      Tensor<Real> dpre_i = Tensor<Real>::zeros({frames, f});
      for (std::size_t o = 0; o < f; ++o)
        for (std::size_t t = 0; t < frames; ++t) {
          dpre_i(t, o) = dpre(i, o, t);
          grad.bias(o) += dpre(i, o, t);
        }
      Tensor<Real> patches = im2col(x, i);
      Tensor<Real> dw = matmul_tn(dpre_i, patches);  // [filters x channels*kernel]
      for (std::size_t j = 0; j < dw.size(); ++j) grad.weight.data[j] += dw.data[j];
      Tensor<Real> dpatches = matmul(dpre_i, w_flat);  // [frames x channels*kernel]
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t kk = 0; kk < k; ++kk) {
            const std::ptrdiff_t s =
                static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(pad_left);
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(frames)) continue;
            dx(i, c, static_cast<std::size_t>(s)) += dpatches(t, c * k + kk);
          }
    }
    return dx;
  }
};

template <typename Real>
struct MaxPoolCache {
  std::vector<std::size_t> argmax;  // flat input index per output element
  std::vector<std::size_t> in_shape;
  bool valid = false;
};

/// Non-overlapping temporal max pooling with floor division; ties go to the
/// first index, and the tail beyond out_frames*ps is dropped.
template <typename Real>
Tensor<Real> maxpool1d_forward(std::size_t ps, const Tensor<Real>& x,
                               MaxPoolCache<Real>* cache = nullptr) {
  x.require_rank(3);
  if (ps < 1) throw ParameterError("pool size must be >= 1");
  const std::size_t n = x.shape[0], c = x.shape[1], frames = x.shape[2];
  const std::size_t out_frames = frames / ps;
  if (out_frames == 0) throw DimensionError("pool size exceeds the temporal length");
  Tensor<Real> out = Tensor<Real>::zeros({n, c, out_frames});
  std::vector<std::size_t> argmax(n * c * out_frames);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < out_frames; ++j) {
        std::size_t best = j * ps;
        Real best_v = x(i, ch, best);
        for (std::size_t t = j * ps + 1; t < (j + 1) * ps; ++t)
          if (x(i, ch, t) > best_v) {
            best_v = x(i, ch, t);
            best = t;
          }
        out(i, ch, j) = best_v;
        argmax[(i * c + ch) * out_frames + j] = (i * c + ch) * frames + best;
      }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->in_shape = x.shape;
    cache->valid = true;
  }
  return out;
}

template <typename Real>
Tensor<Real> maxpool1d_backward(const Tensor<Real>& grad_out, const MaxPoolCache<Real>& cache) {
  if (!cache.valid) throw StateError("maxpool backward requires a cached forward pass");
  Tensor<Real> dx = Tensor<Real>::zeros(cache.in_shape);
  for (std::size_t idx = 0; idx < grad_out.size(); ++idx)
    dx.data[cache.argmax[idx]] += grad_out.data[idx];
  return dx;
}

struct ConvBlockSpec {
  std::size_t filters = 0;
  std::size_t kernel = 1;
  std::size_t pool = 1;
};

/// Frame-level architecture: conv/pool blocks over time, flatten, then a
/// two-layer ladder whose reconstructions cover only the fully connected
/// levels (the tau restriction). Noise enters at the flatten boundary and
/// above; the convolutional stack stays clean.
template <typename Real>
struct CnnConfig {
  std::size_t input_channels = 65;
  std::size_t frames = 1000;
  std::vector<ConvBlockSpec> blocks = {{64, 8, 2}, {64, 8, 2}, {128, 8, 2}, {128, 8, 2}};
  std::vector<std::size_t> fc_widths = {256, 256};
  std::size_t head_count = 1;
  Real noise_sigma = Real(0);
  std::vector<Real> fc_lambda = {Real(1), Real(1)};  // one weight per fc level
  CombinatorKind combinator_kind = CombinatorKind::PerUnitMlp;
  std::size_t combinator_hidden = 4;
  Real bn_epsilon = Real(1e-5);
  Real bn_momentum = Real(0.99);

  std::vector<std::size_t> temporal_lengths() const {
    std::vector<std::size_t> lengths;
    std::size_t t = frames;
    for (const auto& b : blocks) {
      if (b.pool < 1 || b.kernel < 1) throw ParameterError("conv block kernel/pool must be >= 1");
      t = t / b.pool;
      if (t == 0) throw ParameterError("conv stack exhausts the temporal axis");
      lengths.push_back(t);
    }
    return lengths;
  }

  std::size_t flatten_width() const {
    if (blocks.empty()) throw ParameterError("cnn config needs at least one conv block");
    return blocks.back().filters * temporal_lengths().back();
  }

  LadderConfig<Real> ladder_config() const {
    if (fc_widths.size() != fc_lambda.size())
      throw ParameterError("fc_lambda must have one entry per fully connected layer");
    LadderConfig<Real> cfg;
    cfg.input_width = flatten_width();
    cfg.hidden_widths = fc_widths;
    cfg.head_count = head_count;
    cfg.noise_sigma = noise_sigma;
    cfg.lambda.assign(1, Real(0));  // no reconstruction at the flatten level
    cfg.lambda.insert(cfg.lambda.end(), fc_lambda.begin(), fc_lambda.end());
    cfg.reconstruct_input = false;
    cfg.dropout_rates.assign(fc_widths.size(), Real(0));
    cfg.combinator_kind = combinator_kind;
    cfg.combinator_hidden = combinator_hidden;
    cfg.bn_epsilon = bn_epsilon;
    cfg.bn_momentum = bn_momentum;
    return cfg;
  }
};

template <typename Real>
struct CnnModel {
  CnnConfig<Real> config;
  std::vector<Conv1dLayer<Real>> blocks;
  LadderModel<Real> top;

  static CnnModel init(const CnnConfig<Real>& config, RngStream& rng) {
    CnnModel m;
    m.config = config;
    std::size_t channels = config.input_channels;
    for (const auto& spec : config.blocks) {
      m.blocks.push_back(Conv1dLayer<Real>::glorot(channels, spec.filters, spec.kernel, rng));
      channels = spec.filters;
    }
    m.top = LadderModel<Real>::init(config.ladder_config(), rng);
    return m;
  }

  CnnModel zeros_like() const {
    CnnModel m;
    m.config = config;
    for (const auto& b : blocks) m.blocks.push_back(b.zeros_like());
    m.top = top.zeros_like();
    return m;
  }

  std::vector<ParamRef<Real>> parameters() {
    std::vector<ParamRef<Real>> out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::string tag = std::to_string(b + 1);
      out.push_back({"conv" + tag + ".weight", &blocks[b].weight});
      out.push_back({"conv" + tag + ".bias", &blocks[b].bias});
    }
    for (auto& p : top.parameters()) out.push_back(p);
    return out;
  }

  std::vector<ParamRef<Real>> state_tensors() {
    std::vector<ParamRef<Real>> out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const std::string tag = std::to_string(b + 1);
      out.push_back({"conv" + tag + ".weight", &blocks[b].weight});
      out.push_back({"conv" + tag + ".bias", &blocks[b].bias});
    }
    for (auto& p : top.state_tensors()) out.push_back(p);
    return out;
  }
};

template <typename Real>
struct ConvStackCaches {
  std::vector<typename Conv1dLayer<Real>::Cache> conv;
  std::vector<MaxPoolCache<Real>> pool;
};

template <typename Real>
Tensor<Real> flatten_frames(const Tensor<Real>& x) {
  x.require_rank(3);
  Tensor<Real> out = x;
  out.shape = {x.shape[0], x.shape[1] * x.shape[2]};
  return out;
}

template <typename Real>
Tensor<Real> unflatten_frames(const Tensor<Real>& x, std::size_t channels, std::size_t frames) {
  x.require_rank(2);
  if (x.shape[1] != channels * frames) throw DimensionError("unflatten width mismatch");
  Tensor<Real> out = x;
  out.shape = {x.shape[0], channels, frames};
  return out;
}

/// Runs the convolutional stack; returns the flattened representation.
template <typename Real>
Tensor<Real> conv_stack_forward(const CnnModel<Real>& model, const Tensor<Real>& x,
                                ConvStackCaches<Real>* caches = nullptr) {
  x.require_rank(3);
  if (x.shape[1] != model.config.input_channels || x.shape[2] != model.config.frames)
    throw DimensionError("cnn input must be [batch x " +
                         std::to_string(model.config.input_channels) + " x " +
                         std::to_string(model.config.frames) + "], got " + x.shape_str());
  if (caches) {
    caches->conv.resize(model.blocks.size());
    caches->pool.resize(model.blocks.size());
  }
  Tensor<Real> cur = x;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    cur = model.blocks[b].forward(cur, caches ? &caches->conv[b] : nullptr);
    cur = maxpool1d_forward(model.config.blocks[b].pool, cur, caches ? &caches->pool[b] : nullptr);
  }
  return flatten_frames(cur);
}

template <typename Real>
struct CnnEncodeResult {
  Tensor<Real> head_out;
  std::vector<Tensor<Real>> fc_activations;  // clean pre-activations z[1..]
  Tensor<Real> flattened;
};

/// Clean inference path of the CNN model.
template <typename Real>
CnnEncodeResult<Real> cnn_encode(CnnModel<Real>& model, const Tensor<Real>& x, Mode mode,
                                 bool update_running = false) {
  CnnEncodeResult<Real> result;
  result.flattened = conv_stack_forward(model, x);
  CleanPass<Real> clean = clean_encode(model.top, result.flattened, mode, update_running);
  result.head_out = clean.head_out;
  for (std::size_t l = 1; l < clean.z.size(); ++l) result.fc_activations.push_back(clean.z[l]);
  return result;
}

template <typename Real>
struct CnnCostResult {
  Real cost = Real(0);
  Real supervised = Real(0);
  Real reconstruction = Real(0);
  CnnModel<Real> grads;
};

namespace detail {

/// Shared core: ladder cost on the flattened conv output, then conv-stack
/// backward from the noisy path's input gradient.
template <typename Real>
CnnCostResult<Real> tau_cost_core(CnnModel<Real>& model, const Tensor<Real>& flat,
                                  ConvStackCaches<Real>& caches, const Tensor<Real>* labels,
                                  const CostWeights& weights, RngStream& rng,
                                  const CleanPass<Real>& targets) {
  CnnCostResult<Real> result;
  result.grads = model.zeros_like();
  LadderCostResult<Real> inner =
      ladder_cost_with_targets(model.top, flat, labels, weights, rng, targets);
  result.cost = inner.cost;
  result.supervised = inner.supervised;
  result.reconstruction = inner.reconstruction;
  result.grads.top = std::move(inner.grads);

  const auto lengths = model.config.temporal_lengths();
  Tensor<Real> d =
      unflatten_frames(inner.input_grad, model.config.blocks.back().filters, lengths.back());
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    d = maxpool1d_backward(d, caches.pool[b]);
    d = model.blocks[b].backward(d, caches.conv[b], result.grads.blocks[b]);
  }
  return result;
}

}  // namespace detail

/// Ladder cost for the CNN model against explicitly supplied targets. The
/// conv stack is shared by the clean and noisy paths; corruption,
/// reconstruction and the supervised head all live on the fully connected
/// levels above the flatten boundary. Targets are constants, so the
/// finite-difference suites evaluate this function with frozen targets.
template <typename Real>
CnnCostResult<Real> tau_ladder_cost_with_targets(CnnModel<Real>& model,
                                                 const Tensor<Real>& features,
                                                 const Tensor<Real>* labels,
                                                 const CostWeights& weights, RngStream& rng,
                                                 const CleanPass<Real>& targets) {
  ConvStackCaches<Real> caches;
  Tensor<Real> flat = conv_stack_forward(model, features, &caches);
  return detail::tau_cost_core(model, flat, caches, labels, weights, rng, targets);
}

/// Training cost with targets from a fresh clean pass over the shared conv
/// stack's flattened output.
template <typename Real>
CnnCostResult<Real> tau_ladder_cost(CnnModel<Real>& model, const Tensor<Real>& features,
                                    const Tensor<Real>* labels, const CostWeights& weights,
                                    RngStream& rng, bool update_running = true) {
  ConvStackCaches<Real> caches;
  Tensor<Real> flat = conv_stack_forward(model, features, &caches);
  CleanPass<Real> targets = clean_encode(model.top, flat, Mode::Train, update_running);
  return detail::tau_cost_core(model, flat, caches, labels, weights, rng, targets);
}

}  // namespace ladder

#endif  // LADDER_CNN_HPP_
