#ifndef LADDER_LADDER_HPP_
#define LADDER_LADDER_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "ladder/combinator.hpp"
#include "ladder/layers.hpp"
#include "ladder/metrics.hpp"
#include "ladder/tensor.hpp"

namespace ladder {

/// Mixing weights of the supervised cost. With one head the target attribute
/// selects the label column; with three heads the per-attribute losses are
/// weighted alpha, beta, 1-alpha-beta.
struct CostWeights {
  double alpha = 1.0;
  double beta = 0.0;
  std::size_t target_attribute = 0;

  void validate() const {
    if (alpha < 0 || alpha > 1 || beta < 0 || beta > 1 || alpha + beta > 1.0 + 1e-12)
      throw ParameterError("cost weights must satisfy alpha, beta in [0,1], alpha+beta <= 1");
    if (target_attribute > 2) throw ParameterError("target attribute index must be 0, 1 or 2");
  }
};

template <typename Real>
struct LadderConfig {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden_widths;  // encoder layer widths, bottom to top
  std::size_t head_count = 1;              // 1 = single task, 3 = multitask
  Real noise_sigma = Real(0);              // std of the injected Gaussian noise
  std::vector<Real> lambda;                // per-layer reconstruction weight, index 0 = input
  bool reconstruct_input = true;           // false for the tau variant
  std::vector<Real> dropout_rates;         // rate before dense layer l+1; index 0 = input
  CombinatorKind combinator_kind = CombinatorKind::PerUnitMlp;
  std::size_t combinator_hidden = 4;
  Real bn_epsilon = Real(1e-5);
  Real bn_momentum = Real(0.99);

  std::size_t depth() const { return hidden_widths.size(); }
  std::size_t width(std::size_t level) const {
    return level == 0 ? input_width : hidden_widths[level - 1];
  }

  void validate() const {
    if (input_width == 0) throw ParameterError("ladder config needs a positive input width");
    if (hidden_widths.empty()) throw ParameterError("ladder config needs at least one layer");
    if (head_count != 1 && head_count != 3)
      throw ParameterError("ladder config supports 1 or 3 heads");
    if (lambda.size() != depth() + 1)
      throw ParameterError("lambda must have one entry per layer including the input");
    for (Real l : lambda)
      if (l < Real(0)) throw ParameterError("lambda weights must be nonnegative");
    if (dropout_rates.size() != depth())
      throw ParameterError("dropout_rates must have one entry per encoder layer");
    if (noise_sigma < Real(0)) throw ParameterError("noise sigma must be nonnegative");
  }
};

template <typename Real>
struct PlainNormCache {
  Tensor<Real> x_hat;
  Tensor<Real> inv_std;
  bool valid = false;
};

/// Per-column standardization with biased variance and no trainable terms;
/// used on the decoder projections.
template <typename Real>
Tensor<Real> plain_batch_norm(const Tensor<Real>& x, Real epsilon,
                              PlainNormCache<Real>* cache = nullptr) {
  x.require_rank(2);
  const std::size_t n = x.shape[0];
  const std::size_t w = x.shape[1];
  Tensor<Real> out = Tensor<Real>::zeros({n, w});
  Tensor<Real> inv_std = Tensor<Real>::zeros({w});
  for (std::size_t j = 0; j < w; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double std_eps = std::sqrt(var + static_cast<double>(epsilon));
    inv_std(j) = static_cast<Real>(1.0 / std_eps);
    for (std::size_t i = 0; i < n; ++i) out(i, j) = static_cast<Real>((x(i, j) - mean) / std_eps);
  }
  if (cache) {
    cache->x_hat = out;
    cache->inv_std = inv_std;
    cache->valid = true;
  }
  return out;
}

template <typename Real>
Tensor<Real> plain_batch_norm_backward(const Tensor<Real>& grad_out,
                                       const PlainNormCache<Real>& cache) {
  if (!cache.valid) throw StateError("plain norm backward requires a cached forward pass");
  const std::size_t n = grad_out.shape[0];
  const std::size_t w = grad_out.shape[1];
  Tensor<Real> dx = Tensor<Real>::zeros({n, w});
  for (std::size_t j = 0; j < w; ++j) {
    double sum_d = 0, sum_dx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_d += grad_out(i, j);
      sum_dx += static_cast<double>(grad_out(i, j)) * cache.x_hat(i, j);
    }
    const double mean_d = sum_d / static_cast<double>(n);
    const double mean_dx = sum_dx / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      dx(i, j) = static_cast<Real>(static_cast<double>(cache.inv_std(j)) *
                                   (grad_out(i, j) - mean_d - cache.x_hat(i, j) * mean_dx));
  }
  return dx;
}

/// The ladder network: weight-shared clean/noisy encoders, a mirrored decoder
/// with lateral combinator connections, and regression heads reading the top
/// pre-activation representation.
template <typename Real>
struct LadderModel {
  LadderConfig<Real> config;
  std::vector<DenseLayer<Real>> encoder;           // layer l stored at index l-1
  std::vector<BatchNormLayer<Real>> encoder_norm;  // same indexing
  std::vector<DenseLayer<Real>> heads;
  struct DecoderLevel {
    std::size_t level;  // which encoder layer this level reconstructs
    DenseLayer<Real> proj;
    Combinator<Real> comb;
  };
  std::vector<DecoderLevel> decoder;  // stored top-down: level L first
  std::vector<DropoutLayer<Real>> dropouts;  // index 0 = input dropout
  NoiseLayer<Real> noise;

  std::size_t depth() const { return encoder.size(); }
  std::size_t width(std::size_t level) const { return config.width(level); }
  std::size_t lowest_reconstructed_level() const { return config.reconstruct_input ? 0 : 1; }

  static LadderModel init(const LadderConfig<Real>& config, RngStream& rng) {
    config.validate();
    LadderModel m;
    m.config = config;
    const std::size_t levels = config.depth();
    for (std::size_t l = 1; l <= levels; ++l) {
      m.encoder.push_back(DenseLayer<Real>::glorot(config.width(l - 1), config.width(l), rng));
      auto bn = BatchNormLayer<Real>::init(config.width(l));
      bn.epsilon = config.bn_epsilon;
      bn.momentum = config.bn_momentum;
      m.encoder_norm.push_back(std::move(bn));
      m.dropouts.push_back({config.dropout_rates[l - 1]});
    }
    for (std::size_t h = 0; h < config.head_count; ++h)
      m.heads.push_back(DenseLayer<Real>::glorot(config.width(levels), 1, rng));
    const std::size_t lowest = config.reconstruct_input ? 0 : 1;
    for (std::size_t level = levels + 1; level-- > lowest;) {
      // iterate levels L .. lowest
      const std::size_t in_w = (level == levels) ? config.width(levels) : config.width(level + 1);
      DecoderLevel d{level, DenseLayer<Real>::glorot(in_w, config.width(level), rng),
                     Combinator<Real>::identity_init(config.combinator_kind, config.width(level),
                                                     config.combinator_hidden)};
      m.decoder.push_back(std::move(d));
    }
    m.noise.sigma = config.noise_sigma;
    return m;
  }

  LadderModel zeros_like() const {
    LadderModel m;
    m.config = config;
    for (const auto& e : encoder) m.encoder.push_back(e.zeros_like());
    for (const auto& bn : encoder_norm) m.encoder_norm.push_back(bn.zeros_like());
    for (const auto& h : heads) m.heads.push_back(h.zeros_like());
    for (const auto& d : decoder)
      m.decoder.push_back({d.level, d.proj.zeros_like(), d.comb.zeros_like()});
    m.dropouts = dropouts;
    m.noise = noise;
    return m;
  }

  /// Trainable tensors in a stable order shared with any zeroed twin.
  std::vector<ParamRef<Real>> parameters() {
    std::vector<ParamRef<Real>> out;
    for (std::size_t l = 1; l <= depth(); ++l) {
      const std::string tag = std::to_string(l);
      out.push_back({"enc" + tag + ".weight", &encoder[l - 1].weight});
      out.push_back({"enc" + tag + ".bias", &encoder[l - 1].bias});
      out.push_back({"bn" + tag + ".gamma", &encoder_norm[l - 1].gamma});
      out.push_back({"bn" + tag + ".beta", &encoder_norm[l - 1].beta});
    }
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const std::string tag = std::to_string(h);
      out.push_back({"head" + tag + ".weight", &heads[h].weight});
      out.push_back({"head" + tag + ".bias", &heads[h].bias});
    }
    for (auto& d : decoder) {
      const std::string tag = std::to_string(d.level);
      out.push_back({"dec" + tag + ".weight", &d.proj.weight});
      out.push_back({"dec" + tag + ".bias", &d.proj.bias});
      for (auto& p : d.comb.parameters("comb" + tag)) out.push_back(p);
    }
    return out;
  }

  /// Everything a checkpoint must hold: parameters plus running statistics.
  std::vector<ParamRef<Real>> state_tensors() {
    auto out = parameters();
    for (std::size_t l = 1; l <= depth(); ++l) {
      const std::string tag = std::to_string(l);
      out.push_back({"bn" + tag + ".running_mean", &encoder_norm[l - 1].running_mean});
      out.push_back({"bn" + tag + ".running_var", &encoder_norm[l - 1].running_var});
    }
    return out;
  }
};

template <typename Real>
struct CleanPass {
  Tensor<Real> head_out;             // [batch x heads]
  std::vector<Tensor<Real>> z;       // per-level pre-activations; z[0] is the input
  std::vector<Tensor<Real>> mean;    // batch statistics per level (index 0 unused)
  std::vector<Tensor<Real>> std_;    // sqrt(var + eps) per level
};

template <typename Real>
struct NoisyPass {
  Tensor<Real> head_out;
  std::vector<Tensor<Real>> z_tilde;  // per-level noisy pre-activations
  // caches for backward, indexed like the encoder (layer l at index l-1)
  std::vector<typename DropoutLayer<Real>::Cache> dropout_cache;
  std::vector<typename DenseLayer<Real>::Cache> dense_cache;
  std::vector<typename BatchNormLayer<Real>::NormCache> norm_cache;
  std::vector<typename BatchNormLayer<Real>::ScaleBiasCache> sb_cache;
  std::vector<ReluCache<Real>> relu_cache;
  std::vector<typename DenseLayer<Real>::Cache> head_cache;
};

template <typename Real>
struct DecodePass {
  std::vector<Tensor<Real>> z_hat;  // per-level reconstructions (empty below the lowest level)
  std::vector<Tensor<Real>> u;      // normalized decoder projections
  // caches aligned with model.decoder (top-down order)
  std::vector<typename DenseLayer<Real>::Cache> proj_cache;
  std::vector<PlainNormCache<Real>> norm_cache;
  std::vector<typename Combinator<Real>::Cache> comb_cache;
};

/// Clean encoder: no dropout, no noise. Train mode uses batch statistics
/// (and optionally folds them into the running averages); eval mode uses
/// running statistics. Heads read the top pre-activation z[L].
template <typename Real>
CleanPass<Real> clean_encode(LadderModel<Real>& model, const Tensor<Real>& x, Mode mode,
                             bool update_running = true) {
  const std::size_t levels = model.depth();
  CleanPass<Real> pass;
  pass.z.resize(levels + 1);
  pass.mean.resize(levels + 1);
  pass.std_.resize(levels + 1);
  pass.z[0] = x;
  Tensor<Real> h = x;
  for (std::size_t l = 1; l <= levels; ++l) {
    Tensor<Real> pre = model.encoder[l - 1].forward(h);
    pass.z[l] = model.encoder_norm[l - 1].normalize(pre, mode, nullptr,
                                                    mode == Mode::Train && update_running,
                                                    &pass.mean[l], &pass.std_[l]);
    h = relu_forward(model.encoder_norm[l - 1].scale_bias(pass.z[l]));
  }
  pass.head_out = Tensor<Real>::zeros({x.shape[0], model.heads.size()});
  for (std::size_t hd = 0; hd < model.heads.size(); ++hd) {
    Tensor<Real> y = model.heads[hd].forward(pass.z[levels]);
    for (std::size_t i = 0; i < y.shape[0]; ++i) pass.head_out(i, hd) = y(i, 0);
  }
  return pass;
}

/// Noisy encoder: input dropout, then Gaussian noise at the input and after
/// every per-layer normalization. z_tilde[l] is the noisy pre-activation that
/// feeds both the gamma/beta+ReLU continuation and the decoder laterals.
template <typename Real>
NoisyPass<Real> noisy_encode(LadderModel<Real>& model, const Tensor<Real>& x, Mode mode,
                             RngStream& rng) {
  const std::size_t levels = model.depth();
  NoisyPass<Real> pass;
  pass.z_tilde.resize(levels + 1);
  pass.dropout_cache.resize(levels);
  pass.dense_cache.resize(levels);
  pass.norm_cache.resize(levels);
  pass.sb_cache.resize(levels);
  pass.relu_cache.resize(levels);
  pass.head_cache.resize(model.heads.size());
  const bool noisy = (mode == Mode::Train);

  Tensor<Real> dropped = model.dropouts[0].forward(x, mode, rng, &pass.dropout_cache[0]);
  pass.z_tilde[0] = model.noise.forward(dropped, noisy, rng);
  Tensor<Real> h = pass.z_tilde[0];
  for (std::size_t l = 1; l <= levels; ++l) {
    Tensor<Real> a =
        (l >= 2) ? model.dropouts[l - 1].forward(h, mode, rng, &pass.dropout_cache[l - 1]) : h;
    Tensor<Real> pre = model.encoder[l - 1].forward(a, &pass.dense_cache[l - 1]);
    // The noisy path never touches the running statistics.
    Tensor<Real> x_hat =
        model.encoder_norm[l - 1].normalize(pre, mode, &pass.norm_cache[l - 1], false);
    pass.z_tilde[l] = model.noise.forward(x_hat, noisy, rng);
    Tensor<Real> sb = model.encoder_norm[l - 1].scale_bias(pass.z_tilde[l], &pass.sb_cache[l - 1]);
    h = relu_forward(sb, &pass.relu_cache[l - 1]);
  }
  pass.head_out = Tensor<Real>::zeros({x.shape[0], model.heads.size()});
  for (std::size_t hd = 0; hd < model.heads.size(); ++hd) {
    Tensor<Real> y = model.heads[hd].forward(pass.z_tilde[levels], &pass.head_cache[hd]);
    for (std::size_t i = 0; i < y.shape[0]; ++i) pass.head_out(i, hd) = y(i, 0);
  }
  return pass;
}

/// Decoder: seeded from the noisy top representation, it walks down the
/// levels computing u = plain_norm(proj(z_hat_above)) and the combinator
/// output z_hat = g(u, z_tilde).
template <typename Real>
DecodePass<Real> decode(const LadderModel<Real>& model, const NoisyPass<Real>& noisy) {
  const std::size_t levels = model.depth();
  if (noisy.z_tilde.size() != levels + 1 || noisy.z_tilde[levels].size() == 0)
    throw StateError("decode requires a completed noisy encoder pass");
  DecodePass<Real> pass;
  pass.z_hat.resize(levels + 1);
  pass.u.resize(levels + 1);
  pass.proj_cache.resize(model.decoder.size());
  pass.norm_cache.resize(model.decoder.size());
  pass.comb_cache.resize(model.decoder.size());
  for (std::size_t k = 0; k < model.decoder.size(); ++k) {
    const auto& dec = model.decoder[k];
    const Tensor<Real>& input =
        (dec.level == levels) ? noisy.z_tilde[levels] : pass.z_hat[dec.level + 1];
    Tensor<Real> proj = dec.proj.forward(input, &pass.proj_cache[k]);
    pass.u[dec.level] = plain_batch_norm(proj, model.config.bn_epsilon, &pass.norm_cache[k]);
    pass.z_hat[dec.level] =
        dec.comb.forward(pass.u[dec.level], noisy.z_tilde[dec.level], &pass.comb_cache[k]);
  }
  return pass;
}

/// Sum of per-layer weighted MSE terms. Hidden-layer reconstructions are
/// standardized with the clean path's batch statistics before comparison;
/// the input layer is compared raw.
template <typename Real>
Real reconstruction_cost(const std::vector<Tensor<Real>>& z_hat, const std::vector<Tensor<Real>>& z,
                         const std::vector<Tensor<Real>>& clean_mean,
                         const std::vector<Tensor<Real>>& clean_std,
                         const std::vector<Real>& lambda, std::size_t lowest_level) {
  if (z_hat.size() != z.size() || lambda.size() != z.size())
    throw DimensionError("reconstruction cost: layer lists are not aligned");
  double total = 0;
  for (std::size_t l = lowest_level; l < z.size(); ++l) {
    if (lambda[l] == Real(0)) continue;
    if (!z_hat[l].same_shape(z[l]))
      throw DimensionError("reconstruction cost: shape mismatch at level " + std::to_string(l));
    const std::size_t n = z[l].shape[0], w = z[l].shape[1];
    double mse = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double zh = z_hat[l](i, j);
        if (l > 0) zh = (zh - clean_mean[l](j)) / clean_std[l](j);
        const double d = zh - z[l](i, j);
        mse += d * d;
      }
    total += static_cast<double>(lambda[l]) * mse / static_cast<double>(n * w);
  }
  return static_cast<Real>(total);
}

/// Weighted 1-CCC cost over the head outputs. With one head the target
/// attribute's label column is used; with three heads the losses mix with
/// weights alpha, beta, 1-alpha-beta. Optionally emits d cost / d head_out.
template <typename Real>
Real supervised_cost(const Tensor<Real>& head_out, const Tensor<Real>& labels,
                     const CostWeights& weights, Tensor<Real>* grad_head_out = nullptr) {
  weights.validate();
  head_out.require_rank(2);
  labels.require_rank(2);
  if (labels.shape[1] != 3) throw DimensionError("labels must have three attribute columns");
  if (labels.shape[0] != head_out.shape[0])
    throw DimensionError("labels and predictions disagree on batch size");
  const std::size_t heads = head_out.shape[1];
  if (heads != 1 && heads != 3) throw DimensionError("supervised cost expects 1 or 3 heads");
  if (grad_head_out) *grad_head_out = Tensor<Real>::zeros(head_out.shape);
  const std::size_t n = head_out.shape[0];

  auto column = [n](const Tensor<Real>& t, std::size_t j) {
    Tensor<Real> c = Tensor<Real>::zeros({n});
    for (std::size_t i = 0; i < n; ++i) c(i) = t(i, j);
    return c;
  };

  double total = 0;
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const std::size_t attribute = (heads == 1) ? weights.target_attribute : hd;
    double w = 1.0;
    if (heads == 3)
      w = (hd == 0) ? weights.alpha : (hd == 1) ? weights.beta : 1.0 - weights.alpha - weights.beta;
    Tensor<Real> pred = column(head_out, hd);
    Tensor<Real> truth = column(labels, attribute);
    if (grad_head_out) {
      Tensor<Real> g;
      total += w * ccc_loss_and_grad(pred, truth, g);
      for (std::size_t i = 0; i < n; ++i)
        (*grad_head_out)(i, hd) = static_cast<Real>(w * g(i));
    } else {
      total += w * (1.0 - ccc(pred, truth));
    }
  }
  return static_cast<Real>(total);
}

template <typename Real>
struct LadderCostResult {
  Real cost = Real(0);
  Real supervised = Real(0);
  Real reconstruction = Real(0);
  LadderModel<Real> grads;   // zeroed twin carrying every parameter gradient
  Tensor<Real> input_grad;   // d cost / d input, needed by convolutional fronts
};

/// One training-cost evaluation with full hand-derived backpropagation,
/// against an explicitly supplied target pass. Labeled batches
/// (labels != nullptr) pay supervised + reconstruction cost; unlabeled
/// batches pay reconstruction only. The targets (and their batch statistics)
/// are constants: no gradient flows through them, which is also why the
/// finite-difference suites evaluate this function with frozen targets.
template <typename Real>
LadderCostResult<Real> ladder_cost_with_targets(LadderModel<Real>& model,
                                                const Tensor<Real>& features,
                                                const Tensor<Real>* labels,
                                                const CostWeights& weights, RngStream& rng,
                                                const CleanPass<Real>& clean) {
  const std::size_t levels = model.depth();
  const std::size_t lowest = model.lowest_reconstructed_level();
  const std::size_t n = features.shape[0];

  LadderCostResult<Real> result;
  result.grads = model.zeros_like();

  bool any_lambda = false;
  for (std::size_t l = lowest; l <= levels; ++l)
    if (model.config.lambda[l] > Real(0)) any_lambda = true;

  NoisyPass<Real> noisy = noisy_encode(model, features, Mode::Train, rng);

  std::vector<Tensor<Real>> d_zt(levels + 1);
  for (std::size_t l = 0; l <= levels; ++l)
    d_zt[l] = Tensor<Real>::zeros({n, model.width(l)});

  // Supervised branch.
  if (labels) {
    Tensor<Real> d_head;
    result.supervised = supervised_cost(noisy.head_out, *labels, weights, &d_head);
    for (std::size_t hd = 0; hd < model.heads.size(); ++hd) {
      Tensor<Real> dy = Tensor<Real>::zeros({n, 1});
      for (std::size_t i = 0; i < n; ++i) dy(i, 0) = d_head(i, hd);
      Tensor<Real> dz =
          model.heads[hd].backward(dy, noisy.head_cache[hd], result.grads.heads[hd]);
      for (std::size_t i = 0; i < dz.size(); ++i) d_zt[levels].data[i] += dz.data[i];
    }
  }

  // Reconstruction branch.
  DecodePass<Real> dec;
  if (any_lambda) {
    dec = decode(model, noisy);
    result.reconstruction =
        reconstruction_cost(dec.z_hat, clean.z, clean.mean, clean.std_, model.config.lambda, lowest);

    std::vector<Tensor<Real>> d_zhat(levels + 1);
    for (std::size_t l = lowest; l <= levels; ++l) {
      const std::size_t w = model.width(l);
      d_zhat[l] = Tensor<Real>::zeros({n, w});
      const double lam = model.config.lambda[l];
      if (lam == 0) continue;
      const double scale = 2.0 * lam / static_cast<double>(n * w);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          double zh = dec.z_hat[l](i, j);
          double dz;
          if (l > 0) {
            const double s = clean.std_[l](j);
            zh = (zh - clean.mean[l](j)) / s;
            dz = scale * (zh - clean.z[l](i, j)) / s;
          } else {
            dz = scale * (zh - clean.z[l](i, j));
          }
          d_zhat[l](i, j) = static_cast<Real>(dz);
        }
    }

    // Walk the decoder bottom-up so each level's z_hat gradient is complete
    // (reconstruction term plus the projection of the level below).
    for (std::size_t k = model.decoder.size(); k-- > 0;) {
      const auto& level = model.decoder[k];
      auto& grad_level = result.grads.decoder[k];
      Tensor<Real> du, dzt_lateral;
      level.comb.backward(d_zhat[level.level], dec.comb_cache[k], grad_level.comb, du,
                          dzt_lateral);
      for (std::size_t i = 0; i < dzt_lateral.size(); ++i)
        d_zt[level.level].data[i] += dzt_lateral.data[i];
      Tensor<Real> dproj = plain_batch_norm_backward(du, dec.norm_cache[k]);
      Tensor<Real> dinput = level.proj.backward(dproj, dec.proj_cache[k], grad_level.proj);
      if (level.level == levels) {
        for (std::size_t i = 0; i < dinput.size(); ++i) d_zt[levels].data[i] += dinput.data[i];
      } else {
        for (std::size_t i = 0; i < dinput.size(); ++i)
          d_zhat[level.level + 1].data[i] += dinput.data[i];
      }
    }
  }

  result.cost = result.supervised + result.reconstruction;

  // Noisy encoder backward, top layer to input. Nothing consumes the top
  // activation h[L], so its gradient starts at zero.
  Tensor<Real> dh = Tensor<Real>::zeros({n, model.width(levels)});
  for (std::size_t l = levels; l >= 1; --l) {
    Tensor<Real> dsb = relu_backward(dh, noisy.relu_cache[l - 1]);
    Tensor<Real> dxh = model.encoder_norm[l - 1].scale_bias_backward(
        dsb, noisy.sb_cache[l - 1], result.grads.encoder_norm[l - 1]);
    for (std::size_t i = 0; i < dxh.size(); ++i) dxh.data[i] += d_zt[l].data[i];
    Tensor<Real> dpre =
        model.encoder_norm[l - 1].normalize_backward(dxh, noisy.norm_cache[l - 1]);
    Tensor<Real> da =
        model.encoder[l - 1].backward(dpre, noisy.dense_cache[l - 1], result.grads.encoder[l - 1]);
    if (l >= 2) {
      dh = model.dropouts[l - 1].backward(da, noisy.dropout_cache[l - 1]);
    } else {
      for (std::size_t i = 0; i < da.size(); ++i) d_zt[0].data[i] += da.data[i];
    }
  }
  // Through the input noise (identity) and input dropout.
  result.input_grad = model.dropouts[0].backward(d_zt[0], noisy.dropout_cache[0]);
  return result;
}

/// Training cost with targets taken from a fresh clean pass over the same
/// batch (running statistics optionally updated by that pass).
template <typename Real>
LadderCostResult<Real> ladder_cost(LadderModel<Real>& model, const Tensor<Real>& features,
                                   const Tensor<Real>* labels, const CostWeights& weights,
                                   RngStream& rng, bool update_running = true) {
  CleanPass<Real> clean = clean_encode(model, features, Mode::Train, update_running);
  return ladder_cost_with_targets(model, features, labels, weights, rng, clean);
}

}  // namespace ladder

#endif  // LADDER_LADDER_HPP_
