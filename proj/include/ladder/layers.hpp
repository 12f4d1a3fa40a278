#ifndef LADDER_LAYERS_HPP_
#define LADDER_LAYERS_HPP_

#include <cstddef>
#include <vector>

#include "ladder/tensor.hpp"

namespace ladder {

enum class Mode { Train, Eval };

// Gradients are accumulated into a zeroed twin of each layer, so every
// backward() takes a mutable reference to a layer of the same shape.

/// Affine layer y = x W^T + b with W [out x in], x [batch x in].
template <typename Real>
struct DenseLayer {
  Tensor<Real> weight;  // [out x in]
  Tensor<Real> bias;    // [out]

  struct Cache {
    Tensor<Real> input;
    bool valid = false;
  };

  static DenseLayer glorot(std::size_t in, std::size_t out, RngStream& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weight = sample_uniform<Real>({out, in}, -bound, bound, rng);
    layer.bias = Tensor<Real>::zeros({out});
    return layer;
  }

  static DenseLayer zeros(std::size_t in, std::size_t out) {
    return {Tensor<Real>::zeros({out, in}), Tensor<Real>::zeros({out})};
  }

  DenseLayer zeros_like() const {
    return {Tensor<Real>::zeros(weight.shape), Tensor<Real>::zeros(bias.shape)};
  }

  std::size_t in_width() const { return weight.shape[1]; }
  std::size_t out_width() const { return weight.shape[0]; }

  Tensor<Real> forward(const Tensor<Real>& x, Cache* cache = nullptr) const {
    if (x.rank() != 2 || x.shape[1] != in_width())
      throw DimensionError("dense input width " + x.shape_str() + " does not match layer [" +
                           std::to_string(out_width()) + "x" + std::to_string(in_width()) + "]");
    Tensor<Real> y = matmul_nt(x, weight);
    add_row_vector(y, bias);
    if (cache) {
      cache->input = x;
      cache->valid = true;
    }
    return y;
  }

  /// Returns d cost / d input; accumulates parameter gradients into grad.
  Tensor<Real> backward(const Tensor<Real>& grad_out, const Cache& cache,
                        DenseLayer& grad) const {
    if (!cache.valid) throw StateError("dense backward requires a cached forward pass");
    if (grad_out.rank() != 2 || grad_out.shape[1] != out_width())
      throw DimensionError("dense upstream gradient width mismatch");
    Tensor<Real> dw = matmul_tn(grad_out, cache.input);  // [out x in]
    for (std::size_t i = 0; i < dw.size(); ++i) grad.weight.data[i] += dw.data[i];
    for (std::size_t i = 0; i < grad_out.shape[0]; ++i)
      for (std::size_t j = 0; j < out_width(); ++j) grad.bias(j) += grad_out(i, j);
    return matmul(grad_out, weight);  // [batch x in]
  }
};

/// Batch normalization with trainable scale/bias and running statistics for
/// inference. Normalization and the gamma/beta affine map are separately
/// callable because noise is injected between them on the noisy encoder path.
/// Batch variance is biased (1/N); running statistics use momentum 0.99.
template <typename Real>
struct BatchNormLayer {
  Tensor<Real> gamma;
  Tensor<Real> beta;
  Tensor<Real> running_mean;
  Tensor<Real> running_var;
  Real epsilon = Real(1e-5);
  Real momentum = Real(0.99);

  struct NormCache {
    Tensor<Real> x_hat;    // normalized output
    Tensor<Real> inv_std;  // [width]
    bool batch_stats = false;
    bool valid = false;
  };
  struct ScaleBiasCache {
    Tensor<Real> x_hat;
    bool valid = false;
  };
  struct Cache {
    NormCache norm;
    ScaleBiasCache sb;
  };

  static BatchNormLayer init(std::size_t width) {
    BatchNormLayer bn;
    bn.gamma = Tensor<Real>::full({width}, Real(1));
    bn.beta = Tensor<Real>::zeros({width});
    bn.running_mean = Tensor<Real>::zeros({width});
    bn.running_var = Tensor<Real>::full({width}, Real(1));
    return bn;
  }

  BatchNormLayer zeros_like() const {
    BatchNormLayer bn;
    bn.gamma = Tensor<Real>::zeros(gamma.shape);
    bn.beta = Tensor<Real>::zeros(beta.shape);
    bn.running_mean = Tensor<Real>::zeros(running_mean.shape);
    bn.running_var = Tensor<Real>::zeros(running_var.shape);
    bn.epsilon = epsilon;
    bn.momentum = momentum;
    return bn;
  }

  std::size_t width() const { return gamma.shape[0]; }

  /// (x - mean) / sqrt(var + eps). Train mode uses batch statistics and
  /// optionally folds them into the running averages; eval mode uses the
  /// running statistics. Also reports the batch mean/std when requested
  /// (the reconstruction cost normalizes against the clean path's stats).
  Tensor<Real> normalize(const Tensor<Real>& x, Mode mode, NormCache* cache = nullptr,
                         bool update_running = true, Tensor<Real>* batch_mean = nullptr,
                         Tensor<Real>* batch_std = nullptr) {
    if (x.rank() != 2 || x.shape[1] != width())
      throw DimensionError("batchnorm input width mismatch");
    const std::size_t n = x.shape[0];
    const std::size_t w = width();
    Tensor<Real> out = Tensor<Real>::zeros({n, w});
    Tensor<Real> inv_std = Tensor<Real>::zeros({w});
    if (batch_mean) *batch_mean = Tensor<Real>::zeros({w});
    if (batch_std) *batch_std = Tensor<Real>::zeros({w});
    if (mode == Mode::Train) {
      if (n < 2) throw DegenerateBatchError("batchnorm train mode needs batch size >= 2");
      for (std::size_t j = 0; j < w; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= static_cast<double>(n);
        double var = 0;
        for (std::size_t i = 0; i < n; ++i) {
          double c = x(i, j) - mean;
          var += c * c;
        }
        var /= static_cast<double>(n);
        double std_eps = std::sqrt(var + static_cast<double>(epsilon));
        inv_std(j) = static_cast<Real>(1.0 / std_eps);
        for (std::size_t i = 0; i < n; ++i)
          out(i, j) = static_cast<Real>((x(i, j) - mean) / std_eps);
        if (batch_mean) (*batch_mean)(j) = static_cast<Real>(mean);
        if (batch_std) (*batch_std)(j) = static_cast<Real>(std_eps);
        if (update_running) {
          running_mean(j) =
              momentum * running_mean(j) + (Real(1) - momentum) * static_cast<Real>(mean);
          running_var(j) =
              momentum * running_var(j) + (Real(1) - momentum) * static_cast<Real>(var);
        }
      }
    } else {
      for (std::size_t j = 0; j < w; ++j) {
        double std_eps =
            std::sqrt(static_cast<double>(running_var(j)) + static_cast<double>(epsilon));
        inv_std(j) = static_cast<Real>(1.0 / std_eps);
        for (std::size_t i = 0; i < n; ++i)
          out(i, j) = static_cast<Real>((x(i, j) - static_cast<double>(running_mean(j))) / std_eps);
        if (batch_mean) (*batch_mean)(j) = running_mean(j);
        if (batch_std) (*batch_std)(j) = static_cast<Real>(std_eps);
      }
    }
    if (cache) {
      cache->x_hat = out;
      cache->inv_std = inv_std;
      cache->batch_stats = (mode == Mode::Train);
      cache->valid = true;
    }
    return out;
  }

  /// Exact gradient of normalize() through the batch statistics:
  /// dx = inv_std * (dxh - mean(dxh) - x_hat * mean(dxh * x_hat)).
  Tensor<Real> normalize_backward(const Tensor<Real>& grad_out, const NormCache& cache) const {
    if (!cache.valid) throw StateError("batchnorm backward requires a cached forward pass");
    if (!cache.batch_stats)
      throw StateError("batchnorm backward is only defined for batch-statistics mode");
    if (grad_out.shape != cache.x_hat.shape)
      throw DimensionError("batchnorm upstream gradient shape mismatch");
    const std::size_t n = grad_out.shape[0];
    const std::size_t w = width();
    Tensor<Real> dx = Tensor<Real>::zeros({n, w});
    for (std::size_t j = 0; j < w; ++j) {
      double sum_d = 0, sum_dx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_d += grad_out(i, j);
        sum_dx += static_cast<double>(grad_out(i, j)) * cache.x_hat(i, j);
      }
      double mean_d = sum_d / static_cast<double>(n);
      double mean_dx = sum_dx / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        dx(i, j) = static_cast<Real>(static_cast<double>(cache.inv_std(j)) *
                                     (grad_out(i, j) - mean_d - cache.x_hat(i, j) * mean_dx));
    }
    return dx;
  }

  Tensor<Real> scale_bias(const Tensor<Real>& x_hat, ScaleBiasCache* cache = nullptr) const {
    if (x_hat.rank() != 2 || x_hat.shape[1] != width())
      throw DimensionError("batchnorm scale/bias width mismatch");
    Tensor<Real> out = x_hat;
    for (std::size_t i = 0; i < out.shape[0]; ++i)
      for (std::size_t j = 0; j < out.shape[1]; ++j) out(i, j) = gamma(j) * x_hat(i, j) + beta(j);
    if (cache) {
      cache->x_hat = x_hat;
      cache->valid = true;
    }
    return out;
  }

  Tensor<Real> scale_bias_backward(const Tensor<Real>& grad_out, const ScaleBiasCache& cache,
                                   BatchNormLayer& grad) const {
    if (!cache.valid) throw StateError("scale/bias backward requires a cached forward pass");
    const std::size_t n = grad_out.shape[0];
    const std::size_t w = width();
    Tensor<Real> dx = Tensor<Real>::zeros({n, w});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        grad.gamma(j) += grad_out(i, j) * cache.x_hat(i, j);
        grad.beta(j) += grad_out(i, j);
        dx(i, j) = grad_out(i, j) * gamma(j);
      }
    return dx;
  }

  /// Full batch-norm map: normalize then gamma/beta.
  Tensor<Real> forward(const Tensor<Real>& x, Mode mode, Cache* cache = nullptr,
                       bool update_running = true) {
    NormCache local;
    Tensor<Real> x_hat = normalize(x, mode, cache ? &cache->norm : &local, update_running);
    return scale_bias(x_hat, cache ? &cache->sb : nullptr);
  }

  Tensor<Real> backward(const Tensor<Real>& grad_out, const Cache& cache,
                        BatchNormLayer& grad) const {
    Tensor<Real> dxh = scale_bias_backward(grad_out, cache.sb, grad);
    return normalize_backward(dxh, cache.norm);
  }
};

/// Inverted dropout: at train time elements are zeroed with probability p and
/// survivors scaled by 1/(1-p); eval mode is the identity.
template <typename Real>
struct DropoutLayer {
  Real p = Real(0);

  struct Cache {
    Tensor<Real> mask;  // holds 0 or 1/(1-p)
    bool valid = false;
  };

  Tensor<Real> forward(const Tensor<Real>& x, Mode mode, RngStream& rng,
                       Cache* cache = nullptr) const {
    if (p < Real(0) || p >= Real(1)) throw ParameterError("dropout probability must be in [0,1)");
    if (mode == Mode::Eval || p == Real(0)) {
      if (cache) {
        cache->mask = Tensor<Real>::full(x.shape, Real(1));
        cache->valid = true;
      }
      return x;
    }
    Real keep_scale = Real(1) / (Real(1) - p);
    Tensor<Real> mask = Tensor<Real>::zeros(x.shape);
    Tensor<Real> out = Tensor<Real>::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool keep = rng.next_unit() >= static_cast<double>(p);
      mask.data[i] = keep ? keep_scale : Real(0);
      out.data[i] = x.data[i] * mask.data[i];
    }
    if (cache) {
      cache->mask = std::move(mask);
      cache->valid = true;
    }
    return out;
  }

  Tensor<Real> backward(const Tensor<Real>& grad_out, const Cache& cache) const {
    if (!cache.valid) throw StateError("dropout backward requires a cached forward pass");
    if (!grad_out.same_shape(cache.mask))
      throw DimensionError("dropout upstream gradient shape mismatch");
    Tensor<Real> dx = grad_out;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= cache.mask.data[i];
    return dx;
  }
};

/// Additive zero-mean Gaussian corruption; identity on the clean path and
/// whenever sigma is zero. Backward is the identity map.
template <typename Real>
struct NoiseLayer {
  Real sigma = Real(0);

  Tensor<Real> forward(const Tensor<Real>& x, bool noisy_path, RngStream& rng) const {
    if (sigma < Real(0)) throw ParameterError("noise sigma must be nonnegative");
    if (!noisy_path || sigma == Real(0)) return x;
    Tensor<Real> out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
      out.data[i] += static_cast<Real>(static_cast<double>(sigma) * rng.next_gaussian());
    return out;
  }
};

template <typename Real>
struct ReluCache {
  Tensor<Real> mask;  // 1 where input > 0
  bool valid = false;
};

template <typename Real>
Tensor<Real> relu_forward(const Tensor<Real>& x, ReluCache<Real>* cache = nullptr) {
  Tensor<Real> out = x;
  Tensor<Real> mask = Tensor<Real>::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.data[i] > Real(0)) {
      mask.data[i] = Real(1);
    } else {
      out.data[i] = Real(0);
    }
  }
  if (cache) {
    cache->mask = std::move(mask);
    cache->valid = true;
  }
  return out;
}

template <typename Real>
Tensor<Real> relu_backward(const Tensor<Real>& grad_out, const ReluCache<Real>& cache) {
  if (!cache.valid) throw StateError("relu backward requires a cached forward pass");
  Tensor<Real> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= cache.mask.data[i];
  return dx;
}

}  // namespace ladder

#endif  // LADDER_LAYERS_HPP_
