#ifndef LADDER_OPTIMIZER_HPP_
#define LADDER_OPTIMIZER_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ladder/tensor.hpp"

namespace ladder {

struct NadamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Nesterov-flavored Adam with constant-beta bias correction:
///   m <- b1*m + (1-b1)*g          n <- b2*n + (1-b2)*g^2
///   m_hat = m / (1 - b1^t)        n_hat = n / (1 - b2^t)
///   theta <- theta - lr * (b1*m_hat + (1-b1)*g) / (sqrt(n_hat) + eps)
/// The first step therefore has magnitude lr regardless of gradient scale.
template <typename Real>
class NadamOptimizer {
 public:
  NadamOptimizer() = default;
  explicit NadamOptimizer(NadamConfig config) : config_(config) {}

  const NadamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }

  /// Lazily sized on first use; shapes are pinned afterwards.
  void step(const std::vector<Tensor<Real>*>& params, const std::vector<const Tensor<Real>*>& grads) {
    if (params.size() != grads.size())
      throw DimensionError("optimizer: parameter/gradient count mismatch");
    if (m_.empty()) {
      m_.reserve(params.size());
      n_.reserve(params.size());
      for (const auto* p : params) {
        m_.push_back(Tensor<Real>::zeros(p->shape));
        n_.push_back(Tensor<Real>::zeros(p->shape));
      }
    }
    if (m_.size() != params.size())
      throw StateError("optimizer state does not match parameter count");
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k]->shape != grads[k]->shape || params[k]->shape != m_[k].shape)
        throw DimensionError("optimizer: shape mismatch at parameter " + std::to_string(k));
      if (!all_finite(*grads[k]))
        throw DivergenceError("non-finite gradient; optimizer step refused");
    }
    const double t = static_cast<double>(++step_);
    const double bias1 = 1.0 - std::pow(config_.beta1, t);
    const double bias2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor<Real>& p = *params[k];
      const Tensor<Real>& g = *grads[k];
      Tensor<Real>& m = m_[k];
      Tensor<Real>& n = n_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g.data[i];
        const double mi = config_.beta1 * m.data[i] + (1.0 - config_.beta1) * gi;
        const double ni = config_.beta2 * n.data[i] + (1.0 - config_.beta2) * gi * gi;
        m.data[i] = static_cast<Real>(mi);
        n.data[i] = static_cast<Real>(ni);
        const double m_hat = mi / bias1;
        const double n_hat = ni / bias2;
        const double update = config_.learning_rate *
                              (config_.beta1 * m_hat + (1.0 - config_.beta1) * gi) /
                              (std::sqrt(n_hat) + config_.epsilon);
        p.data[i] = static_cast<Real>(p.data[i] - update);
      }
    }
  }

  // Checkpoint access to the raw state.
  std::vector<Tensor<Real>>& first_moments() { return m_; }
  std::vector<Tensor<Real>>& second_moments() { return n_; }
  const std::vector<Tensor<Real>>& first_moments() const { return m_; }
  const std::vector<Tensor<Real>>& second_moments() const { return n_; }
  void restore(std::vector<Tensor<Real>> m, std::vector<Tensor<Real>> n, std::uint64_t step) {
    m_ = std::move(m);
    n_ = std::move(n);
    step_ = step;
  }

 private:
  NadamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<Real>> m_;
  std::vector<Tensor<Real>> n_;
};

}  // namespace ladder

#endif  // LADDER_OPTIMIZER_HPP_
