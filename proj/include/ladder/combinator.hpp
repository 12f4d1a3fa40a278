#ifndef LADDER_COMBINATOR_HPP_
#define LADDER_COMBINATOR_HPP_

#include <array>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ladder/tensor.hpp"

namespace ladder {

enum class CombinatorKind { PerUnitMlp, Vanilla };

/// Named view of a trainable tensor inside a model.
template <typename Real>
struct ParamRef {
  std::string name;
  Tensor<Real>* value;
};

/// Denoising function g applied unit-wise: a one-hidden-layer MLP over the
/// feature triple [u, z_tilde, u*z_tilde] with ReLU hidden units and identity
/// output. Every unit of the layer has its own parameters. Initialization
/// passes z_tilde through exactly: a (+z, -z) hidden pair recombined as its
/// difference, relu(z) - relu(-z) == z.
template <typename Real>
struct MlpCombinator {
  std::size_t width = 0;
  std::size_t hidden = 4;
  Tensor<Real> w_in;   // [width x hidden x 3]
  Tensor<Real> b_in;   // [width x hidden]
  Tensor<Real> w_out;  // [width x hidden]
  Tensor<Real> b_out;  // [width]

  struct Cache {
    Tensor<Real> u, zt;
    Tensor<Real> hid;       // post-ReLU hidden activations [batch x width x hidden]
    Tensor<Real> hid_mask;  // ReLU mask, same shape
    bool valid = false;
  };

  static MlpCombinator identity_init(std::size_t width, std::size_t hidden = 4) {
    if (hidden < 2) throw ParameterError("mlp combinator needs hidden width >= 2");
    MlpCombinator g;
    g.width = width;
    g.hidden = hidden;
    g.w_in = Tensor<Real>::zeros({width, hidden, 3});
    g.b_in = Tensor<Real>::zeros({width, hidden});
    g.w_out = Tensor<Real>::zeros({width, hidden});
    g.b_out = Tensor<Real>::zeros({width});
    for (std::size_t j = 0; j < width; ++j) {
      g.w_in(j, 0, 1) = Real(1);   // hidden 0 sees +z_tilde
      g.w_in(j, 1, 1) = Real(-1);  // hidden 1 sees -z_tilde
      g.w_out(j, 0) = Real(1);
      g.w_out(j, 1) = Real(-1);
    }
    return g;
  }

  MlpCombinator zeros_like() const {
    MlpCombinator g;
    g.width = width;
    g.hidden = hidden;
    g.w_in = Tensor<Real>::zeros(w_in.shape);
    g.b_in = Tensor<Real>::zeros(b_in.shape);
    g.w_out = Tensor<Real>::zeros(w_out.shape);
    g.b_out = Tensor<Real>::zeros(b_out.shape);
    return g;
  }

  Tensor<Real> forward(const Tensor<Real>& u, const Tensor<Real>& zt,
                       Cache* cache = nullptr) const {
    if (!u.same_shape(zt)) throw DimensionError("combinator inputs u and z_tilde differ in shape");
    if (u.rank() != 2 || u.shape[1] != width) throw DimensionError("combinator width mismatch");
    const std::size_t n = u.shape[0];
    Tensor<Real> out = Tensor<Real>::zeros({n, width});
    Tensor<Real> hid = Tensor<Real>::zeros({n, width, hidden});
    Tensor<Real> hid_mask = Tensor<Real>::zeros({n, width, hidden});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const Real uv = u(i, j), zv = zt(i, j), pv = uv * zv;
        Real acc = b_out(j);
        for (std::size_t h = 0; h < hidden; ++h) {
          Real pre = w_in(j, h, 0) * uv + w_in(j, h, 1) * zv + w_in(j, h, 2) * pv + b_in(j, h);
          if (pre > Real(0)) {
            hid(i, j, h) = pre;
            hid_mask(i, j, h) = Real(1);
            acc += w_out(j, h) * pre;
          }
        }
        out(i, j) = acc;
      }
    if (cache) {
      cache->u = u;
      cache->zt = zt;
      cache->hid = std::move(hid);
      cache->hid_mask = std::move(hid_mask);
      cache->valid = true;
    }
    return out;
  }

  /// Accumulates parameter gradients into grad and input gradients into the
  /// decoder projection (du) and the lateral encoder connection (dzt).
  void backward(const Tensor<Real>& grad_out, const Cache& cache, MlpCombinator& grad,
                Tensor<Real>& du, Tensor<Real>& dzt) const {
    if (!cache.valid) throw StateError("combinator backward requires a cached forward pass");
    const std::size_t n = grad_out.shape[0];
    if (du.size() == 0) du = Tensor<Real>::zeros(grad_out.shape);
    if (dzt.size() == 0) dzt = Tensor<Real>::zeros(grad_out.shape);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const Real g = grad_out(i, j);
        if (g == Real(0)) continue;
        const Real uv = cache.u(i, j), zv = cache.zt(i, j), pv = uv * zv;
        grad.b_out(j) += g;
        Real du_acc = 0, dz_acc = 0;
        for (std::size_t h = 0; h < hidden; ++h) {
          grad.w_out(j, h) += g * cache.hid(i, j, h);
          const Real dpre = g * w_out(j, h) * cache.hid_mask(i, j, h);
          if (dpre == Real(0)) continue;
          grad.w_in(j, h, 0) += dpre * uv;
          grad.w_in(j, h, 1) += dpre * zv;
          grad.w_in(j, h, 2) += dpre * pv;
          grad.b_in(j, h) += dpre;
          du_acc += dpre * (w_in(j, h, 0) + w_in(j, h, 2) * zv);
          dz_acc += dpre * (w_in(j, h, 1) + w_in(j, h, 2) * uv);
        }
        du(i, j) += du_acc;
        dzt(i, j) += dz_acc;
      }
  }

  std::vector<ParamRef<Real>> parameters(const std::string& prefix) {
    return {{prefix + ".w_in", &w_in},
            {prefix + ".b_in", &b_in},
            {prefix + ".w_out", &w_out},
            {prefix + ".b_out", &b_out}};
  }
};

/// The ten-vector sigmoidal combinator from the original ladder literature:
///   mu(u) = a1*sig(a2*u + a3) + a4*u + a5
///   v(u)  = a6*sig(a7*u + a8) + a9*u + a10
///   z_hat = (z_tilde - mu) * v + mu
/// Initialized to the identity on z_tilde (v = 1, mu = 0).
template <typename Real>
struct VanillaCombinator {
  std::size_t width = 0;
  std::array<Tensor<Real>, 10> a;  // a[0..9] are a1..a10, per-unit vectors

  struct Cache {
    Tensor<Real> u, zt;
    Tensor<Real> sig_mu, sig_v;  // sigmoid activations [batch x width]
    Tensor<Real> mu, v;
    bool valid = false;
  };

  static VanillaCombinator identity_init(std::size_t width) {
    VanillaCombinator g;
    g.width = width;
    for (auto& t : g.a) t = Tensor<Real>::zeros({width});
    g.a[9] = Tensor<Real>::full({width}, Real(1));  // a10 = 1 so v = 1
    return g;
  }

  VanillaCombinator zeros_like() const {
    VanillaCombinator g;
    g.width = width;
    for (std::size_t i = 0; i < 10; ++i) g.a[i] = Tensor<Real>::zeros(a[i].shape);
    return g;
  }

  static Real sigmoid(Real x) {
    return static_cast<Real>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
  }

  Tensor<Real> forward(const Tensor<Real>& u, const Tensor<Real>& zt,
                       Cache* cache = nullptr) const {
    if (!u.same_shape(zt)) throw DimensionError("combinator inputs u and z_tilde differ in shape");
    if (u.rank() != 2 || u.shape[1] != width) throw DimensionError("combinator width mismatch");
    const std::size_t n = u.shape[0];
    Tensor<Real> out = Tensor<Real>::zeros({n, width});
    Tensor<Real> sig_mu = Tensor<Real>::zeros({n, width});
    Tensor<Real> sig_v = Tensor<Real>::zeros({n, width});
    Tensor<Real> mu = Tensor<Real>::zeros({n, width});
    Tensor<Real> v = Tensor<Real>::zeros({n, width});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const Real uv = u(i, j);
        const Real sm = sigmoid(a[1](j) * uv + a[2](j));
        const Real sv = sigmoid(a[6](j) * uv + a[7](j));
        const Real muv = a[0](j) * sm + a[3](j) * uv + a[4](j);
        const Real vv = a[5](j) * sv + a[8](j) * uv + a[9](j);
        sig_mu(i, j) = sm;
        sig_v(i, j) = sv;
        mu(i, j) = muv;
        v(i, j) = vv;
        out(i, j) = (zt(i, j) - muv) * vv + muv;
      }
    if (cache) {
      cache->u = u;
      cache->zt = zt;
      cache->sig_mu = std::move(sig_mu);
      cache->sig_v = std::move(sig_v);
      cache->mu = std::move(mu);
      cache->v = std::move(v);
      cache->valid = true;
    }
    return out;
  }

  void backward(const Tensor<Real>& grad_out, const Cache& cache, VanillaCombinator& grad,
                Tensor<Real>& du, Tensor<Real>& dzt) const {
    if (!cache.valid) throw StateError("combinator backward requires a cached forward pass");
    const std::size_t n = grad_out.shape[0];
    if (du.size() == 0) du = Tensor<Real>::zeros(grad_out.shape);
    if (dzt.size() == 0) dzt = Tensor<Real>::zeros(grad_out.shape);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const Real g = grad_out(i, j);
        if (g == Real(0)) continue;
        const Real uv = cache.u(i, j), zv = cache.zt(i, j);
        const Real sm = cache.sig_mu(i, j), sv = cache.sig_v(i, j);
        const Real muv = cache.mu(i, j), vv = cache.v(i, j);
        const Real dmu = g * (Real(1) - vv);
        const Real dv = g * (zv - muv);
        dzt(i, j) += g * vv;
        grad.a[0](j) += dmu * sm;
        const Real dsm = dmu * a[0](j) * sm * (Real(1) - sm);
        grad.a[1](j) += dsm * uv;
        grad.a[2](j) += dsm;
        grad.a[3](j) += dmu * uv;
        grad.a[4](j) += dmu;
        grad.a[5](j) += dv * sv;
        const Real dsv = dv * a[5](j) * sv * (Real(1) - sv);
        grad.a[6](j) += dsv * uv;
        grad.a[7](j) += dsv;
        grad.a[8](j) += dv * uv;
        grad.a[9](j) += dv;
        du(i, j) += dsm * a[1](j) + dsv * a[6](j) + dmu * a[3](j) + dv * a[8](j);
      }
  }

  std::vector<ParamRef<Real>> parameters(const std::string& prefix) {
    std::vector<ParamRef<Real>> out;
    for (std::size_t i = 0; i < 10; ++i)
      out.push_back({prefix + ".a" + std::to_string(i + 1), &a[i]});
    return out;
  }
};

/// Kind-erased combinator used by the model containers.
template <typename Real>
struct Combinator {
  std::variant<MlpCombinator<Real>, VanillaCombinator<Real>> impl;

  struct Cache {
    std::variant<typename MlpCombinator<Real>::Cache, typename VanillaCombinator<Real>::Cache> c;
  };

  static Combinator identity_init(CombinatorKind kind, std::size_t width,
                                  std::size_t mlp_hidden = 4) {
    Combinator c;
    if (kind == CombinatorKind::PerUnitMlp)
      c.impl = MlpCombinator<Real>::identity_init(width, mlp_hidden);
    else
      c.impl = VanillaCombinator<Real>::identity_init(width);
    return c;
  }

  Combinator zeros_like() const {
    Combinator c;
    if (auto* m = std::get_if<MlpCombinator<Real>>(&impl))
      c.impl = m->zeros_like();
    else
      c.impl = std::get<VanillaCombinator<Real>>(impl).zeros_like();
    return c;
  }

  CombinatorKind kind() const {
    return std::holds_alternative<MlpCombinator<Real>>(impl) ? CombinatorKind::PerUnitMlp
                                                             : CombinatorKind::Vanilla;
  }

  Tensor<Real> forward(const Tensor<Real>& u, const Tensor<Real>& zt,
                       Cache* cache = nullptr) const {
    if (auto* m = std::get_if<MlpCombinator<Real>>(&impl)) {
      typename MlpCombinator<Real>::Cache local;
      auto* dst =
          cache ? &(cache->c.template emplace<typename MlpCombinator<Real>::Cache>()) : &local;
      return m->forward(u, zt, dst);
    }
    const auto& v = std::get<VanillaCombinator<Real>>(impl);
    typename VanillaCombinator<Real>::Cache local;
    auto* dst =
        cache ? &(cache->c.template emplace<typename VanillaCombinator<Real>::Cache>()) : &local;
    return v.forward(u, zt, dst);
  }

  void backward(const Tensor<Real>& grad_out, const Cache& cache, Combinator& grad,
                Tensor<Real>& du, Tensor<Real>& dzt) const {
    if (auto* m = std::get_if<MlpCombinator<Real>>(&impl)) {
      m->backward(grad_out, std::get<typename MlpCombinator<Real>::Cache>(cache.c),
                  std::get<MlpCombinator<Real>>(grad.impl), du, dzt);
      return;
    }
    std::get<VanillaCombinator<Real>>(impl).backward(
        grad_out, std::get<typename VanillaCombinator<Real>::Cache>(cache.c),
        std::get<VanillaCombinator<Real>>(grad.impl), du, dzt);
  }

  std::vector<ParamRef<Real>> parameters(const std::string& prefix) {
    if (auto* m = std::get_if<MlpCombinator<Real>>(&impl)) return m->parameters(prefix);
    return std::get<VanillaCombinator<Real>>(impl).parameters(prefix);
  }
};

}  // namespace ladder

#endif  // LADDER_COMBINATOR_HPP_
