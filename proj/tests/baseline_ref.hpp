#ifndef LADDER_TESTS_BASELINE_REF_HPP_
#define LADDER_TESTS_BASELINE_REF_HPP_

#include "ladder/cnn.hpp"
#include "ladder/ladder.hpp"

namespace baseline_ref {

/// Independent baseline-cost reference composed from the layer primitives:
/// dense -> batch-statistics normalization -> gamma/beta -> ReLU per layer,
/// heads on the top pre-activation, weighted 1-CCC. The ladder cost with
/// sigma = 0, lambda = 0 and dropout off must collapse onto this number.
template <typename Real>
double plain_encoder_cost(ladder::LadderModel<Real>& model, const ladder::Tensor<Real>& x,
                          const ladder::Tensor<Real>& labels, const ladder::CostWeights& weights) {
  using namespace ladder;
  Tensor<Real> h = x;
  Tensor<Real> z_top;
  for (std::size_t l = 1; l <= model.depth(); ++l) {
    Tensor<Real> pre = model.encoder[l - 1].forward(h);
    Tensor<Real> z = model.encoder_norm[l - 1].normalize(pre, Mode::Train, nullptr, false);
    if (l == model.depth()) z_top = z;
    h = relu_forward(model.encoder_norm[l - 1].scale_bias(z));
  }
  Tensor<Real> head_out = Tensor<Real>::zeros({x.shape[0], model.heads.size()});
  for (std::size_t hd = 0; hd < model.heads.size(); ++hd) {
    Tensor<Real> y = model.heads[hd].forward(z_top);
    for (std::size_t i = 0; i < y.shape[0]; ++i) head_out(i, hd) = y(i, 0);
  }
  return supervised_cost(head_out, labels, weights);
}

/// Same reference for the frame-level model: conv stack, flatten, plain fc.
template <typename Real>
double plain_cnn_cost(ladder::CnnModel<Real>& model, const ladder::Tensor<Real>& x,
                      const ladder::Tensor<Real>& labels, const ladder::CostWeights& weights) {
  ladder::Tensor<Real> flat = ladder::conv_stack_forward(model, x);
  return plain_encoder_cost(model.top, flat, labels, weights);
}

}  // namespace baseline_ref

#endif  // LADDER_TESTS_BASELINE_REF_HPP_
