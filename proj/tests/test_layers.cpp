#include <doctest.h>

#include "gradcheck.hpp"
#include "ladder/layers.hpp"

using namespace ladder;

namespace {

// Linear probe cost sum(R * f(x)) so that d cost / d f = R.
Tensor<double> random_probe(const std::vector<std::size_t>& shape, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_gaussian<double>(shape, 1.0, rng);
}

double probe_sum(const Tensor<double>& y, const Tensor<double>& probe) {
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y.data[i] * probe.data[i];
  return acc;
}

// Inputs bounded away from zero so ReLU kinks cannot sit inside the
// finite-difference window.
Tensor<double> kink_safe_input(std::vector<std::size_t> shape, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor<double> x = sample_gaussian<double>(std::move(shape), 1.0, rng);
  for (double& v : x.data)
    if (std::fabs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("layers");

TEST_CASE("dense forward: identity, constant, hand case") {
  DenseLayer<double> id{Tensor<double>::identity(3), Tensor<double>::zeros({3})};
  auto x = Tensor<double>::matrix(2, 3, {1, -2, 3, 4, 5, -6});
  auto y = id.forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == x.data[i]);

  DenseLayer<double> constant{Tensor<double>::zeros({2, 3}), Tensor<double>::vector({7, -1})};
  auto yc = constant.forward(x);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(yc(i, 0) == 7.0);
    CHECK(yc(i, 1) == -1.0);
  }

  DenseLayer<double> hand{Tensor<double>::matrix(1, 2, {1, 1}), Tensor<double>::vector({1})};
  auto yh = hand.forward(Tensor<double>::matrix(1, 2, {2, 3}));
  CHECK(yh(0, 0) == 6.0);
}

TEST_CASE("dense forward rejects width mismatch") {
  DenseLayer<double> layer{Tensor<double>::zeros({4, 3}), Tensor<double>::zeros({4})};
  CHECK_THROWS_AS(layer.forward(Tensor<double>::zeros({2, 5})), DimensionError);
}

TEST_CASE("dense backward: identity Jacobian and finite differences") {
  DenseLayer<double> id{Tensor<double>::identity(4), Tensor<double>::zeros({4})};
  typename DenseLayer<double>::Cache cache;
  auto x = kink_safe_input({3, 4}, 1);
  id.forward(x, &cache);
  auto upstream = random_probe({3, 4}, 2);
  auto grad = id.zeros_like();
  auto dx = id.backward(upstream, cache, grad);
  for (std::size_t i = 0; i < dx.size(); ++i) CHECK(dx.data[i] == upstream.data[i]);

  RngStream init(3);
  DenseLayer<double> layer = DenseLayer<double>::glorot(16, 8, init);
  auto input = kink_safe_input({8, 16}, 4);
  auto probe = random_probe({8, 8}, 5);
  auto cost = [&]() {
    return probe_sum(layer.forward(input), probe);
  };
  typename DenseLayer<double>::Cache c2;
  layer.forward(input, &c2);
  auto grads = layer.zeros_like();
  auto dinput = layer.backward(probe, c2, grads);

  CHECK(gradcheck::check_tensor(layer.weight, grads.weight, cost) < 1e-4);
  CHECK(gradcheck::check_tensor(layer.bias, grads.bias, cost) < 1e-4);
  CHECK(gradcheck::check_tensor(input, dinput, cost) < 1e-4);
}

TEST_CASE("dense backward without forward is a state error") {
  DenseLayer<double> layer{Tensor<double>::identity(2), Tensor<double>::zeros({2})};
  typename DenseLayer<double>::Cache cache;  // never filled
  auto grads = layer.zeros_like();
  CHECK_THROWS_AS(layer.backward(Tensor<double>::zeros({1, 2}), cache, grads), StateError);
}

TEST_CASE("batchnorm forward: hand case, fixed point, gamma zero") {
  auto bn = BatchNormLayer<double>::init(1);
  bn.epsilon = 1e-12;
  auto y = bn.forward(Tensor<double>::matrix(2, 1, {1, 3}), Mode::Train, nullptr, false);
  CHECK(y(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y(1, 0) == doctest::Approx(1.0).epsilon(1e-6));

  // Zero-mean unit-variance input is a fixed point up to epsilon.
  auto bn2 = BatchNormLayer<double>::init(2);
  auto x = Tensor<double>::matrix(4, 2, {1, -1, -1, 1, 1, 1, -1, -1});
  auto y2 = bn2.forward(x, Mode::Train, nullptr, false);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y2.data[i] == doctest::Approx(x.data[i]).epsilon(1e-4));

  auto bn3 = BatchNormLayer<double>::init(2);
  bn3.gamma = Tensor<double>::zeros({2});
  bn3.beta = Tensor<double>::vector({5, -2});
  auto y3 = bn3.forward(x, Mode::Train, nullptr, false);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(y3(i, 0) == 5.0);
    CHECK(y3(i, 1) == -2.0);
  }
}

TEST_CASE("batchnorm: train output is standardized for any batch >= 2") {
  RngStream rng(17);
  auto bn = BatchNormLayer<double>::init(6);
  auto x = sample_gaussian<double>({5, 6}, 3.0, rng);
  for (std::size_t j = 0; j < 6; ++j) x(0, j) += 10.0;  // nonzero means
  typename BatchNormLayer<double>::NormCache cache;
  auto z = bn.normalize(x, Mode::Train, &cache, false);
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 5; ++i) mean += z(i, j);
    mean /= 5;
    for (std::size_t i = 0; i < 5; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
    var /= 5;
    CHECK(std::fabs(mean) < 1e-6);
    CHECK(std::fabs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("batchnorm: batch of one in train mode is a degenerate-batch error") {
  auto bn = BatchNormLayer<double>::init(2);
  CHECK_THROWS_AS(bn.forward(Tensor<double>::zeros({1, 2}), Mode::Train), DegenerateBatchError);
}

TEST_CASE("batchnorm eval uses running statistics") {
  auto bn = BatchNormLayer<double>::init(1);
  bn.running_mean = Tensor<double>::vector({2.0});
  bn.running_var = Tensor<double>::vector({4.0});
  bn.epsilon = 0.0;
  auto y = bn.forward(Tensor<double>::matrix(1, 1, {4.0}), Mode::Eval);
  CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("batchnorm running statistics update with momentum") {
  auto bn = BatchNormLayer<double>::init(1);
  bn.momentum = 0.5;
  auto x = Tensor<double>::matrix(2, 1, {0.0, 2.0});  // mean 1, biased var 1
  bn.normalize(x, Mode::Train, nullptr, true);
  CHECK(bn.running_mean(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bn.running_var(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("batchnorm backward matches finite differences through batch statistics") {
  RngStream rng(23);
  auto bn = BatchNormLayer<double>::init(16);
  bn.gamma = sample_gaussian<double>({16}, 1.0, rng);
  bn.beta = sample_gaussian<double>({16}, 1.0, rng);
  auto x = kink_safe_input({8, 16}, 24);
  auto probe = random_probe({8, 16}, 25);
  auto cost = [&]() {
    return probe_sum(bn.forward(x, Mode::Train, nullptr, false), probe);
  };
  typename BatchNormLayer<double>::Cache cache;
  bn.forward(x, Mode::Train, &cache, false);
  auto grads = bn.zeros_like();
  auto dx = bn.backward(probe, cache, grads);

  CHECK(gradcheck::check_tensor(bn.gamma, grads.gamma, cost) < 1e-4);
  CHECK(gradcheck::check_tensor(bn.beta, grads.beta, cost) < 1e-4);
  CHECK(gradcheck::check_tensor(x, dx, cost) < 1e-4);
}

TEST_CASE("dropout: identity cases and parameter validation") {
  RngStream rng(31);
  auto x = random_probe({4, 4}, 32);
  DropoutLayer<double> off{0.0};
  auto y = off.forward(x, Mode::Train, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == x.data[i]);

  DropoutLayer<double> half{0.5};
  auto ye = half.forward(x, Mode::Eval, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(ye.data[i] == x.data[i]);

  DropoutLayer<double> bad{1.0};
  CHECK_THROWS_AS(bad.forward(x, Mode::Train, rng), ParameterError);
}

TEST_CASE("dropout is unbiased: Monte-Carlo mean of survivors") {
  RngStream rng(37);
  DropoutLayer<double> half{0.5};
  auto ones = Tensor<double>::full({1000, 1000}, 1.0);
  auto y = half.forward(ones, Mode::Train, rng);
  double mean = 0;
  for (double v : y.data) mean += v;
  mean /= static_cast<double>(y.size());
  CHECK(std::fabs(mean - 1.0) < 0.01);
}

TEST_CASE("dropout backward routes through the cached mask") {
  RngStream rng(41);
  DropoutLayer<double> drop{0.3};
  auto x = random_probe({6, 5}, 42);
  typename DropoutLayer<double>::Cache cache;
  auto y = drop.forward(x, Mode::Train, rng, &cache);
  auto upstream = random_probe({6, 5}, 43);
  auto dx = drop.backward(upstream, cache);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(dx.data[i] == upstream.data[i] * cache.mask.data[i]);
  (void)y;

  typename DropoutLayer<double>::Cache empty;
  CHECK_THROWS_AS(drop.backward(upstream, empty), StateError);
}

TEST_CASE("noise layer: sigma zero and clean path are identities") {
  RngStream rng(47);
  auto x = random_probe({3, 7}, 48);
  NoiseLayer<double> silent{0.0};
  auto y = silent.forward(x, true, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == x.data[i]);

  NoiseLayer<double> loud{2.0};
  auto yc = loud.forward(x, false, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(yc.data[i] == x.data[i]);
}

TEST_CASE("noise layer adds variance 0.3 on the noisy path") {
  RngStream rng(53);
  NoiseLayer<double> noise{std::sqrt(0.3)};
  auto x = Tensor<double>::zeros({1000, 1000});
  auto y = noise.forward(x, true, rng);
  double mean = 0;
  for (double v : y.data) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0;
  for (double v : y.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  CHECK(std::fabs(var - 0.3) < 0.01);
}

TEST_CASE("relu backward kills dead units") {
  auto x = Tensor<double>::matrix(1, 4, {-2, -0.5, 0.5, 2});
  ReluCache<double> cache;
  auto y = relu_forward(x, &cache);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == 0.5);
  auto upstream = Tensor<double>::matrix(1, 4, {1, 1, 1, 1});
  auto dx = relu_backward(upstream, cache);
  CHECK(dx(0, 0) == 0.0);
  CHECK(dx(0, 1) == 0.0);
  CHECK(dx(0, 2) == 1.0);
  CHECK(dx(0, 3) == 1.0);
}

TEST_SUITE_END();
