#include <doctest.h>

#include "baseline_ref.hpp"
#include "gradcheck.hpp"
#include "ladder/ladder.hpp"
#include "ladder/optimizer.hpp"

using namespace ladder;

namespace {

LadderConfig<double> toy_config(std::size_t heads = 1, double sigma = 0.5, double lambda = 1.0,
                                double input_dropout = 0.0,
                                CombinatorKind kind = CombinatorKind::PerUnitMlp) {
  LadderConfig<double> cfg;
  cfg.input_width = 6;
  cfg.hidden_widths = {5, 4};
  cfg.head_count = heads;
  cfg.noise_sigma = sigma;
  cfg.lambda.assign(3, lambda);
  cfg.dropout_rates = {input_dropout, 0.0};
  cfg.combinator_kind = kind;
  return cfg;
}

/// Spread parameters away from their (partly zero) initialization so the
/// finite-difference probes exercise every path.
void randomize(LadderModel<double>& model, std::uint64_t seed, double scale = 0.2) {
  RngStream rng(seed);
  for (auto& ref : model.parameters())
    for (double& v : ref.value->data) v += scale * rng.next_gaussian();
}

Tensor<double> toy_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_gaussian<double>({n, d}, 1.0, rng);
}

Tensor<double> toy_labels(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_gaussian<double>({n, 3}, 1.0, rng);
}

}  // namespace

TEST_SUITE_BEGIN("ladder");

TEST_CASE("noiseless collapse: noisy pre-activations equal clean ones") {
  RngStream rng(1);
  auto model = LadderModel<double>::init(toy_config(1, 0.0, 1.0, 0.0), rng);
  randomize(model, 2);
  auto x = toy_batch(8, 6, 3);
  RngStream noise_rng(4);
  auto noisy = noisy_encode(model, x, Mode::Train, noise_rng);
  auto clean = clean_encode(model, x, Mode::Train, false);
  for (std::size_t l = 0; l <= model.depth(); ++l)
    for (std::size_t i = 0; i < clean.z[l].size(); ++i)
      CHECK(noisy.z_tilde[l].data[i] == clean.z[l].data[i]);
  for (std::size_t i = 0; i < clean.head_out.size(); ++i)
    CHECK(noisy.head_out.data[i] == clean.head_out.data[i]);
}

TEST_CASE("identity pipeline: one layer, identity weights, standardized input") {
  LadderConfig<double> cfg;
  cfg.input_width = 4;
  cfg.hidden_widths = {4};
  cfg.head_count = 1;
  cfg.noise_sigma = 0.0;
  cfg.lambda = {1.0, 1.0};
  cfg.dropout_rates = {0.0};
  RngStream rng(5);
  auto model = LadderModel<double>::init(cfg, rng);
  model.encoder[0].weight = Tensor<double>::identity(4);
  model.encoder[0].bias = Tensor<double>::zeros({4});

  // Input columns with exact zero mean and unit biased variance.
  auto x = Tensor<double>::zeros({4, 4});
  const double vals[4] = {-1.0, 1.0, -1.0, 1.0};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = vals[(i + j) % 4];
  RngStream noise_rng(6);
  auto noisy = noisy_encode(model, x, Mode::Train, noise_rng);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(noisy.z_tilde[1].data[i] == doctest::Approx(x.data[i]).epsilon(1e-4));
}

TEST_CASE("noisy input layer carries zero-mean corruption") {
  RngStream rng(7);
  auto model = LadderModel<double>::init(toy_config(1, std::sqrt(0.3)), rng);
  auto x = toy_batch(400, 6, 8);
  RngStream noise_rng(9);
  auto noisy = noisy_encode(model, x, Mode::Train, noise_rng);
  double mean = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += noisy.z_tilde[0].data[i] - x.data[i];
  mean /= static_cast<double>(x.size());
  CHECK(std::fabs(mean) < 0.01);
}

TEST_CASE("clean encoder is deterministic and matches eval-mode noisy encoder") {
  RngStream rng(10);
  auto model = LadderModel<double>::init(toy_config(3, 0.9, 1.0, 0.2), rng);
  randomize(model, 11);
  // Running stats come from a train-mode pass first.
  auto x = toy_batch(16, 6, 12);
  clean_encode(model, x, Mode::Train, true);

  auto a = clean_encode(model, x, Mode::Eval, false);
  auto b = clean_encode(model, x, Mode::Eval, false);
  for (std::size_t i = 0; i < a.head_out.size(); ++i)
    CHECK(a.head_out.data[i] == b.head_out.data[i]);

  RngStream noise_rng(13);
  auto noisy = noisy_encode(model, x, Mode::Eval, noise_rng);
  for (std::size_t i = 0; i < a.head_out.size(); ++i)
    CHECK(noisy.head_out.data[i] == a.head_out.data[i]);
}

TEST_CASE("decode: structural counts, identity pass-through, mirrored widths") {
  LadderConfig<double> cfg;
  cfg.input_width = 3;
  cfg.hidden_widths = {5};
  cfg.head_count = 1;
  cfg.noise_sigma = 0.4;
  cfg.lambda = {1.0, 1.0};
  cfg.dropout_rates = {0.0};
  RngStream rng(14);
  auto model = LadderModel<double>::init(cfg, rng);

  auto x = toy_batch(6, 3, 15);
  RngStream noise_rng(16);
  auto noisy = noisy_encode(model, x, Mode::Train, noise_rng);
  auto dec = decode(model, noisy);

  // one-layer model reconstructs exactly two levels: hidden and input
  CHECK(model.decoder.size() == 2);
  CHECK(dec.z_hat[0].size() > 0);
  CHECK(dec.z_hat[1].size() > 0);

  // identity-initialized combinators pass the lateral z_tilde through
  for (std::size_t l = 0; l <= 1; ++l)
    for (std::size_t i = 0; i < dec.z_hat[l].size(); ++i)
      CHECK(dec.z_hat[l].data[i] == doctest::Approx(noisy.z_tilde[l].data[i]).epsilon(1e-12));

  // u mirrors the encoder widths level by level
  CHECK(dec.u[0].shape == std::vector<std::size_t>{6, 3});
  CHECK(dec.u[1].shape == std::vector<std::size_t>{6, 5});
  CHECK(noisy.z_tilde[1].shape == dec.u[1].shape);
}

TEST_CASE("decode requires a completed noisy pass") {
  RngStream rng(17);
  auto model = LadderModel<double>::init(toy_config(), rng);
  NoisyPass<double> empty;
  CHECK_THROWS_AS(decode(model, empty), StateError);
}

TEST_CASE("reconstruction cost: exact match, zero weights, hand case") {
  std::vector<Tensor<double>> z_hat{Tensor<double>::matrix(1, 2, {1.0, -1.0})};
  std::vector<Tensor<double>> z{Tensor<double>::matrix(1, 2, {0.0, 0.0})};
  std::vector<Tensor<double>> mean{Tensor<double>::zeros({2})};
  std::vector<Tensor<double>> std_{Tensor<double>::full({2}, 1.0)};

  CHECK(reconstruction_cost(z, z, mean, std_, {1.0}, 0) == 0.0);
  CHECK(reconstruction_cost(z_hat, z, mean, std_, {0.0}, 0) == 0.0);
  CHECK(reconstruction_cost(z_hat, z, mean, std_, {1.0}, 0) == doctest::Approx(1.0));
}

TEST_CASE("supervised cost: multitask corner weights select single attributes") {
  RngStream rng(18);
  auto head_out = sample_gaussian<double>({12, 3}, 1.0, rng);
  auto labels = sample_gaussian<double>({12, 3}, 1.0, rng);

  auto column_loss = [&](std::size_t attr) {
    Tensor<double> pred = Tensor<double>::zeros({12});
    Tensor<double> truth = Tensor<double>::zeros({12});
    for (std::size_t i = 0; i < 12; ++i) {
      pred(i) = head_out(i, attr);
      truth(i) = labels(i, attr);
    }
    return 1.0 - ccc(pred, truth);
  };

  CostWeights arousal_only{1.0, 0.0, 0};
  CHECK(supervised_cost(head_out, labels, arousal_only) == doctest::Approx(column_loss(0)));
  CostWeights valence_only{0.0, 1.0, 1};
  CHECK(supervised_cost(head_out, labels, valence_only) == doctest::Approx(column_loss(1)));
  CostWeights dominance_only{0.0, 0.0, 2};
  CHECK(supervised_cost(head_out, labels, dominance_only) == doctest::Approx(column_loss(2)));

  CostWeights perfect{0.3, 0.4, 0};
  CHECK(supervised_cost(labels, labels, perfect) == doctest::Approx(0.0).epsilon(1e-12));

  CostWeights invalid{0.8, 0.5, 0};
  CHECK_THROWS_AS(supervised_cost(head_out, labels, invalid), ParameterError);
}

TEST_CASE("ladder cost on an unlabeled batch is reconstruction only") {
  RngStream rng(19);
  auto model = LadderModel<double>::init(toy_config(1, 0.5, 1.0), rng);
  randomize(model, 20);
  auto x = toy_batch(8, 6, 21);
  RngStream noise_rng(22);
  auto result = ladder_cost(model, x, static_cast<const Tensor<double>*>(nullptr), CostWeights{}, noise_rng, false);
  CHECK(result.supervised == 0.0);
  CHECK(result.reconstruction > 0.0);
  CHECK(result.cost == result.reconstruction);
  // no gradient reaches the supervised heads from unlabeled batches
  for (const auto& head : result.grads.heads) {
    for (double v : head.weight.data) CHECK(v == 0.0);
    for (double v : head.bias.data) CHECK(v == 0.0);
  }
}

TEST_CASE("collapse: sigma 0, lambda 0, no dropout equals the plain encoder cost") {
  for (std::size_t heads : {std::size_t(1), std::size_t(3)}) {
    RngStream rng(23 + heads);
    auto model = LadderModel<double>::init(toy_config(heads, 0.0, 0.0, 0.0), rng);
    randomize(model, 24 + heads);
    auto x = toy_batch(10, 6, 25);
    auto labels = toy_labels(10, 26);
    CostWeights weights{0.3, 0.3, 0};
    RngStream noise_rng(27);
    auto result = ladder_cost(model, x, &labels, weights, noise_rng, false);
    const double baseline = baseline_ref::plain_encoder_cost(model, x, labels, weights);
    CHECK(std::fabs(static_cast<double>(result.cost) - baseline) < 1e-10);
  }
}

TEST_CASE("full-model gradients match finite differences with frozen targets") {
  struct Scenario {
    std::size_t heads;
    CombinatorKind kind;
    double dropout;
  };
  const Scenario scenarios[] = {
      {1, CombinatorKind::PerUnitMlp, 0.0},
      {3, CombinatorKind::PerUnitMlp, 0.15},
      {1, CombinatorKind::Vanilla, 0.0},
  };
  for (const auto& s : scenarios) {
    CAPTURE(s.heads);
    RngStream rng(31);
    auto model = LadderModel<double>::init(toy_config(s.heads, 0.4, 0.7, s.dropout, s.kind), rng);
    randomize(model, 32);
    auto x = toy_batch(4, 6, 33);
    auto labels = toy_labels(4, 34);
    CostWeights weights{0.5, 0.2, 0};

    auto targets = clean_encode(model, x, Mode::Train, false);
    auto cost = [&]() {
      RngStream noise_rng(35);
      return static_cast<double>(
          ladder_cost_with_targets(model, x, &labels, weights, noise_rng, targets).cost);
    };
    RngStream noise_rng(35);
    auto result = ladder_cost_with_targets(model, x, &labels, weights, noise_rng, targets);
    CHECK(gradcheck::check_params(model.parameters(), result.grads.parameters(), cost) < 1e-4);
  }
}

TEST_CASE("targets are constants: head gradients ignore target perturbations") {
  RngStream rng(41);
  auto model = LadderModel<double>::init(toy_config(1, 0.4, 1.0), rng);
  randomize(model, 42);
  auto x = toy_batch(6, 6, 43);
  auto labels = toy_labels(6, 44);
  CostWeights weights{1.0, 0.0, 0};

  auto targets = clean_encode(model, x, Mode::Train, false);
  RngStream r1(45);
  auto base = ladder_cost_with_targets(model, x, &labels, weights, r1, targets);

  auto shifted = targets;
  for (auto& t : shifted.z)
    for (double& v : t.data) v += 0.37;
  for (std::size_t l = 1; l < shifted.mean.size(); ++l)
    for (double& v : shifted.mean[l].data) v += 0.11;
  RngStream r2(45);
  auto perturbed = ladder_cost_with_targets(model, x, &labels, weights, r2, shifted);

  for (std::size_t h = 0; h < model.heads.size(); ++h) {
    for (std::size_t i = 0; i < base.grads.heads[h].weight.size(); ++i)
      CHECK(base.grads.heads[h].weight.data[i] == perturbed.grads.heads[h].weight.data[i]);
  }
  // and the supervised component itself is untouched
  CHECK(base.supervised == perturbed.supervised);
}

TEST_CASE("the implemented gradient is the stop-gradient one, not the full derivative") {
  RngStream rng(51);
  auto model = LadderModel<double>::init(toy_config(1, 0.4, 1.0), rng);
  randomize(model, 52);
  auto x = toy_batch(4, 6, 53);
  auto labels = toy_labels(4, 54);
  CostWeights weights{1.0, 0.0, 0};

  auto targets = clean_encode(model, x, Mode::Train, false);
  RngStream r(55);
  auto analytic = ladder_cost_with_targets(model, x, &labels, weights, r, targets);

  // Finite differences of the FULL cost (targets recomputed each evaluation)
  // include flow through the target branch and must disagree somewhere.
  auto full_cost = [&]() {
    RngStream noise_rng(55);
    return static_cast<double>(ladder_cost(model, x, &labels, weights, noise_rng, false).cost);
  };
  double worst = 0;
  auto params = model.parameters();
  auto grads = analytic.grads.parameters();
  // encoder weights feed both branches; probe the first layer
  worst = gradcheck::check_tensor(*params[0].value, *grads[0].value, full_cost);
  CHECK(worst > 1e-3);
}

TEST_CASE("unsupervised training alone halves the reconstruction cost") {
  LadderConfig<double> cfg;
  cfg.input_width = 16;
  cfg.hidden_widths = {12, 8};
  cfg.head_count = 1;
  cfg.noise_sigma = std::sqrt(0.3);
  cfg.lambda = {1.0, 1.0, 1.0};
  cfg.dropout_rates = {0.0, 0.0};
  RngStream rng(61);
  auto model = LadderModel<double>::init(cfg, rng);

  RngStream data_rng(62);
  auto x = sample_gaussian<double>({32, 16}, 1.0, data_rng);
  NadamOptimizer<double> opt(NadamConfig{1e-3, 0.9, 0.999, 1e-8});
  RngStream noise_rng(63);

  double first = -1, last = -1;
  for (int step = 0; step < 200; ++step) {
    auto result = ladder_cost(model, x, static_cast<const Tensor<double>*>(nullptr), CostWeights{}, noise_rng, false);
    if (step == 0) first = result.reconstruction;
    last = result.reconstruction;
    auto params = model.parameters();
    auto grads = result.grads.parameters();
    std::vector<Tensor<double>*> p(params.size());
    std::vector<const Tensor<double>*> g(grads.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      p[k] = params[k].value;
      g[k] = grads[k].value;
    }
    opt.step(p, g);
  }
  CHECK(last < 0.5 * first);
}

TEST_CASE("ladder cost is deterministic under a fixed seed") {
  RngStream rng(71);
  auto model = LadderModel<double>::init(toy_config(1, 0.6, 1.0, 0.2), rng);
  randomize(model, 72);
  auto x = toy_batch(8, 6, 73);
  auto labels = toy_labels(8, 74);
  CostWeights weights{1.0, 0.0, 0};
  RngStream r1(75), r2(75);
  auto a = ladder_cost(model, x, &labels, weights, r1, false);
  auto b = ladder_cost(model, x, &labels, weights, r2, false);
  CHECK(a.cost == b.cost);
  auto ga = a.grads.parameters();
  auto gb = b.grads.parameters();
  for (std::size_t k = 0; k < ga.size(); ++k)
    for (std::size_t i = 0; i < ga[k].value->size(); ++i)
      CHECK(ga[k].value->data[i] == gb[k].value->data[i]);
}

TEST_SUITE_END();
