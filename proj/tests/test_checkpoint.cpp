#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "ladder/checkpoint.hpp"
#include "ladder/train.hpp"

using namespace ladder;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/ladder_ckpt_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.variant = SystemVariant::LadLStl;
  cfg.hidden = {8, 6};
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 7;
  return cfg;
}

DataSet tiny_task() {
  SynthSpec spec;
  spec.n_labeled = 24;
  spec.n_unlabeled = 24;
  spec.n_dev = 8;
  spec.n_test = 8;
  spec.feature_dim = 10;
  spec.latent_dim = 3;
  spec.seed = 5;
  return synth_generate(spec).data;
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("save/load round trip preserves predictions bitwise") {
  auto result = train_on(tiny_config(), tiny_task());
  TempFile f("roundtrip.ckpt");
  checkpoint_save(result.best, f.path);
  Checkpoint loaded = checkpoint_load(f.path);

  CHECK(loaded.config_text == result.best.config_text);
  CHECK(loaded.optimizer_step == result.best.optimizer_step);
  CHECK(loaded.best_epoch == result.best.best_epoch);
  REQUIRE(loaded.tensors.size() == result.best.tensors.size());
  for (std::size_t k = 0; k < loaded.tensors.size(); ++k) {
    CHECK(loaded.tensors[k].name == result.best.tensors[k].name);
    for (std::size_t i = 0; i < loaded.tensors[k].value.size(); ++i)
      CHECK(loaded.tensors[k].value.data[i] == result.best.tensors[k].value.data[i]);
  }

  auto model_a = restore_model(result.best);
  auto model_b = restore_model(loaded);
  auto ds = tiny_task();
  auto test = ds.indices_of(Split::Test);
  auto pa = predict(model_a, ds, test);
  auto pb = predict(model_b, ds, test);
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i][0] == pb[i][0]);  // bitwise equality through the float path
}

TEST_CASE("optimizer state round-trips bit-exactly") {
  auto result = train_on(tiny_config(), tiny_task());
  TempFile f("optstate.ckpt");
  checkpoint_save(result.best, f.path);
  Checkpoint loaded = checkpoint_load(f.path);
  auto restored = restore_model(loaded);
  auto params = restored.bundle.parameters();
  for (const auto& p : params) {
    const auto* m = loaded.find("opt.m." + p.name);
    const auto* n = loaded.find("opt.n." + p.name);
    REQUIRE(m != nullptr);
    REQUIRE(n != nullptr);
    const auto* m0 = result.best.find("opt.m." + p.name);
    for (std::size_t i = 0; i < m->value.size(); ++i)
      CHECK(m->value.data[i] == m0->value.data[i]);
  }
}

TEST_CASE("corrupting any byte breaks the digest") {
  auto result = train_on(tiny_config(), tiny_task());
  TempFile f("corrupt.ckpt");
  checkpoint_save(result.best, f.path);

  std::ifstream in(f.path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  std::ofstream out(f.path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(checkpoint_load(f.path), CheckpointError);
}

TEST_CASE("version mismatch and truncation are rejected") {
  auto result = train_on(tiny_config(), tiny_task());
  result.best.version = 99;
  TempFile f("version.ckpt");
  checkpoint_save(result.best, f.path);
  CHECK_THROWS_AS(checkpoint_load(f.path), CheckpointError);

  result.best.version = kCheckpointVersion;
  checkpoint_save(result.best, f.path);
  std::ifstream in(f.path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(f.path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(checkpoint_load(f.path), CheckpointError);
}

TEST_CASE("the committed golden checkpoint loads to the frozen values") {
#include "golden/golden_expected.inc"
  const std::string path = std::string(LADDER_TEST_DIR) + "/golden/model.ckpt";
  Checkpoint ckpt = checkpoint_load(path);
  auto model = restore_model(ckpt);

  // spot-check frozen bit patterns of stored tensors
  for (const auto& probe : kGoldenTensorProbes) {
    const NamedTensor* t = ckpt.find(probe.name);
    REQUIRE(t != nullptr);
    std::uint32_t bits;
    std::memcpy(&bits, &t->value.data[probe.index], 4);
    CHECK(bits == probe.bits);
  }

  // frozen predictions on a deterministic input
  DataSet ds = synth_generate(kGoldenSynthSpec).data;
  auto preds = predict(model, ds, ds.indices_of(Split::Test));
  REQUIRE(preds.size() >= kGoldenPredictionCount);
  for (std::size_t i = 0; i < kGoldenPredictionCount; ++i) {
    const float got = static_cast<float>(preds[i][kGoldenTargetAttribute]);
    std::uint32_t bits;
    std::memcpy(&bits, &got, 4);
    CHECK(bits == kGoldenPredictionBits[i]);
  }
}

TEST_SUITE_END();
