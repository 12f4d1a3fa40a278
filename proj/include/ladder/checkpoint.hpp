#ifndef LADDER_CHECKPOINT_HPP_
#define LADDER_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ladder/data.hpp"
#include "ladder/tensor.hpp"

namespace ladder {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

/// Everything needed to reproduce predictions bit-exactly: the run
/// configuration echo, every model/optimizer tensor in canonical
/// little-endian float32, the normalization statistics, and the best-dev
/// selection record. Files carry a whole-payload FNV-1a digest.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::vector<NamedTensor> tensors;
  std::uint64_t optimizer_step = 0;
  NormStats norm;
  double best_dev_ccc = 0.0;
  std::int64_t best_epoch = -1;
  std::uint32_t target_attribute = 0;

  const NamedTensor* find(const std::string& name) const;
};

void checkpoint_save(const Checkpoint& ckpt, const std::string& path);
Checkpoint checkpoint_load(const std::string& path);

}  // namespace ladder

#endif  // LADDER_CHECKPOINT_HPP_
