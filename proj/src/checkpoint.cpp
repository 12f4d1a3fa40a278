#include "ladder/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ladder/binio.hpp"

namespace ladder {

namespace {
constexpr char kMagic[4] = {'L', 'D', 'C', 'K'};

void put_size_vector(std::ostream& os, const std::vector<std::size_t>& v) {
  binio::put_u64(os, v.size());
  for (std::size_t e : v) binio::put_u64(os, e);
}

std::vector<std::size_t> get_size_vector(std::istream& is) {
  const std::uint64_t n = binio::get_u64(is);
  std::vector<std::size_t> v(n);
  for (auto& e : v) e = binio::get_u64(is);
  return v;
}

void put_double_vector(std::ostream& os, const std::vector<double>& v) {
  binio::put_u64(os, v.size());
  for (double e : v) binio::put_f64(os, e);
}

std::vector<double> get_double_vector(std::istream& is) {
  const std::uint64_t n = binio::get_u64(is);
  std::vector<double> v(n);
  for (auto& e : v) e = binio::get_f64(is);
  return v;
}
}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void checkpoint_save(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream body;
  body.write(kMagic, 4);
  binio::put_u32(body, ckpt.version);
  binio::put_string(body, ckpt.config_text);

  binio::put_u64(body, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    binio::put_string(body, t.name);
    put_size_vector(body, t.value.shape);
    for (float v : t.value.data) binio::put_f32(body, v);
  }

  binio::put_u64(body, ckpt.optimizer_step);

  binio::put_u64(body, ckpt.norm.input_dim);
  put_double_vector(body, ckpt.norm.mean);
  put_double_vector(body, ckpt.norm.std_dev);
  put_size_vector(body, ckpt.norm.retained);
  put_size_vector(body, ckpt.norm.dropped);
  for (double v : ckpt.norm.label_mean) binio::put_f64(body, v);
  for (double v : ckpt.norm.label_std) binio::put_f64(body, v);

  binio::put_f64(body, ckpt.best_dev_ccc);
  binio::put_u64(body, static_cast<std::uint64_t>(ckpt.best_epoch));
  binio::put_u32(body, ckpt.target_attribute);

  const std::string payload = body.str();
  const std::uint64_t digest = binio::fnv1a(payload.data(), payload.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint file " + path);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  binio::put_u64(out, digest);
  if (!out) throw CheckpointError("failed writing checkpoint file " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 16) throw CheckpointError("checkpoint file " + path + " is truncated");

  const std::string payload = bytes.substr(0, bytes.size() - 8);
  std::istringstream tail(bytes.substr(bytes.size() - 8));
  const std::uint64_t stored_digest = binio::get_u64(tail);
  if (binio::fnv1a(payload.data(), payload.size()) != stored_digest)
    throw CheckpointError("checkpoint digest mismatch: file " + path + " is corrupted");

  std::istringstream body(payload);
  char magic[4];
  body.read(magic, 4);
  if (!body || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("checkpoint file " + path + " has a wrong magic signature");

  Checkpoint ckpt;
  ckpt.version = binio::get_u32(body);
  if (ckpt.version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(ckpt.version) +
                          " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
  ckpt.config_text = binio::get_string(body);

  const std::uint64_t tensor_count = binio::get_u64(body);
  ckpt.tensors.reserve(tensor_count);
  for (std::uint64_t k = 0; k < tensor_count; ++k) {
    NamedTensor t;
    t.name = binio::get_string(body);
    auto shape = get_size_vector(body);
    t.value = Tensor<float>::zeros(shape);
    for (auto& v : t.value.data) v = binio::get_f32(body);
    ckpt.tensors.push_back(std::move(t));
  }

  ckpt.optimizer_step = binio::get_u64(body);

  ckpt.norm.input_dim = binio::get_u64(body);
  ckpt.norm.mean = get_double_vector(body);
  ckpt.norm.std_dev = get_double_vector(body);
  ckpt.norm.retained = get_size_vector(body);
  ckpt.norm.dropped = get_size_vector(body);
  for (auto& v : ckpt.norm.label_mean) v = binio::get_f64(body);
  for (auto& v : ckpt.norm.label_std) v = binio::get_f64(body);

  ckpt.best_dev_ccc = binio::get_f64(body);
  ckpt.best_epoch = static_cast<std::int64_t>(binio::get_u64(body));
  ckpt.target_attribute = binio::get_u32(body);
  return ckpt;
}

}  // namespace ladder
