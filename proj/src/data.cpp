#include "ladder/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ladder/binio.hpp"

namespace ladder {

namespace {

constexpr char kSentenceMagic[4] = {'L', 'D', 'R', 'F'};
constexpr char kFramesMagic[4] = {'L', 'D', 'R', 'S'};
constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || end != begin + s.size())
    throw DataError("malformed number '" + s + "' in " + context);
  return v;
}

void check_unique_ids(const std::vector<std::string>& ids) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw DataError("duplicate sample id '" + id + "'");
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
    case Split::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  if (name == "unlabeled") return Split::Unlabeled;
  throw DataError("unknown split tag '" + name + "'");
}

std::vector<std::size_t> DataSet::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

void DataSet::validate() const {
  const std::size_t n = ids.size();
  if (labels.size() != n || split.size() != n)
    throw DataError("dataset arrays disagree on sample count");
  if (kind == DataKind::Sentence) {
    if (n > 0 && (features.rank() != 2 || features.shape[0] != n || features.shape[1] != feature_dim))
      throw DataError("sentence dataset feature matrix has inconsistent shape");
  } else {
    if (sequences.size() != n) throw DataError("frame dataset sequence count mismatch");
    for (const auto& s : sequences)
      if (s.rank() != 2 || s.shape[0] != feature_dim)
        throw DataError("frame dataset sequence has wrong feature dimension");
  }
  check_unique_ids(ids);
  for (std::size_t i = 0; i < n; ++i) {
    const bool labeled = labels[i].has_value();
    if (split[i] == Split::Unlabeled && labeled)
      throw DataError("unlabeled sample '" + ids[i] + "' carries labels");
    if (split[i] != Split::Unlabeled && !labeled)
      throw DataError("sample '" + ids[i] + "' in split " + split_name(split[i]) +
                      " is missing labels");
  }
}

namespace {

DataSet load_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("feature file " + path + " has no header");
  const auto header = split_line(line);
  if (header.empty() || header[0] != "id")
    throw DataError("feature header must start with an id column");
  const bool frame_kind = header.size() >= 2 && header[1] == "frame";
  const std::size_t d = header.size() - (frame_kind ? 2 : 1);
  if (d == 0) throw DataError("feature file declares no feature columns");

  DataSet ds;
  ds.kind = frame_kind ? DataKind::Frames : DataKind::Sentence;
  ds.feature_dim = d;

  std::vector<double> values;
  std::vector<std::vector<double>> frames_of_current;
  std::string current_id;
  std::size_t row = 1;

  auto flush_sequence = [&]() {
    if (current_id.empty()) return;
    const std::size_t frames = frames_of_current.size();
    Tensor<double> seq = Tensor<double>::zeros({d, frames});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < d; ++j) seq(j, t) = frames_of_current[t][j];
    ds.sequences.push_back(std::move(seq));
    ds.ids.push_back(current_id);
    frames_of_current.clear();
  };

  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row) + " of " + path + " has " +
                      std::to_string(cells.size()) + " columns, expected " +
                      std::to_string(header.size()));
    if (!frame_kind) {
      ds.ids.push_back(cells[0]);
      for (std::size_t j = 0; j < d; ++j)
        values.push_back(parse_number(cells[1 + j], "row " + std::to_string(row)));
    } else {
      if (cells[0] != current_id) {
        flush_sequence();
        current_id = cells[0];
      }
      const auto frame_index =
          static_cast<std::size_t>(parse_number(cells[1], "row " + std::to_string(row)));
      if (frame_index != frames_of_current.size())
        throw DataError("row " + std::to_string(row) + ": frame indices of '" + cells[0] +
                        "' must be consecutive from 0");
      std::vector<double> frame(d);
      for (std::size_t j = 0; j < d; ++j)
        frame[j] = parse_number(cells[2 + j], "row " + std::to_string(row));
      frames_of_current.push_back(std::move(frame));
    }
  }
  if (frame_kind) flush_sequence();

  const std::size_t n = ds.ids.size();
  if (!frame_kind) ds.features = Tensor<double>({n, d}, std::move(values));
  ds.labels.assign(n, std::nullopt);
  ds.split.assign(n, Split::Unlabeled);
  ds.validate();
  return ds;
}

DataSet load_features_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in) throw DataError("feature file " + path + " is truncated");
  DataSet ds;
  if (std::memcmp(magic, kSentenceMagic, 4) == 0)
    ds.kind = DataKind::Sentence;
  else if (std::memcmp(magic, kFramesMagic, 4) == 0)
    ds.kind = DataKind::Frames;
  else
    throw DataError("feature file " + path + " has an unknown magic signature");
  const std::uint32_t version = binio::get_u32(in);
  if (version != kFeatureFormatVersion)
    throw DataError("feature file version " + std::to_string(version) + " unsupported");
  const std::uint64_t n = binio::get_u64(in);
  const std::uint64_t d = binio::get_u64(in);
  ds.feature_dim = d;
  ds.ids.reserve(n);
  if (ds.kind == DataKind::Sentence) {
    ds.features = Tensor<double>::zeros({n, d});
    for (std::uint64_t i = 0; i < n; ++i) {
      ds.ids.push_back(binio::get_string(in));
      for (std::uint64_t j = 0; j < d; ++j) ds.features(i, j) = binio::get_f64(in);
    }
  } else {
    for (std::uint64_t i = 0; i < n; ++i) {
      ds.ids.push_back(binio::get_string(in));
      const std::uint64_t frames = binio::get_u64(in);
      Tensor<double> seq = Tensor<double>::zeros({d, frames});
      for (std::size_t k = 0; k < seq.size(); ++k) seq.data[k] = binio::get_f64(in);
      ds.sequences.push_back(std::move(seq));
    }
  }
  if (!in) throw DataError("feature file " + path + " is truncated");
  ds.labels.assign(n, std::nullopt);
  ds.split.assign(n, Split::Unlabeled);
  ds.validate();
  return ds;
}

void save_features_csv(const DataSet& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature file " + path);
  out.precision(17);
  if (ds.kind == DataKind::Sentence) {
    out << "id";
    for (std::size_t j = 0; j < ds.feature_dim; ++j) out << ",f" << j;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
      out << ds.ids[i];
      for (std::size_t j = 0; j < ds.feature_dim; ++j) out << "," << ds.features(i, j);
      out << "\n";
    }
  } else {
    out << "id,frame";
    for (std::size_t j = 0; j < ds.feature_dim; ++j) out << ",f" << j;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& seq = ds.sequences[i];
      for (std::size_t t = 0; t < seq.shape[1]; ++t) {
        out << ds.ids[i] << "," << t;
        for (std::size_t j = 0; j < ds.feature_dim; ++j) out << "," << seq(j, t);
        out << "\n";
      }
    }
  }
}

void save_features_binary(const DataSet& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path);
  out.write(ds.kind == DataKind::Sentence ? kSentenceMagic : kFramesMagic, 4);
  binio::put_u32(out, kFeatureFormatVersion);
  binio::put_u64(out, ds.size());
  binio::put_u64(out, ds.feature_dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    binio::put_string(out, ds.ids[i]);
    if (ds.kind == DataKind::Sentence) {
      for (std::size_t j = 0; j < ds.feature_dim; ++j) binio::put_f64(out, ds.features(i, j));
    } else {
      const auto& seq = ds.sequences[i];
      binio::put_u64(out, seq.shape[1]);
      for (double v : seq.data) binio::put_f64(out, v);
    }
  }
}

}  // namespace

DataSet load_features(const std::string& path, FileFormat format) {
  return format == FileFormat::Csv ? load_features_csv(path) : load_features_binary(path);
}

void save_features(const DataSet& ds, const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv)
    save_features_csv(ds, path);
  else
    save_features_binary(ds, path);
}

void attach_labels(DataSet& ds, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file " + path);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) index[ds.ids[i]] = i;

  std::string line;
  if (!std::getline(in, line)) throw DataError("label file " + path + " has no header");
  const auto header = split_line(line);
  if (header.size() != 5 || header[0] != "id")
    throw DataError("label header must be id,arousal,valence,dominance,split");
  std::unordered_set<std::string> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 5)
      throw DataError("label row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " columns, expected 5");
    const std::string& id = cells[0];
    auto it = index.find(id);
    if (it == index.end())
      throw DataError("label row " + std::to_string(row) + " references unknown id '" + id + "'");
    if (!seen.insert(id).second)
      throw DataError("duplicate label row for id '" + id + "'");
    const Split s = parse_split(cells[4]);
    ds.split[it->second] = s;
    if (s == Split::Unlabeled) {
      if (!cells[1].empty() || !cells[2].empty() || !cells[3].empty())
        throw DataError("label row " + std::to_string(row) +
                        ": unlabeled samples must leave value fields empty");
      ds.labels[it->second] = std::nullopt;
    } else {
      std::array<double, 3> v{};
      for (std::size_t a = 0; a < 3; ++a)
        v[a] = parse_number(cells[1 + a], "label row " + std::to_string(row));
      ds.labels[it->second] = v;
    }
  }
  ds.validate();
}

void save_labels(const DataSet& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label file " + path);
  out.precision(17);
  out << "id,arousal,valence,dominance,split\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.ids[i] << ",";
    if (ds.labels[i]) {
      const auto& v = *ds.labels[i];
      out << v[0] << "," << v[1] << "," << v[2];
    } else {
      out << ",,";
    }
    out << "," << split_name(ds.split[i]) << "\n";
  }
}

void merge_unlabeled(DataSet& ds, const DataSet& other) {
  if (other.kind != ds.kind || other.feature_dim != ds.feature_dim)
    throw DataError("cannot merge datasets of different kind or dimension");
  if (ds.kind == DataKind::Sentence) {
    Tensor<double> merged = Tensor<double>::zeros({ds.size() + other.size(), ds.feature_dim});
    std::copy(ds.features.data.begin(), ds.features.data.end(), merged.data.begin());
    std::copy(other.features.data.begin(), other.features.data.end(),
              merged.data.begin() + static_cast<std::ptrdiff_t>(ds.features.size()));
    ds.features = std::move(merged);
  } else {
    ds.sequences.insert(ds.sequences.end(), other.sequences.begin(), other.sequences.end());
  }
  for (std::size_t i = 0; i < other.size(); ++i) {
    ds.ids.push_back(other.ids[i]);
    ds.labels.push_back(std::nullopt);
    ds.split.push_back(Split::Unlabeled);
  }
  ds.validate();
}

NormStats fit_znorm(const DataSet& ds) {
  const auto train = ds.indices_of(Split::Train);
  if (train.size() < 2) throw DataError("z-normalization needs at least two train samples");
  NormStats stats;
  stats.input_dim = ds.feature_dim;
  stats.mean.assign(ds.feature_dim, 0.0);
  stats.std_dev.assign(ds.feature_dim, 0.0);

  // Feature moments over train samples (sentence) or all train frames.
  std::size_t count = 0;
  auto accumulate = [&](auto&& get_value, std::size_t n_items) {
    for (std::size_t j = 0; j < ds.feature_dim; ++j) {
      double m = 0;
      for (std::size_t k = 0; k < n_items; ++k) m += get_value(k, j);
      m /= static_cast<double>(n_items);
      double v = 0;
      for (std::size_t k = 0; k < n_items; ++k) {
        const double c = get_value(k, j) - m;
        v += c * c;
      }
      stats.mean[j] = m;
      stats.std_dev[j] = std::sqrt(v / static_cast<double>(n_items));
    }
    count = n_items;
  };

  if (ds.kind == DataKind::Sentence) {
    accumulate([&](std::size_t k, std::size_t j) { return ds.features(train[k], j); },
               train.size());
  } else {
    std::vector<std::pair<std::size_t, std::size_t>> frames;  // (sample, frame)
    for (std::size_t k : train)
      for (std::size_t t = 0; t < ds.sequences[k].shape[1]; ++t) frames.emplace_back(k, t);
    if (frames.size() < 2) throw DataError("z-normalization needs at least two train frames");
    accumulate(
        [&](std::size_t k, std::size_t j) {
          return ds.sequences[frames[k].first](j, frames[k].second);
        },
        frames.size());
  }
  (void)count;

  for (std::size_t j = 0; j < ds.feature_dim; ++j) {
    if (stats.std_dev[j] > 1e-12)
      stats.retained.push_back(j);
    else
      stats.dropped.push_back(j);
  }
  if (stats.retained.empty()) throw DataError("every feature has zero variance on the train split");

  for (std::size_t a = 0; a < 3; ++a) {
    double m = 0;
    for (std::size_t k : train) m += (*ds.labels[k])[a];
    m /= static_cast<double>(train.size());
    double v = 0;
    for (std::size_t k : train) {
      const double c = (*ds.labels[k])[a] - m;
      v += c * c;
    }
    stats.label_mean[a] = m;
    stats.label_std[a] = std::sqrt(v / static_cast<double>(train.size()));
    if (stats.label_std[a] <= 0)
      throw DataError("train labels for attribute " + std::to_string(a) + " are constant");
  }
  return stats;
}

DataSet apply_znorm(const DataSet& ds, const NormStats& stats) {
  if (ds.feature_dim != stats.input_dim)
    throw DataError("normalization stats were fit on a different feature dimension");
  DataSet out;
  out.kind = ds.kind;
  out.feature_dim = stats.retained.size();
  out.ids = ds.ids;
  out.split = ds.split;
  out.labels.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i]) {
      std::array<double, 3> v{};
      for (std::size_t a = 0; a < 3; ++a) v[a] = normalize_label(stats, a, (*ds.labels[i])[a]);
      out.labels[i] = v;
    }
  }
  if (ds.kind == DataKind::Sentence) {
    out.features = Tensor<double>::zeros({ds.size(), out.feature_dim});
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t jj = 0; jj < stats.retained.size(); ++jj) {
        const std::size_t j = stats.retained[jj];
        out.features(i, jj) = (ds.features(i, j) - stats.mean[j]) / stats.std_dev[j];
      }
  } else {
    for (const auto& seq : ds.sequences) {
      Tensor<double> s = Tensor<double>::zeros({out.feature_dim, seq.shape[1]});
      for (std::size_t jj = 0; jj < stats.retained.size(); ++jj) {
        const std::size_t j = stats.retained[jj];
        for (std::size_t t = 0; t < seq.shape[1]; ++t)
          s(jj, t) = (seq(j, t) - stats.mean[j]) / stats.std_dev[j];
      }
      out.sequences.push_back(std::move(s));
    }
  }
  out.validate();
  return out;
}

double normalize_label(const NormStats& stats, std::size_t attribute, double value) {
  return (value - stats.label_mean[attribute]) / stats.label_std[attribute];
}

double denormalize_label(const NormStats& stats, std::size_t attribute, double value) {
  return value * stats.label_std[attribute] + stats.label_mean[attribute];
}

double affine_label_map(double y, double src_lo, double src_hi, double dst_lo, double dst_hi) {
  if (!(src_hi > src_lo) || !(dst_hi > dst_lo))
    throw ParameterError("affine label map requires nondegenerate ranges");
  return dst_lo + (y - src_lo) * (dst_hi - dst_lo) / (src_hi - src_lo);
}

Tensor<double> pad_or_truncate(const Tensor<double>& seq, std::size_t frames) {
  seq.require_rank(2);
  if (frames == 0) throw ParameterError("target frame count must be positive");
  const std::size_t d = seq.shape[0];
  const std::size_t t_in = seq.shape[1];
  Tensor<double> out = Tensor<double>::zeros({d, frames});
  const std::size_t keep = std::min(t_in, frames);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t t = 0; t < keep; ++t) out(j, t) = seq(j, t);
  return out;
}

namespace {

// Shuffled chunks of batch_size; a trailing chunk of one sample is dropped
// (batch statistics need two), unless it is the only chunk.
std::vector<std::vector<std::size_t>> chunk_indices(std::vector<std::size_t> indices,
                                                    std::size_t batch_size, RngStream& rng) {
  rng.shuffle(indices.begin(), indices.end());
  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t stop = std::min(indices.size(), start + batch_size);
    chunks.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                        indices.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  if (chunks.size() > 1 && chunks.back().size() < 2) chunks.pop_back();
  return chunks;
}

}  // namespace

std::vector<BatchPlan> make_schedule(const DataSet& ds, std::size_t batch_size, ScheduleMode mode,
                                     UnlabeledPolicy policy, RngStream& rng) {
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  std::vector<std::size_t> labeled = ds.indices_of(Split::Train);
  if (labeled.size() < 2) throw DataError("schedule needs at least two labeled train samples");

  std::vector<BatchPlan> plans;
  if (mode == ScheduleMode::LabeledOnly) {
    for (auto& chunk : chunk_indices(labeled, batch_size, rng))
      plans.push_back({BatchTag::Labeled, std::move(chunk)});
    return plans;
  }

  std::vector<std::size_t> pool = ds.indices_of(Split::Unlabeled);
  if (pool.empty())
    throw DataError("alternating schedule requires a nonempty unlabeled pool");

  if (policy == UnlabeledPolicy::SubsampleToLabeled) {
    // Fresh unlabeled subset of labeled-set size every epoch.
    rng.shuffle(pool.begin(), pool.end());
    pool.resize(std::min(pool.size(), labeled.size()));
    auto l_chunks = chunk_indices(labeled, batch_size, rng);
    auto u_chunks = chunk_indices(std::move(pool), batch_size, rng);
    const std::size_t pairs = std::min(l_chunks.size(), u_chunks.size());
    for (std::size_t k = 0; k < pairs; ++k) {
      plans.push_back({BatchTag::Labeled, std::move(l_chunks[k])});
      plans.push_back({BatchTag::Unlabeled, std::move(u_chunks[k])});
    }
    return plans;
  }

  // Full pool: walk every unlabeled batch once, cycling (and reshuffling)
  // the labeled stream as needed.
  auto u_chunks = chunk_indices(std::move(pool), batch_size, rng);
  std::vector<std::vector<std::size_t>> l_chunks;
  std::size_t l_next = 0;
  for (auto& u : u_chunks) {
    if (l_next >= l_chunks.size()) {
      l_chunks = chunk_indices(labeled, batch_size, rng);
      l_next = 0;
    }
    plans.push_back({BatchTag::Labeled, std::move(l_chunks[l_next++])});
    plans.push_back({BatchTag::Unlabeled, std::move(u)});
  }
  return plans;
}

Batch assemble_batch(const DataSet& ds, const BatchPlan& plan, std::size_t frames) {
  if (plan.indices.empty()) throw DataError("cannot assemble an empty batch");
  const std::size_t b = plan.indices.size();
  Batch batch;
  batch.tag = plan.tag;
  for (std::size_t i : plan.indices) {
    const bool labeled = ds.labels[i].has_value();
    if (labeled != (plan.tag == BatchTag::Labeled))
      throw DataError("mixed batch: sample '" + ds.ids[i] + "' does not match the batch tag");
  }
  if (ds.kind == DataKind::Sentence) {
    batch.features = Tensor<float>::zeros({b, ds.feature_dim});
    for (std::size_t k = 0; k < b; ++k)
      for (std::size_t j = 0; j < ds.feature_dim; ++j)
        batch.features(k, j) = static_cast<float>(ds.features(plan.indices[k], j));
  } else {
    if (frames == 0) throw ParameterError("frame-level batches need a target frame count");
    batch.features = Tensor<float>::zeros({b, ds.feature_dim, frames});
    for (std::size_t k = 0; k < b; ++k) {
      Tensor<double> padded = pad_or_truncate(ds.sequences[plan.indices[k]], frames);
      for (std::size_t j = 0; j < ds.feature_dim; ++j)
        for (std::size_t t = 0; t < frames; ++t)
          batch.features(k, j, t) = static_cast<float>(padded(j, t));
    }
  }
  if (plan.tag == BatchTag::Labeled) {
    Tensor<float> labels = Tensor<float>::zeros({b, 3});
    for (std::size_t k = 0; k < b; ++k)
      for (std::size_t a = 0; a < 3; ++a)
        labels(k, a) = static_cast<float>((*ds.labels[plan.indices[k]])[a]);
    batch.labels = std::move(labels);
  }
  return batch;
}

SynthData synth_generate(const SynthSpec& spec) {
  if (spec.latent_dim < 1 || spec.feature_dim < spec.latent_dim)
    throw ParameterError("synth requires feature_dim >= latent_dim >= 1");
  if (spec.noise < 0) throw ParameterError("synth noise must be nonnegative");
  RngStream rng(spec.seed);

  const std::size_t k = spec.latent_dim;
  const std::size_t d = spec.feature_dim;
  const std::size_t mix = std::max<std::size_t>(2 * k, 16);
  const std::size_t n =
      spec.n_labeled + spec.n_dev + spec.n_test + spec.n_unlabeled;

  // Fixed mixing maps: x = A tanh(B h) + noise
  RngStream map_rng = rng.fork(1);
  Tensor<double> b_map = Tensor<double>::zeros({mix, k});
  for (auto& v : b_map.data) v = map_rng.next_gaussian() / std::sqrt(static_cast<double>(k));
  Tensor<double> a_map = Tensor<double>::zeros({d, mix});
  for (auto& v : a_map.data) v = map_rng.next_gaussian() / std::sqrt(static_cast<double>(mix));

  // Target directions: three unit vectors per attribute. The third
  // attribute's directions lean on the first's, giving the correlated pair.
  RngStream dir_rng = rng.fork(2);
  const double rho = 0.85;
  SynthData out;
  auto random_unit = [&]() {
    Tensor<double> v = Tensor<double>::zeros({k});
    double norm = 0;
    for (auto& e : v.data) {
      e = dir_rng.next_gaussian();
      norm += e * e;
    }
    norm = std::sqrt(norm);
    for (auto& e : v.data) e /= norm;
    return v;
  };
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t r = 0; r < 3; ++r) out.target_dirs[a][r] = random_unit();
  for (std::size_t r = 0; r < 3; ++r) {
    Tensor<double> mixed = Tensor<double>::zeros({k});
    double norm = 0;
    for (std::size_t j = 0; j < k; ++j) {
      mixed(j) = rho * out.target_dirs[0][r](j) +
                 std::sqrt(1.0 - rho * rho) * out.target_dirs[2][r](j);
      norm += mixed(j) * mixed(j);
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < k; ++j) mixed(j) /= norm;
    out.target_dirs[2][r] = std::move(mixed);
  }
  out.target_coef = {{{1.0, 0.6, 0.4}, {1.0, 0.6, 0.4}, {1.0, 0.6, 0.4}}};

  auto target = [&](const Tensor<double>& h, std::size_t a) {
    double t = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      double dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += out.target_dirs[a][r](j) * h(j);
      t += out.target_coef[a][r] * std::tanh(dot);
    }
    return 4.0 + 1.5 * t;  // cosmetic shift onto a rating-like scale
  };

  RngStream sample_rng = rng.fork(3);
  DataSet& ds = out.data;
  ds.kind = DataKind::Sentence;
  ds.feature_dim = d;
  ds.features = Tensor<double>::zeros({n, d});
  out.latents = Tensor<double>::zeros({n, k});
  std::vector<double> mixed(mix);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<double> h = Tensor<double>::zeros({k});
    for (auto& v : h.data) v = sample_rng.next_gaussian();
    for (std::size_t j = 0; j < k; ++j) out.latents(i, j) = h(j);
    for (std::size_t m = 0; m < mix; ++m) {
      double acc = 0;
      for (std::size_t j = 0; j < k; ++j) acc += b_map(m, j) * h(j);
      mixed[m] = std::tanh(acc);
    }
    for (std::size_t f = 0; f < d; ++f) {
      double acc = 0;
      for (std::size_t m = 0; m < mix; ++m) acc += a_map(f, m) * mixed[m];
      ds.features(i, f) = acc + spec.noise * sample_rng.next_gaussian();
    }

    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", i);
    ds.ids.push_back(id);
    Split s;
    if (i < spec.n_labeled)
      s = Split::Train;
    else if (i < spec.n_labeled + spec.n_dev)
      s = Split::Dev;
    else if (i < spec.n_labeled + spec.n_dev + spec.n_test)
      s = Split::Test;
    else
      s = Split::Unlabeled;
    ds.split.push_back(s);
    if (s == Split::Unlabeled) {
      ds.labels.emplace_back(std::nullopt);
    } else {
      std::array<double, 3> y{};
      for (std::size_t a = 0; a < 3; ++a) y[a] = target(h, a);
      ds.labels.emplace_back(y);
    }
  }
  ds.validate();
  return out;
}

}  // namespace ladder
