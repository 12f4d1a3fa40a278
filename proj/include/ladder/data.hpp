#ifndef LADDER_DATA_HPP_
#define LADDER_DATA_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ladder/tensor.hpp"

namespace ladder {

enum class Split { Train, Dev, Test, Unlabeled };
enum class DataKind { Sentence, Frames };
enum class FileFormat { Csv, Binary };

std::string split_name(Split s);
Split parse_split(const std::string& name);

/// Feature collection with optional per-sample attribute labels and split
/// tags. Sentence-level data is one [n x d] matrix; frame-level data is one
/// [d x T_i] tensor per sample.
struct DataSet {
  DataKind kind = DataKind::Sentence;
  std::size_t feature_dim = 0;
  Tensor<double> features;                 // sentence kind
  std::vector<Tensor<double>> sequences;   // frame kind
  std::vector<std::string> ids;
  std::vector<std::optional<std::array<double, 3>>> labels;
  std::vector<Split> split;

  std::size_t size() const { return ids.size(); }
  std::vector<std::size_t> indices_of(Split s) const;
  void validate() const;
};

/// Loads a feature file. CSV layout: header row, first column id, remaining
/// columns features (sentence kind) or header id,frame,f0,... with one row
/// per frame (frame kind). Binary layout is the container produced by
/// save_features(..., FileFormat::Binary).
DataSet load_features(const std::string& path, FileFormat format);
void save_features(const DataSet& ds, const std::string& path, FileFormat format);

/// Applies a label CSV (columns id,arousal,valence,dominance,split) to a
/// loaded dataset. Ids absent from the file stay unlabeled; rows tagged
/// `unlabeled` must leave the three value fields empty.
void attach_labels(DataSet& ds, const std::string& path);
void save_labels(const DataSet& ds, const std::string& path);

/// Appends the samples of other (forced to the unlabeled split) to ds.
void merge_unlabeled(DataSet& ds, const DataSet& other);

/// Per-feature and per-attribute standardization statistics, fit on the
/// train split only. Zero-variance features are dropped and recorded.
struct NormStats {
  std::size_t input_dim = 0;
  std::vector<double> mean;
  std::vector<double> std_dev;
  std::vector<std::size_t> retained;
  std::vector<std::size_t> dropped;
  std::array<double, 3> label_mean{};
  std::array<double, 3> label_std{};
};

NormStats fit_znorm(const DataSet& ds);
DataSet apply_znorm(const DataSet& ds, const NormStats& stats);
double normalize_label(const NormStats& stats, std::size_t attribute, double value);
double denormalize_label(const NormStats& stats, std::size_t attribute, double value);

/// dst_lo + (y - src_lo) * (dst_hi - dst_lo) / (src_hi - src_lo).
double affine_label_map(double y, double src_lo, double src_hi, double dst_lo, double dst_hi);

/// Right-truncates or zero-pads a [d x T_i] sequence to [d x frames].
Tensor<double> pad_or_truncate(const Tensor<double>& seq, std::size_t frames);

enum class BatchTag { Labeled, Unlabeled };
enum class ScheduleMode { LabeledOnly, Alternating };
enum class UnlabeledPolicy { SubsampleToLabeled, FullPool };

struct BatchPlan {
  BatchTag tag = BatchTag::Labeled;
  std::vector<std::size_t> indices;  // into the dataset
};

/// One epoch of batch plans. LabeledOnly emits shuffled labeled batches.
/// Alternating emits the strict L,U,L,U,... pattern; the subsample policy
/// draws a fresh unlabeled subset of labeled-set size each epoch, the full
/// policy walks the whole unlabeled pool while the labeled stream reshuffles
/// and cycles. Remainder chunks of size one are dropped.
std::vector<BatchPlan> make_schedule(const DataSet& ds, std::size_t batch_size, ScheduleMode mode,
                                     UnlabeledPolicy policy, RngStream& rng);

/// Materialized mini-batch in training precision.
struct Batch {
  Tensor<float> features;                 // [b x d] or [b x d x frames]
  std::optional<Tensor<float>> labels;    // [b x 3], normalized
  BatchTag tag = BatchTag::Labeled;
};

/// Assembles a batch from an already z-normalized dataset. frames > 0 pads or
/// truncates frame-level sequences to a [b x d x frames] tensor.
Batch assemble_batch(const DataSet& ds, const BatchPlan& plan, std::size_t frames = 0);

/// Synthetic task standing in for the speech corpora: features are a noisy
/// nonlinear mixing of a low-dimensional latent, targets are smooth functions
/// of the latent with one strongly correlated pair (first and third).
struct SynthSpec {
  std::size_t n_labeled = 200;
  std::size_t n_unlabeled = 20000;
  std::size_t n_dev = 500;
  std::size_t n_test = 1000;
  std::size_t feature_dim = 512;
  std::size_t latent_dim = 8;
  double noise = 0.3;
  std::uint64_t seed = 1;
};

struct SynthData {
  DataSet data;
  Tensor<double> latents;                        // [n x latent_dim], test oracle input
  std::array<std::array<Tensor<double>, 3>, 3> target_dirs;  // unit directions per attribute
  std::array<std::array<double, 3>, 3> target_coef;
};

SynthData synth_generate(const SynthSpec& spec);

}  // namespace ladder

#endif  // LADDER_DATA_HPP_
