#ifndef LADDER_TRAIN_HPP_
#define LADDER_TRAIN_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ladder/checkpoint.hpp"
#include "ladder/cnn.hpp"
#include "ladder/data.hpp"
#include "ladder/ladder.hpp"
#include "ladder/metrics.hpp"
#include "ladder/optimizer.hpp"

namespace ladder {

enum class ModelKind { DenseHld, CnnLld, CnnMfb };
enum class SystemVariant { Stl, Mtl, LadLStl, LadLMtl, LadUlStl, LadUlMtl };
enum class Attribute { Arousal = 0, Valence = 1, Dominance = 2 };

std::string model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);
std::string variant_name(SystemVariant v);
SystemVariant parse_variant(const std::string& s);
std::string attribute_name(Attribute a);
Attribute parse_attribute(const std::string& s);

bool variant_uses_ladder(SystemVariant v);
bool variant_uses_unlabeled(SystemVariant v);
bool variant_is_mtl(SystemVariant v);

/// Flat run description. Every training hyperparameter default matches the
/// published recipe: lr 5e-5, 100 epochs, two 256-unit hidden layers,
/// noise variance 0.3, lambda 1, baseline dropout 0.5 at two placements,
/// ladder dropout 0.1 at the input only. dropout_input/dropout_hidden < 0
/// means "use the variant's default".
struct RunConfig {
  ModelKind model_kind = ModelKind::DenseHld;
  SystemVariant variant = SystemVariant::Stl;
  Attribute target = Attribute::Arousal;
  double alpha = 1.0;
  double beta = 0.0;
  double noise_variance = 0.3;
  double lambda = 1.0;
  std::vector<double> lambda_layers;  // optional per-layer override of lambda
  double dropout_input = -1.0;
  double dropout_hidden = -1.0;
  double learning_rate = 5e-5;
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden = {256, 256};
  UnlabeledPolicy ul_policy = UnlabeledPolicy::SubsampleToLabeled;
  CombinatorKind combinator = CombinatorKind::PerUnitMlp;
  std::size_t frames = 1000;
  std::vector<ConvBlockSpec> conv_blocks = {{64, 8, 2}, {64, 8, 2}, {128, 8, 2}, {128, 8, 2}};
  std::string features_path;
  std::string labels_path;
  std::string unlabeled_features_path;

  double effective_sigma() const;
  double effective_lambda() const;
  double effective_dropout_input() const;
  double effective_dropout_hidden() const;
  std::size_t head_count() const { return variant_is_mtl(variant) ? 3 : 1; }
  CostWeights cost_weights() const;
  void validate() const;
};

std::string run_config_to_text(const RunConfig& cfg);
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);
void set_run_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Either model family behind one trainable surface.
struct ModelBundle {
  std::variant<LadderModel<float>, CnnModel<float>> model;

  std::vector<ParamRef<float>> parameters();
  std::vector<ParamRef<float>> state_tensors();
  bool is_cnn() const { return std::holds_alternative<CnnModel<float>>(model); }
};

ModelBundle build_model(const RunConfig& cfg, std::size_t input_width, RngStream& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double train_cost = 0;
  std::array<double, 3> dev_ccc{};  // NaN where the variant has no head
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  bool diverged = false;
};

/// Full training run on an in-memory raw (unnormalized) dataset.
TrainResult train_on(const RunConfig& cfg, const DataSet& raw);

/// Loads features/labels (and the optional unlabeled pool) from the
/// configured paths, then trains.
TrainResult train(const RunConfig& cfg);

void save_epoch_log(const std::vector<EpochLog>& log, const std::string& path);

struct AttributeMetrics {
  bool present = false;
  double ccc = 0;
  double pearson = 0;
  std::size_t n = 0;
};

struct EvalReport {
  std::array<AttributeMetrics, 3> attributes{};
  std::vector<std::array<double, 3>> fold_ccc;  // optional per-fold values
};

struct LabelMap {
  double src_lo, src_hi, dst_lo, dst_hi;
};

/// Rebuilds the model a checkpoint describes, tensors filled by name.
struct RestoredModel {
  RunConfig config;
  ModelBundle bundle;
  NormStats norm;
};
RestoredModel restore_model(const Checkpoint& ckpt);

Checkpoint make_checkpoint(const RunConfig& cfg, ModelBundle& bundle,
                           const NadamOptimizer<float>& optimizer, const NormStats& norm,
                           double best_dev_ccc, std::int64_t best_epoch);

/// Clean-encoder predictions in raw label space: normalize features with the
/// model's stats, run the clean path with running statistics, denormalize.
std::vector<std::array<double, 3>> predict(RestoredModel& model, const DataSet& raw,
                                           const std::vector<std::size_t>& indices);

/// Evaluates a checkpointed model on one split of a raw dataset. The optional
/// label map rescales predictions into the target corpus label range before
/// scoring; folds > 1 additionally reports per-fold CCC values.
EvalReport evaluate(RestoredModel& model, const DataSet& raw, Split split,
                    const std::optional<LabelMap>& label_map = std::nullopt,
                    std::size_t folds = 1);

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

enum class ComparisonTest { Fisher, PairedT };

struct ComparisonRow {
  Attribute attribute = Attribute::Arousal;
  bool defined = false;
  SignificanceResult result;
  std::string note;
};

/// Per-attribute significance of "a better than b".
std::array<ComparisonRow, 3> compare(const EvalReport& a, const EvalReport& b,
                                     ComparisonTest test);

/// All (alpha, beta) lattice points with step spacing inside the simplex
/// alpha, beta >= 0, alpha + beta <= 1.
std::vector<std::pair<double, double>> mtl_grid_points(double step = 0.1);

struct GridCell {
  double alpha = 0, beta = 0;
  std::array<double, 3> dev_ccc{};
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  std::array<std::pair<double, double>, 3> best_per_attribute{};
};

/// Trains one MTL model per lattice point (independently seeded) and picks
/// the best (alpha, beta) per attribute by dev CCC; ties break toward the
/// larger weight on that attribute, then lexicographically.
GridSearchResult grid_search_mtl(const RunConfig& base, const DataSet& raw, double step = 0.1);

}  // namespace ladder

#endif  // LADDER_TRAIN_HPP_
