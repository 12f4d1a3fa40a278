#include "ladder/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace ladder {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::DenseHld: return "dense-hld";
    case ModelKind::CnnLld: return "cnn-lld";
    case ModelKind::CnnMfb: return "cnn-mfb";
  }
  return "dense-hld";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "dense-hld") return ModelKind::DenseHld;
  if (s == "cnn-lld") return ModelKind::CnnLld;
  if (s == "cnn-mfb") return ModelKind::CnnMfb;
  throw ParameterError("unknown model kind '" + s + "'");
}

std::string variant_name(SystemVariant v) {
  switch (v) {
    case SystemVariant::Stl: return "stl";
    case SystemVariant::Mtl: return "mtl";
    case SystemVariant::LadLStl: return "lad+l+stl";
    case SystemVariant::LadLMtl: return "lad+l+mtl";
    case SystemVariant::LadUlStl: return "lad+ul+stl";
    case SystemVariant::LadUlMtl: return "lad+ul+mtl";
  }
  return "stl";
}

SystemVariant parse_variant(const std::string& s) {
  if (s == "stl") return SystemVariant::Stl;
  if (s == "mtl") return SystemVariant::Mtl;
  if (s == "lad+l+stl") return SystemVariant::LadLStl;
  if (s == "lad+l+mtl") return SystemVariant::LadLMtl;
  if (s == "lad+ul+stl") return SystemVariant::LadUlStl;
  if (s == "lad+ul+mtl") return SystemVariant::LadUlMtl;
  throw ParameterError("unknown system variant '" + s + "'");
}

std::string attribute_name(Attribute a) {
  switch (a) {
    case Attribute::Arousal: return "arousal";
    case Attribute::Valence: return "valence";
    case Attribute::Dominance: return "dominance";
  }
  return "arousal";
}

Attribute parse_attribute(const std::string& s) {
  if (s == "arousal") return Attribute::Arousal;
  if (s == "valence") return Attribute::Valence;
  if (s == "dominance") return Attribute::Dominance;
  throw ParameterError("unknown attribute '" + s + "'");
}

bool variant_uses_ladder(SystemVariant v) {
  return v != SystemVariant::Stl && v != SystemVariant::Mtl;
}

bool variant_uses_unlabeled(SystemVariant v) {
  return v == SystemVariant::LadUlStl || v == SystemVariant::LadUlMtl;
}

bool variant_is_mtl(SystemVariant v) {
  return v == SystemVariant::Mtl || v == SystemVariant::LadLMtl || v == SystemVariant::LadUlMtl;
}

double RunConfig::effective_sigma() const {
  return variant_uses_ladder(variant) ? std::sqrt(noise_variance) : 0.0;
}

double RunConfig::effective_lambda() const {
  return variant_uses_ladder(variant) ? lambda : 0.0;
}

double RunConfig::effective_dropout_input() const {
  if (dropout_input >= 0) return dropout_input;
  return variant_uses_ladder(variant) ? 0.1 : 0.5;
}

double RunConfig::effective_dropout_hidden() const {
  if (dropout_hidden >= 0) return dropout_hidden;
  return variant_uses_ladder(variant) ? 0.0 : 0.5;
}

CostWeights RunConfig::cost_weights() const {
  CostWeights w;
  w.alpha = alpha;
  w.beta = beta;
  w.target_attribute = static_cast<std::size_t>(target);
  return w;
}

void RunConfig::validate() const {
  cost_weights().validate();
  if (noise_variance < 0) throw ParameterError("noise variance must be nonnegative");
  if (lambda < 0) throw ParameterError("lambda must be nonnegative");
  for (double l : lambda_layers)
    if (l < 0) throw ParameterError("per-layer lambda values must be nonnegative");
  if (learning_rate <= 0) throw ParameterError("learning rate must be positive");
  if (batch_size < 2) throw ParameterError("batch size must be >= 2 (batch statistics)");
  if (hidden.empty()) throw ParameterError("at least one hidden layer is required");
  if (model_kind != ModelKind::DenseHld && conv_blocks.empty())
    throw ParameterError("cnn models need at least one conv block");
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<std::size_t>(std::strtoull(item.c_str(), nullptr, 10)));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::string join_blocks(const std::vector<ConvBlockSpec>& blocks) {
  std::ostringstream os;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << (i ? "," : "") << blocks[i].filters << ":" << blocks[i].kernel << ":" << blocks[i].pool;
  return os.str();
}

std::vector<ConvBlockSpec> parse_blocks(const std::string& s) {
  std::vector<ConvBlockSpec> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    ConvBlockSpec spec;
    if (std::sscanf(item.c_str(), "%zu:%zu:%zu", &spec.filters, &spec.kernel, &spec.pool) != 3)
      throw ParameterError("conv block spec must look like filters:kernel:pool");
    out.push_back(spec);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string run_config_to_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "model=" << model_kind_name(cfg.model_kind) << "\n";
  os << "variant=" << variant_name(cfg.variant) << "\n";
  os << "target=" << attribute_name(cfg.target) << "\n";
  os << "alpha=" << format_double(cfg.alpha) << "\n";
  os << "beta=" << format_double(cfg.beta) << "\n";
  os << "noise_variance=" << format_double(cfg.noise_variance) << "\n";
  os << "lambda=" << format_double(cfg.lambda) << "\n";
  os << "lambda_layers=" << join_doubles(cfg.lambda_layers) << "\n";
  os << "dropout_input=" << format_double(cfg.dropout_input) << "\n";
  os << "dropout_hidden=" << format_double(cfg.dropout_hidden) << "\n";
  os << "lr=" << format_double(cfg.learning_rate) << "\n";
  os << "epochs=" << cfg.epochs << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "seed=" << cfg.seed << "\n";
  os << "hidden=" << join_sizes(cfg.hidden) << "\n";
  os << "ul_policy=" << (cfg.ul_policy == UnlabeledPolicy::SubsampleToLabeled ? "subsample" : "full")
     << "\n";
  os << "combinator=" << (cfg.combinator == CombinatorKind::PerUnitMlp ? "mlp" : "vanilla") << "\n";
  os << "frames=" << cfg.frames << "\n";
  os << "conv_blocks=" << join_blocks(cfg.conv_blocks) << "\n";
  os << "features=" << cfg.features_path << "\n";
  os << "labels=" << cfg.labels_path << "\n";
  os << "unlabeled_features=" << cfg.unlabeled_features_path << "\n";
  return os.str();
}

void set_run_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model") cfg.model_kind = parse_model_kind(value);
  else if (key == "variant") cfg.variant = parse_variant(value);
  else if (key == "target") cfg.target = parse_attribute(value);
  else if (key == "alpha") cfg.alpha = std::stod(value);
  else if (key == "beta") cfg.beta = std::stod(value);
  else if (key == "noise_variance") cfg.noise_variance = std::stod(value);
  else if (key == "lambda") cfg.lambda = std::stod(value);
  else if (key == "lambda_layers")
    cfg.lambda_layers = value.empty() ? std::vector<double>{} : parse_doubles(value);
  else if (key == "dropout_input") cfg.dropout_input = std::stod(value);
  else if (key == "dropout_hidden") cfg.dropout_hidden = std::stod(value);
  else if (key == "lr") cfg.learning_rate = std::stod(value);
  else if (key == "epochs") cfg.epochs = std::stoull(value);
  else if (key == "batch_size") cfg.batch_size = std::stoull(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "hidden") cfg.hidden = parse_sizes(value);
  else if (key == "ul_policy") {
    if (value == "subsample") cfg.ul_policy = UnlabeledPolicy::SubsampleToLabeled;
    else if (value == "full") cfg.ul_policy = UnlabeledPolicy::FullPool;
    else throw ParameterError("ul_policy must be 'subsample' or 'full'");
  } else if (key == "combinator") {
    if (value == "mlp") cfg.combinator = CombinatorKind::PerUnitMlp;
    else if (value == "vanilla") cfg.combinator = CombinatorKind::Vanilla;
    else throw ParameterError("combinator must be 'mlp' or 'vanilla'");
  } else if (key == "frames") cfg.frames = std::stoull(value);
  else if (key == "conv_blocks") cfg.conv_blocks = parse_blocks(value);
  else if (key == "features") cfg.features_path = value;
  else if (key == "labels") cfg.labels_path = value;
  else if (key == "unlabeled_features") cfg.unlabeled_features_path = value;
  else throw ParameterError("unknown config key '" + key + "'");
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParameterError("config line " + std::to_string(row) + " is not key=value");
    set_run_config_key(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str());
}

std::vector<ParamRef<float>> ModelBundle::parameters() {
  if (auto* m = std::get_if<LadderModel<float>>(&model)) return m->parameters();
  return std::get<CnnModel<float>>(model).parameters();
}

std::vector<ParamRef<float>> ModelBundle::state_tensors() {
  if (auto* m = std::get_if<LadderModel<float>>(&model)) return m->state_tensors();
  return std::get<CnnModel<float>>(model).state_tensors();
}

ModelBundle build_model(const RunConfig& cfg, std::size_t input_width, RngStream& rng) {
  cfg.validate();
  ModelBundle bundle;
  if (cfg.model_kind == ModelKind::DenseHld) {
    LadderConfig<float> lc;
    lc.input_width = input_width;
    lc.hidden_widths = cfg.hidden;
    lc.head_count = cfg.head_count();
    lc.noise_sigma = static_cast<float>(cfg.effective_sigma());
    lc.lambda.assign(cfg.hidden.size() + 1, static_cast<float>(cfg.effective_lambda()));
    if (!cfg.lambda_layers.empty() && variant_uses_ladder(cfg.variant)) {
      if (cfg.lambda_layers.size() != cfg.hidden.size() + 1)
        throw ParameterError("lambda_layers needs one value per layer, input included");
      for (std::size_t l = 0; l < lc.lambda.size(); ++l)
        lc.lambda[l] = static_cast<float>(cfg.lambda_layers[l]);
    }
    lc.reconstruct_input = true;
    lc.dropout_rates.assign(cfg.hidden.size(), static_cast<float>(cfg.effective_dropout_hidden()));
    lc.dropout_rates[0] = static_cast<float>(cfg.effective_dropout_input());
    lc.combinator_kind = cfg.combinator;
    bundle.model = LadderModel<float>::init(lc, rng);
  } else {
    CnnConfig<float> cc;
    cc.input_channels = input_width;
    cc.frames = cfg.frames;
    cc.blocks = cfg.conv_blocks;
    cc.fc_widths = cfg.hidden;
    cc.head_count = cfg.head_count();
    cc.noise_sigma = static_cast<float>(cfg.effective_sigma());
    cc.fc_lambda.assign(cfg.hidden.size(), static_cast<float>(cfg.effective_lambda()));
    if (!cfg.lambda_layers.empty() && variant_uses_ladder(cfg.variant)) {
      if (cfg.lambda_layers.size() != cfg.hidden.size())
        throw ParameterError("lambda_layers needs one value per fully connected layer");
      for (std::size_t l = 0; l < cc.fc_lambda.size(); ++l)
        cc.fc_lambda[l] = static_cast<float>(cfg.lambda_layers[l]);
    }
    cc.combinator_kind = cfg.combinator;
    bundle.model = CnnModel<float>::init(cc, rng);
  }
  return bundle;
}

namespace {

/// Clean-path head outputs (normalized space) for the given samples.
Tensor<float> predict_normalized(ModelBundle& bundle, const DataSet& ds,
                                 const std::vector<std::size_t>& indices, std::size_t frames) {
  const std::size_t chunk = bundle.is_cnn() ? 64 : 1024;
  Tensor<float> out;
  std::size_t heads = 0;
  std::size_t row = 0;
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    BatchPlan plan;
    plan.tag = ds.labels[indices[start]].has_value() ? BatchTag::Labeled : BatchTag::Unlabeled;
    const std::size_t stop = std::min(indices.size(), start + chunk);
    plan.indices.assign(indices.begin() + static_cast<std::ptrdiff_t>(start),
                        indices.begin() + static_cast<std::ptrdiff_t>(stop));
    Batch batch = assemble_batch(ds, plan, bundle.is_cnn() ? frames : 0);
    Tensor<float> y;
    if (auto* m = std::get_if<LadderModel<float>>(&bundle.model)) {
      y = clean_encode(*m, batch.features, Mode::Eval, false).head_out;
    } else {
      y = cnn_encode(std::get<CnnModel<float>>(bundle.model), batch.features, Mode::Eval, false)
              .head_out;
    }
    if (out.size() == 0) {
      heads = y.shape[1];
      out = Tensor<float>::zeros({indices.size(), heads});
    }
    for (std::size_t i = 0; i < y.shape[0]; ++i)
      for (std::size_t h = 0; h < heads; ++h) out(row + i, h) = y(i, h);
    row += y.shape[0];
  }
  return out;
}

/// Dev-set CCC per attribute in raw label space (NaN where no head exists).
std::array<double, 3> dev_ccc_raw(ModelBundle& bundle, const RunConfig& cfg, const DataSet& norm_ds,
                                  const DataSet& raw_ds, const std::vector<std::size_t>& dev,
                                  const NormStats& stats) {
  std::array<double, 3> out{kNan, kNan, kNan};
  if (dev.empty()) return out;
  Tensor<float> y = predict_normalized(bundle, norm_ds, dev, cfg.frames);
  const std::size_t heads = y.shape[1];
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t attr = (heads == 1) ? static_cast<std::size_t>(cfg.target) : h;
    Tensor<double> pred = Tensor<double>::zeros({dev.size()});
    Tensor<double> truth = Tensor<double>::zeros({dev.size()});
    for (std::size_t i = 0; i < dev.size(); ++i) {
      pred(i) = denormalize_label(stats, attr, y(i, h));
      truth(i) = (*raw_ds.labels[dev[i]])[attr];
    }
    out[attr] = ccc(pred, truth);
  }
  return out;
}

}  // namespace

Checkpoint make_checkpoint(const RunConfig& cfg, ModelBundle& bundle,
                           const NadamOptimizer<float>& optimizer, const NormStats& norm,
                           double best_dev_ccc, std::int64_t best_epoch) {
  Checkpoint ckpt;
  ckpt.config_text = run_config_to_text(cfg);
  for (const auto& ref : bundle.state_tensors()) ckpt.tensors.push_back({ref.name, *ref.value});
  if (!optimizer.first_moments().empty()) {
    const auto params = bundle.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      ckpt.tensors.push_back({"opt.m." + params[k].name, optimizer.first_moments()[k]});
      ckpt.tensors.push_back({"opt.n." + params[k].name, optimizer.second_moments()[k]});
    }
  }
  ckpt.optimizer_step = optimizer.step_count();
  ckpt.norm = norm;
  ckpt.best_dev_ccc = best_dev_ccc;
  ckpt.best_epoch = best_epoch;
  ckpt.target_attribute = static_cast<std::uint32_t>(cfg.target);
  return ckpt;
}

RestoredModel restore_model(const Checkpoint& ckpt) {
  RestoredModel restored;
  restored.config = parse_run_config_text(ckpt.config_text);
  restored.norm = ckpt.norm;
  RngStream init_rng = RngStream(restored.config.seed).fork(0);
  restored.bundle = build_model(restored.config, ckpt.norm.retained.size(), init_rng);
  for (auto& ref : restored.bundle.state_tensors()) {
    const NamedTensor* stored = ckpt.find(ref.name);
    if (!stored) throw CheckpointError("checkpoint is missing tensor '" + ref.name + "'");
    if (stored->value.shape != ref.value->shape)
      throw CheckpointError("checkpoint tensor '" + ref.name + "' has the wrong shape");
    *ref.value = stored->value;
  }
  return restored;
}

TrainResult train_on(const RunConfig& cfg, const DataSet& raw) {
  cfg.validate();
  if (variant_uses_unlabeled(cfg.variant) && raw.indices_of(Split::Unlabeled).empty())
    throw DataError("variant " + variant_name(cfg.variant) + " requires unlabeled samples");
  if ((cfg.model_kind == ModelKind::DenseHld) != (raw.kind == DataKind::Sentence))
    throw DataError("model kind and dataset kind disagree");

  NormStats stats = fit_znorm(raw);
  DataSet ds = apply_znorm(raw, stats);

  RngStream root(cfg.seed);
  RngStream init_rng = root.fork(0);
  RngStream schedule_rng = root.fork(1);
  RngStream noise_rng = root.fork(2);

  ModelBundle bundle = build_model(cfg, ds.feature_dim, init_rng);
  NadamOptimizer<float> optimizer(NadamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});

  const auto dev = ds.indices_of(Split::Dev);
  const CostWeights weights = cfg.cost_weights();
  const ScheduleMode mode =
      variant_uses_unlabeled(cfg.variant) ? ScheduleMode::Alternating : ScheduleMode::LabeledOnly;

  TrainResult result;
  auto record = [&](std::size_t epoch, double cost) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_cost = cost;
    entry.dev_ccc = dev_ccc_raw(bundle, cfg, ds, raw, dev, stats);
    result.log.push_back(entry);
    return entry;
  };

  const std::size_t target = static_cast<std::size_t>(cfg.target);
  EpochLog first = record(0, kNan);
  double best_ccc = first.dev_ccc[target];
  result.best = make_checkpoint(cfg, bundle, optimizer, stats, best_ccc, 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    const auto schedule = make_schedule(ds, cfg.batch_size, mode, cfg.ul_policy, schedule_rng);
    double cost_sum = 0;
    std::size_t batches = 0;
    for (const auto& plan : schedule) {
      Batch batch = assemble_batch(ds, plan, bundle.is_cnn() ? cfg.frames : 0);
      const Tensor<float>* labels = batch.labels ? &*batch.labels : nullptr;
      try {
        double cost;
        if (auto* m = std::get_if<LadderModel<float>>(&bundle.model)) {
          auto step = ladder_cost(*m, batch.features, labels, weights, noise_rng, true);
          if (!std::isfinite(static_cast<double>(step.cost)))
            throw DivergenceError("non-finite training cost");
          auto params = m->parameters();
          auto grads = step.grads.parameters();
          std::vector<Tensor<float>*> p(params.size());
          std::vector<const Tensor<float>*> g(grads.size());
          for (std::size_t k = 0; k < params.size(); ++k) {
            p[k] = params[k].value;
            g[k] = grads[k].value;
          }
          optimizer.step(p, g);
          cost = step.cost;
        } else {
          auto& cnn = std::get<CnnModel<float>>(bundle.model);
          auto step = tau_ladder_cost(cnn, batch.features, labels, weights, noise_rng, true);
          if (!std::isfinite(static_cast<double>(step.cost)))
            throw DivergenceError("non-finite training cost");
          auto params = cnn.parameters();
          auto grads = step.grads.parameters();
          std::vector<Tensor<float>*> p(params.size());
          std::vector<const Tensor<float>*> g(grads.size());
          for (std::size_t k = 0; k < params.size(); ++k) {
            p[k] = params[k].value;
            g[k] = grads[k].value;
          }
          optimizer.step(p, g);
          cost = step.cost;
        }
        cost_sum += cost;
        ++batches;
      } catch (const DivergenceError&) {
        result.diverged = true;
        break;
      }
    }
    if (result.diverged) break;
    EpochLog entry = record(epoch, batches ? cost_sum / static_cast<double>(batches) : kNan);
    if (!dev.empty() && entry.dev_ccc[target] > best_ccc) {
      best_ccc = entry.dev_ccc[target];
      result.best = make_checkpoint(cfg, bundle, optimizer, stats, best_ccc,
                                    static_cast<std::int64_t>(epoch));
    }
  }
  return result;
}

TrainResult train(const RunConfig& cfg) {
  if (cfg.features_path.empty()) throw ParameterError("train needs a feature file path");
  const auto format = [](const std::string& p) {
    return p.size() > 4 && p.substr(p.size() - 4) == ".bin" ? FileFormat::Binary : FileFormat::Csv;
  };
  DataSet ds = load_features(cfg.features_path, format(cfg.features_path));
  if (!cfg.labels_path.empty()) attach_labels(ds, cfg.labels_path);
  if (!cfg.unlabeled_features_path.empty()) {
    DataSet pool = load_features(cfg.unlabeled_features_path, format(cfg.unlabeled_features_path));
    merge_unlabeled(ds, pool);
  }
  return train_on(cfg, ds);
}

void save_epoch_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write epoch log " + path);
  out.precision(10);
  out << "epoch,train_cost,dev_ccc_arousal,dev_ccc_valence,dev_ccc_dominance\n";
  for (const auto& e : log)
    out << e.epoch << "," << e.train_cost << "," << e.dev_ccc[0] << "," << e.dev_ccc[1] << ","
        << e.dev_ccc[2] << "\n";
}

std::vector<std::array<double, 3>> predict(RestoredModel& model, const DataSet& raw,
                                           const std::vector<std::size_t>& indices) {
  if (model.bundle.is_cnn() != (raw.kind == DataKind::Frames))
    throw DataError("feature kind does not match the checkpointed model");
  DataSet norm_ds = apply_znorm(raw, model.norm);
  Tensor<float> y = predict_normalized(model.bundle, norm_ds, indices, model.config.frames);
  std::vector<std::array<double, 3>> out(indices.size(), {kNan, kNan, kNan});
  const std::size_t heads = y.shape[1];
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t attr =
          (heads == 1) ? static_cast<std::size_t>(model.config.target) : h;
      out[i][attr] = denormalize_label(model.norm, attr, y(i, h));
    }
  return out;
}

EvalReport evaluate(RestoredModel& model, const DataSet& raw, Split split,
                    const std::optional<LabelMap>& label_map, std::size_t folds) {
  const auto indices = raw.indices_of(split);
  if (indices.size() < 2) throw DataError("evaluation split has fewer than two samples");
  if (folds < 1) throw ParameterError("fold count must be >= 1");
  auto preds = predict(model, raw, indices);
  if (label_map) {
    for (auto& p : preds)
      for (double& v : p)
        if (std::isfinite(v))
          v = affine_label_map(v, label_map->src_lo, label_map->src_hi, label_map->dst_lo,
                               label_map->dst_hi);
  }

  EvalReport report;
  auto score = [&](std::size_t attr, std::size_t begin, std::size_t end, double* ccc_out,
                   double* pearson_out) {
    Tensor<double> p = Tensor<double>::zeros({end - begin});
    Tensor<double> t = Tensor<double>::zeros({end - begin});
    for (std::size_t i = begin; i < end; ++i) {
      p(i - begin) = preds[i][attr];
      t(i - begin) = (*raw.labels[indices[i]])[attr];
    }
    *ccc_out = ccc(p, t);
    if (pearson_out) *pearson_out = pearson(p, t);
  };

  for (std::size_t attr = 0; attr < 3; ++attr) {
    if (!std::isfinite(preds[0][attr])) continue;
    auto& slot = report.attributes[attr];
    slot.present = true;
    slot.n = indices.size();
    score(attr, 0, indices.size(), &slot.ccc, &slot.pearson);
  }

  if (folds > 1) {
    if (indices.size() < 2 * folds) throw DataError("too few samples for the requested folds");
    for (std::size_t f = 0; f < folds; ++f) {
      const std::size_t begin = f * indices.size() / folds;
      const std::size_t end = (f + 1) * indices.size() / folds;
      std::array<double, 3> row{kNan, kNan, kNan};
      for (std::size_t attr = 0; attr < 3; ++attr) {
        if (!report.attributes[attr].present) continue;
        double c, unused;
        score(attr, begin, end, &c, &unused);
        row[attr] = c;
      }
      report.fold_ccc.push_back(row);
    }
  }
  return report;
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report " + path);
  out.precision(10);
  out << "attribute,ccc,pearson,n\n";
  for (std::size_t attr = 0; attr < 3; ++attr) {
    const auto& slot = report.attributes[attr];
    if (!slot.present) continue;
    out << attribute_name(static_cast<Attribute>(attr)) << "," << slot.ccc << "," << slot.pearson
        << "," << slot.n << "\n";
  }
  if (!report.fold_ccc.empty()) {
    out << "fold,arousal,valence,dominance\n";
    for (const auto& row : report.fold_ccc)
      out << "fold," << row[0] << "," << row[1] << "," << row[2] << "\n";
  }
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path);
  EvalReport report;
  std::string line;
  bool in_folds = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "attribute,ccc,pearson,n") continue;
    if (line == "fold,arousal,valence,dominance") {
      in_folds = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (in_folds) {
      if (cells.size() != 4 || cells[0] != "fold")
        throw DataError("report fold row " + std::to_string(row) + " is malformed");
      report.fold_ccc.push_back(
          {std::strtod(cells[1].c_str(), nullptr), std::strtod(cells[2].c_str(), nullptr),
           std::strtod(cells[3].c_str(), nullptr)});
    } else {
      if (cells.size() != 4) throw DataError("report row " + std::to_string(row) + " is malformed");
      const auto attr = static_cast<std::size_t>(parse_attribute(cells[0]));
      auto& slot = report.attributes[attr];
      slot.present = true;
      slot.ccc = std::stod(cells[1]);
      slot.pearson = std::stod(cells[2]);
      slot.n = std::stoull(cells[3]);
    }
  }
  return report;
}

std::array<ComparisonRow, 3> compare(const EvalReport& a, const EvalReport& b,
                                     ComparisonTest test) {
  std::array<ComparisonRow, 3> rows;
  for (std::size_t attr = 0; attr < 3; ++attr) {
    auto& row = rows[attr];
    row.attribute = static_cast<Attribute>(attr);
    const auto& sa = a.attributes[attr];
    const auto& sb = b.attributes[attr];
    if (test == ComparisonTest::Fisher) {
      if (!sa.present || !sb.present) {
        row.note = "attribute missing from a report";
        continue;
      }
      if (sa.n != sb.n) {
        row.note = "incompatible reports: sample counts differ";
        continue;
      }
      try {
        row.result = fisher_z_test(sa.ccc, sa.n, sb.ccc, sb.n);
        row.defined = true;
      } catch (const Error& e) {
        row.note = e.what();
      }
    } else {
      if (a.fold_ccc.empty() || b.fold_ccc.empty()) {
        row.note = "paired test needs per-fold values in both reports";
        continue;
      }
      if (a.fold_ccc.size() != b.fold_ccc.size()) {
        row.note = "incompatible reports: fold counts differ";
        continue;
      }
      std::vector<double> va, vb;
      for (std::size_t f = 0; f < a.fold_ccc.size(); ++f) {
        if (!std::isfinite(a.fold_ccc[f][attr]) || !std::isfinite(b.fold_ccc[f][attr])) break;
        va.push_back(a.fold_ccc[f][attr]);
        vb.push_back(b.fold_ccc[f][attr]);
      }
      if (va.size() != a.fold_ccc.size()) {
        row.note = "attribute missing from the fold values";
        continue;
      }
      try {
        row.result = paired_t_test(va, vb);
        row.defined = true;
      } catch (const Error& e) {
        row.note = e.what();
      }
    }
  }
  return rows;
}

std::vector<std::pair<double, double>> mtl_grid_points(double step) {
  if (step <= 0 || step > 1) throw ParameterError("grid step must be in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i <= steps; ++i)
    for (std::size_t j = 0; j + i <= steps; ++j)
      points.emplace_back(static_cast<double>(i) * step, static_cast<double>(j) * step);
  return points;
}

namespace {
double attribute_weight(std::size_t attr, double alpha, double beta) {
  return attr == 0 ? alpha : attr == 1 ? beta : 1.0 - alpha - beta;
}
}  // namespace

GridSearchResult grid_search_mtl(const RunConfig& base, const DataSet& raw, double step) {
  if (!variant_is_mtl(base.variant))
    throw ParameterError("grid search requires a multitask variant");
  GridSearchResult result;
  const auto points = mtl_grid_points(step);
  RngStream seed_rng(base.seed);
  for (std::size_t c = 0; c < points.size(); ++c) {
    RunConfig cfg = base;
    cfg.alpha = points[c].first;
    cfg.beta = points[c].second;
    cfg.seed = seed_rng.fork(1000 + c).seed();
    TrainResult run = train_on(cfg, raw);
    GridCell cell;
    cell.alpha = cfg.alpha;
    cell.beta = cfg.beta;
    cell.dev_ccc = {-1.0, -1.0, -1.0};
    for (const auto& entry : run.log)
      for (std::size_t attr = 0; attr < 3; ++attr)
        if (std::isfinite(entry.dev_ccc[attr]))
          cell.dev_ccc[attr] = std::max(cell.dev_ccc[attr], entry.dev_ccc[attr]);
    result.cells.push_back(cell);
  }
  for (std::size_t attr = 0; attr < 3; ++attr) {
    const GridCell* best = nullptr;
    for (const auto& cell : result.cells) {
      if (!best) {
        best = &cell;
        continue;
      }
      if (cell.dev_ccc[attr] > best->dev_ccc[attr]) {
        best = &cell;
      } else if (cell.dev_ccc[attr] == best->dev_ccc[attr]) {
        const double w_cell = attribute_weight(attr, cell.alpha, cell.beta);
        const double w_best = attribute_weight(attr, best->alpha, best->beta);
        if (w_cell > w_best ||
            (w_cell == w_best &&
             std::make_pair(cell.alpha, cell.beta) < std::make_pair(best->alpha, best->beta)))
          best = &cell;
      }
    }
    result.best_per_attribute[attr] = {best->alpha, best->beta};
  }
  return result;
}

}  // namespace ladder
