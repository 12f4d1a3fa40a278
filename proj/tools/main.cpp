// Command-line front end: synthetic data generation, training with
// best-dev-epoch selection, evaluation, system comparison, and the
// (alpha, beta) grid search.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ladder/train.hpp"

namespace {

using namespace ladder;

FileFormat format_of(const std::string& path) {
  return path.size() > 4 && path.substr(path.size() - 4) == ".bin" ? FileFormat::Binary
                                                                   : FileFormat::Csv;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ParameterError("--set expects key=value, got '" + kv + "'");
    set_run_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void print_report(const EvalReport& report) {
  std::printf("%-10s %8s %8s %8s\n", "attribute", "ccc", "pearson", "n");
  for (std::size_t attr = 0; attr < 3; ++attr) {
    const auto& slot = report.attributes[attr];
    if (!slot.present) continue;
    std::printf("%-10s %8.4f %8.4f %8zu\n",
                attribute_name(static_cast<Attribute>(attr)).c_str(), slot.ccc, slot.pearson,
                slot.n);
  }
  if (!report.fold_ccc.empty())
    std::printf("(%zu folds recorded for paired testing)\n", report.fold_ccc.size());
}

int cmd_synth(const std::string& out_dir, const SynthSpec& spec, const std::string& format) {
  SynthData synth = synth_generate(spec);
  const bool binary = format == "bin";
  const std::string features =
      out_dir + "/features." + (binary ? std::string("bin") : std::string("csv"));
  const std::string labels = out_dir + "/labels.csv";
  save_features(synth.data, features, binary ? FileFormat::Binary : FileFormat::Csv);
  save_labels(synth.data, labels);
  std::printf("wrote %s (%zu samples, %zu features) and %s\n", features.c_str(),
              synth.data.size(), synth.data.feature_dim, labels.c_str());
  return 0;
}

int cmd_train(RunConfig cfg, const std::string& out_path, const std::string& log_path) {
  TrainResult result = train(cfg);
  if (!out_path.empty()) checkpoint_save(result.best, out_path);
  if (!log_path.empty()) save_epoch_log(result.log, log_path);
  std::printf("%-6s %12s %10s %10s %10s\n", "epoch", "train_cost", "dev_aro", "dev_val",
              "dev_dom");
  for (const auto& e : result.log)
    std::printf("%-6zu %12.6f %10.4f %10.4f %10.4f\n", e.epoch, e.train_cost, e.dev_ccc[0],
                e.dev_ccc[1], e.dev_ccc[2]);
  std::printf("best dev ccc (%s) %.4f at epoch %lld%s\n",
              attribute_name(cfg.target).c_str(), result.best.best_dev_ccc,
              static_cast<long long>(result.best.best_epoch),
              result.diverged ? " [training diverged; kept last good checkpoint]" : "");
  return result.diverged ? 1 : 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& features_path,
                 const std::string& labels_path, const std::string& split_name_arg,
                 std::size_t folds, const std::optional<LabelMap>& map,
                 const std::string& report_path) {
  Checkpoint ckpt = checkpoint_load(model_path);
  RestoredModel model = restore_model(ckpt);
  DataSet ds = load_features(features_path, format_of(features_path));
  if (!labels_path.empty()) attach_labels(ds, labels_path);
  EvalReport report = evaluate(model, ds, parse_split(split_name_arg), map, folds);
  print_report(report);
  if (!report_path.empty()) save_report(report, report_path);
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b, const std::string& test) {
  EvalReport a = load_report(path_a);
  EvalReport b = load_report(path_b);
  const ComparisonTest kind =
      test == "fisher" ? ComparisonTest::Fisher : ComparisonTest::PairedT;
  auto rows = compare(a, b, kind);
  std::printf("%-10s %10s %10s %12s  %s\n", "attribute", "statistic", "p-value", "significant",
              "note");
  for (const auto& row : rows) {
    if (row.defined)
      std::printf("%-10s %10.4f %10.6f %12s\n", attribute_name(row.attribute).c_str(),
                  row.result.statistic, row.result.p_value,
                  row.result.significant ? "yes" : "no");
    else
      std::printf("%-10s %10s %10s %12s  %s\n", attribute_name(row.attribute).c_str(), "-", "-",
                  "-", row.note.c_str());
  }
  return 0;
}

int cmd_grid_search(RunConfig cfg, double step, const std::string& out_path) {
  DataSet ds = load_features(cfg.features_path, format_of(cfg.features_path));
  if (!cfg.labels_path.empty()) attach_labels(ds, cfg.labels_path);
  if (!cfg.unlabeled_features_path.empty()) {
    DataSet pool =
        load_features(cfg.unlabeled_features_path, format_of(cfg.unlabeled_features_path));
    merge_unlabeled(ds, pool);
  }
  GridSearchResult result = grid_search_mtl(cfg, ds, step);
  std::printf("%6s %6s %10s %10s %10s\n", "alpha", "beta", "dev_aro", "dev_val", "dev_dom");
  for (const auto& cell : result.cells)
    std::printf("%6.2f %6.2f %10.4f %10.4f %10.4f\n", cell.alpha, cell.beta, cell.dev_ccc[0],
                cell.dev_ccc[1], cell.dev_ccc[2]);
  for (std::size_t attr = 0; attr < 3; ++attr)
    std::printf("best for %s: alpha=%.2f beta=%.2f\n",
                attribute_name(static_cast<Attribute>(attr)).c_str(),
                result.best_per_attribute[attr].first, result.best_per_attribute[attr].second);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << "alpha,beta,dev_ccc_arousal,dev_ccc_valence,dev_ccc_dominance\n";
    out.precision(10);
    for (const auto& cell : result.cells)
      out << cell.alpha << "," << cell.beta << "," << cell.dev_ccc[0] << "," << cell.dev_ccc[1]
          << "," << cell.dev_ccc[2] << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised emotional attribute regression with ladder networks"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark dataset");
  std::string synth_out = ".";
  std::string synth_format = "csv";
  SynthSpec spec;
  synth->add_option("--out-dir", synth_out, "Output directory");
  synth->add_option("--n-labeled", spec.n_labeled, "Labeled train samples");
  synth->add_option("--n-unlabeled", spec.n_unlabeled, "Unlabeled samples");
  synth->add_option("--n-dev", spec.n_dev, "Dev samples");
  synth->add_option("--n-test", spec.n_test, "Test samples");
  synth->add_option("--dim", spec.feature_dim, "Feature dimension");
  synth->add_option("--latent", spec.latent_dim, "Latent dimension");
  synth->add_option("--noise", spec.noise, "Feature noise level");
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--format", synth_format, "csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}));

  // shared train/grid-search options
  auto add_config_options = [](CLI::App* cmd, std::string& config_path,
                               std::vector<std::string>& sets) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", sets, "Override a config key (key=value, repeatable)");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a system variant");
  std::string train_config, train_out = "model.ckpt", train_log;
  std::vector<std::string> train_sets;
  add_config_options(train_cmd, train_config, train_sets);
  train_cmd->add_option("--out", train_out, "Checkpoint output path");
  train_cmd->add_option("--log", train_log, "Per-epoch log CSV path");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset split");
  std::string eval_model, eval_features, eval_labels, eval_split = "test", eval_report;
  std::size_t eval_folds = 1;
  std::vector<double> map_values;
  eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
  eval_cmd->add_option("--features", eval_features, "Feature file")->required();
  eval_cmd->add_option("--labels", eval_labels, "Label file");
  eval_cmd->add_option("--split", eval_split, "Split to evaluate (train|dev|test)");
  eval_cmd->add_option("--folds", eval_folds, "Report per-fold CCC values");
  eval_cmd->add_option("--label-map", map_values,
                       "Affine prediction rescale: src_lo src_hi dst_lo dst_hi")
      ->expected(4);
  eval_cmd->add_option("--report", eval_report, "Write machine-readable report CSV");

  auto* compare_cmd = app.add_subcommand("compare", "Significance test between two reports");
  std::string cmp_a, cmp_b, cmp_test = "fisher";
  compare_cmd->add_option("--report-a", cmp_a, "First report (the claimed better system)")
      ->required();
  compare_cmd->add_option("--report-b", cmp_b, "Second report")->required();
  compare_cmd->add_option("--test", cmp_test, "fisher or paired-t")
      ->check(CLI::IsMember({"fisher", "paired-t"}));

  auto* grid_cmd = app.add_subcommand("grid-search", "Optimize (alpha, beta) on the dev set");
  std::string grid_config, grid_out;
  std::vector<std::string> grid_sets;
  double grid_step = 0.1;
  add_config_options(grid_cmd, grid_config, grid_sets);
  grid_cmd->add_option("--step", grid_step, "Simplex lattice spacing");
  grid_cmd->add_option("--out", grid_out, "Write grid CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_out, spec, synth_format);
    if (train_cmd->parsed()) {
      RunConfig cfg = train_config.empty() ? RunConfig{} : load_run_config(train_config);
      apply_overrides(cfg, train_sets);
      return cmd_train(cfg, train_out, train_log);
    }
    if (eval_cmd->parsed()) {
      std::optional<LabelMap> map;
      if (!map_values.empty())
        map = LabelMap{map_values[0], map_values[1], map_values[2], map_values[3]};
      return cmd_evaluate(eval_model, eval_features, eval_labels, eval_split, eval_folds, map,
                          eval_report);
    }
    if (compare_cmd->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_test);
    if (grid_cmd->parsed()) {
      RunConfig cfg = grid_config.empty() ? RunConfig{} : load_run_config(grid_config);
      apply_overrides(cfg, grid_sets);
      return cmd_grid_search(cfg, grid_step, grid_out);
    }
  } catch (const ladder::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
