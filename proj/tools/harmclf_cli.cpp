// harmclf: command-line front end for the experiment harness.
//
//   harmclf stats <data>
//   harmclf split <data> --fraction 0.85 --seed 13
//   harmclf train <config>
//   harmclf evaluate <model> <data>
//   harmclf matrix <config...> --out DIR
//   harmclf submit <model> <test-data> --out FILE
//   harmclf synth <dir>
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 training failure,
// 5 partial matrix failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "harmclf/config.hpp"
#include "harmclf/corpus.hpp"
#include "harmclf/error.hpp"
#include "harmclf/metrics.hpp"
#include "harmclf/runner.hpp"
#include "harmclf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace harmclf;

namespace {

struct DataOptions {
  std::string task = "abusive";
  std::string format;
  std::string positive_label;
  std::string negative_label;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--task", task, "abusive | threatening")->capture_default_str();
    cmd->add_option("--format", format, "tsv | csv (default: from extension)");
    cmd->add_option("--positive-label", positive_label, "label text of the harmful class");
    cmd->add_option("--negative-label", negative_label, "label text of the other class");
  }

  LabelNames names() const {
    LabelNames n = default_label_names(parse_task(task));
    if (!positive_label.empty()) n.positive = positive_label;
    if (!negative_label.empty()) n.negative = negative_label;
    return n;
  }

  LoadOptions load(const std::string& path, bool require_labels = true) const {
    const LabelNames n = names();
    return {format.empty() ? format_from_path(path) : parse_format(format),
            LabelMap{{n.positive, 1}, {n.negative, 0}, {"1", 1}, {"0", 0}},
            parse_task(task), require_labels};
  }
};

int cmd_stats(const std::string& path, const DataOptions& opts) {
  const Dataset ds = load_dataset(path, opts.load(path));
  const ClassCounts counts = dataset_stats(ds);
  nlohmann::json out = {{"dataset", ds.name},
                        {"task", to_string(ds.task)},
                        {"n_positive", counts.n_positive},
                        {"n_negative", counts.n_negative},
                        {"total", counts.total}};
  if (counts.n_positive > 0 && counts.n_negative > 0) {
    const ClassWeights w = class_weights(counts, WeightScheme::inverse_frequency);
    out["inverse_frequency_weights"] = {{"positive", w.w_positive}, {"negative", w.w_negative}};
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_split(const std::string& path, double fraction, std::int64_t seed, std::string out_dir,
              const DataOptions& opts) {
  const LoadOptions load = opts.load(path);
  const Dataset ds = load_dataset(path, load);
  const Split split = stratified_split(ds, fraction, seed);
  const fs::path dir = out_dir.empty() ? fs::path(path).parent_path() : fs::path(out_dir);
  fs::create_directories(dir);
  const std::string stem = fs::path(path).stem().string();
  const std::string ext = load.format == Format::csv ? ".csv" : ".tsv";
  write_dataset((dir / (stem + ".train" + ext)).string(), split.train, load.format, opts.names());
  write_dataset((dir / (stem + ".val" + ext)).string(), split.validation, load.format, opts.names());
  const auto manifest = split_manifest(split, fraction, seed);
  write_json(dir / (stem + ".split.json"), manifest);
  std::cout << "train " << split.train.size() << " / validation " << split.validation.size() << '\n'
            << manifest.dump(2) << '\n';
  return 0;
}

int cmd_train(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  const auto outcome = run_experiment(config);
  std::cout << to_json(outcome.row).dump() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& data_path, const std::string& format) {
  const Artifact artifact = load_artifact(model_dir);
  const LabelMap labels{{artifact.label_names.positive, 1}, {artifact.label_names.negative, 0}, {"1", 1}, {"0", 0}};
  const Dataset ds = load_dataset(
      data_path, LoadOptions{format.empty() ? format_from_path(data_path) : parse_format(format), labels,
                             artifact.task, true});
  const auto scores = artifact.scores(ds);
  const nlohmann::json report = evaluate(scores, ds.labels(), artifact.threshold);
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_matrix(const std::vector<std::string>& config_paths, const std::string& out_dir) {
  std::vector<ExperimentConfig> configs;
  for (const auto& p : config_paths) {
    ExperimentConfig c = load_config(p);
    if (!out_dir.empty()) c.output_dir = fs::path(out_dir) / (c.name + "_" + std::string(to_string(c.task)));
    configs.push_back(std::move(c));
  }
  const ResultsTable table = run_matrix(configs, out_dir);
  std::cout << table.text;
  return table.any_failed ? static_cast<int>(ExitCode::partial_failure) : 0;
}

int cmd_submit(const std::string& model_dir, const std::string& data_path, const std::string& out,
               const std::string& format) {
  const Artifact artifact = load_artifact(model_dir);
  const LabelMap labels{{artifact.label_names.positive, 1}, {artifact.label_names.negative, 0}, {"1", 1}, {"0", 0}};
  const Dataset ds = load_dataset(
      data_path, LoadOptions{format.empty() ? format_from_path(data_path) : parse_format(format), labels,
                             artifact.task, false});
  const auto predictions = threshold_predictions(artifact.scores(ds), artifact.threshold);
  emit_submission(ds.ids(), predictions, out, artifact.label_names);
  std::cout << "wrote " << predictions.size() << " predictions to " << out << '\n';
  return 0;
}

int cmd_synth(const std::string& dir, std::uint64_t seed) {
  const auto suite = synthetic::write_demo_suite(dir, seed);
  for (const auto& c : suite.configs) std::cout << c.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Config-driven harness for abusive and threatening text classification"};
  app.require_subcommand(1);

  DataOptions data_opts;
  std::string data_path, model_dir, out, format, config_path, out_dir;
  std::vector<std::string> config_paths;
  double fraction = 0.85;
  std::int64_t seed = 13;
  std::uint64_t synth_seed = 7;

  auto* stats = app.add_subcommand("stats", "class counts and inverse-frequency weights");
  stats->add_option("data", data_path, "labeled TSV/CSV file")->required();
  data_opts.add_to(stats);

  auto* split = app.add_subcommand("split", "deterministic stratified train/validation split");
  split->add_option("data", data_path, "labeled TSV/CSV file")->required();
  split->add_option("--fraction", fraction, "training fraction")->capture_default_str();
  split->add_option("--seed", seed, "split seed")->capture_default_str();
  split->add_option("--out-dir", out_dir, "output directory (default: next to the input)");
  data_opts.add_to(split);

  auto* train = app.add_subcommand("train", "run one experiment");
  train->add_option("config", config_path, "experiment config")->required();

  auto* eval = app.add_subcommand("evaluate", "score labeled data with a trained model");
  eval->add_option("model", model_dir, "model directory written by train")->required();
  eval->add_option("data", data_path, "labeled TSV/CSV file")->required();
  eval->add_option("--format", format, "tsv | csv");

  auto* matrix = app.add_subcommand("matrix", "run several experiments and render a leaderboard");
  matrix->add_option("configs", config_paths, "experiment configs")->required();
  matrix->add_option("--out", out_dir, "leaderboard and artifact directory");

  auto* submit = app.add_subcommand("submit", "write an id,label submission file");
  submit->add_option("model", model_dir, "model directory written by train")->required();
  submit->add_option("data", data_path, "test TSV/CSV file (label column optional)")->required();
  submit->add_option("--out", out, "submission CSV")->required();
  submit->add_option("--format", format, "tsv | csv");

  auto* synth = app.add_subcommand("synth", "write a synthetic two-task fixture suite with configs");
  synth->add_option("dir", out_dir, "output directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config_error);
  }

  try {
    if (*stats) return cmd_stats(data_path, data_opts);
    if (*split) return cmd_split(data_path, fraction, seed, out_dir, data_opts);
    if (*train) return cmd_train(config_path);
    if (*eval) return cmd_evaluate(model_dir, data_path, format);
    if (*matrix) return cmd_matrix(config_paths, out_dir);
    if (*submit) return cmd_submit(model_dir, data_path, out, format);
    if (*synth) return cmd_synth(out_dir, synth_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data_error);
  }
  return 0;
}
