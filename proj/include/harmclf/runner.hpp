#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmclf/boosted.hpp"
#include "harmclf/config.hpp"
#include "harmclf/corpus.hpp"
#include "harmclf/embeddings.hpp"
#include "harmclf/error.hpp"
#include "harmclf/metrics.hpp"
#include "harmclf/neural.hpp"

namespace harmclf {

struct ResultRow {
  std::string classifier;  // display name
  std::string task;
  bool ok = true;
  double f1_positive = 0.0;
  double f1_macro = 0.0;
  double roc_auc = 0.0;
  std::int64_t seed = 0;
  double wall_time = 0.0;  // seconds
  std::string config_hash;
  std::string error;
};

inline nlohmann::json to_json(const ResultRow& r, bool with_wall_time = true) {
  nlohmann::json j = {{"classifier", r.classifier},
                      {"task", r.task},
                      {"status", r.ok ? "ok" : "failed"},
                      {"seed", r.seed},
                      {"config_hash", r.config_hash}};
  if (r.ok) {
    j["f1_positive"] = r.f1_positive;
    j["f1_macro"] = r.f1_macro;
    j["roc_auc"] = r.roc_auc;
  } else {
    j["error"] = r.error;
  }
  if (with_wall_time) j["wall_time"] = r.wall_time;
  return j;
}

// ---------------------------------------------------------------------------
// Trained models on disk
//
// <dir>/artifact.json describes how to score new data; the model itself is
// <dir>/model.json (boosted) or the checkpoint directory <dir>/checkpoint.

struct BoostedPredictor {
  TreeEnsemble model;
  std::shared_ptr<const EmbeddingProvider> embedder;
};

struct NeuralPredictor {
  NeuralClassifier model;
};

struct Artifact {
  std::string classifier;
  Task task = Task::abusive;
  double threshold = 0.5;
  LabelNames label_names;
  std::variant<BoostedPredictor, NeuralPredictor> predictor;

  std::vector<double> scores(const Dataset& data) const {
    if (const auto* b = std::get_if<BoostedPredictor>(&predictor))
      return predict_proba(b->model, embed_batch(*b->embedder, data));
    return predict_scores(std::get<NeuralPredictor>(predictor).model, data);
  }
};

inline std::shared_ptr<const EmbeddingProvider> make_embedder(const ExperimentConfig& c) {
  if (c.embedding_source == EmbeddingSource::hashing)
    return std::make_shared<HashingEmbedder>(c.embedding_dim, c.embedding_seed);
  std::size_t dim = 0;
  auto table = read_embedding_table(c.embedding_path.string(), &dim);
  return std::make_shared<PrecomputedEmbedder>(std::move(table), dim, c.embedding_path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline Artifact load_artifact(const std::filesystem::path& dir) {
  const auto meta = read_json(dir / "artifact.json");
  Artifact a;
  try {
    a.classifier = meta.at("classifier").get<std::string>();
    a.task = parse_task(meta.at("task").get<std::string>());
    a.threshold = meta.at("threshold").get<double>();
    a.label_names = {meta.at("positive_label").get<std::string>(),
                     meta.at("negative_label").get<std::string>()};
    const auto kind = meta.at("kind").get<std::string>();
    if (kind == "boosted") {
      BoostedPredictor b;
      b.model = ensemble_from_json(read_json(dir / "model.json"));
      const auto& emb = meta.at("embedding");
      if (emb.at("provider") == "hashing") {
        b.embedder = std::make_shared<HashingEmbedder>(emb.at("dim").get<std::size_t>(),
                                                       emb.at("seed").get<std::int64_t>());
      } else {
        const auto path = emb.at("path").get<std::string>();
        std::size_t dim = 0;
        auto table = read_embedding_table(path, &dim);
        b.embedder = std::make_shared<PrecomputedEmbedder>(std::move(table), dim, path);
      }
      a.predictor = std::move(b);
    } else if (kind == "neural") {
      a.predictor = NeuralPredictor{load_checkpoint(dir / "checkpoint")};
    } else {
      throw DataError("unknown artifact kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed artifact in '" + dir.string() + "': " + e.what());
  }
  return a;
}

// ---------------------------------------------------------------------------
// Submission files

inline void emit_submission(const std::vector<std::string>& ids, const std::vector<int>& predictions,
                            const std::filesystem::path& path, const LabelNames& names) {
  if (ids.size() != predictions.size())
    throw ShapeError("ids (" + std::to_string(ids.size()) + ") and predictions (" +
                     std::to_string(predictions.size()) + ") differ in length");
  if (ids.empty()) throw ShapeError("refusing to write an empty submission");
  std::ostringstream body;
  body << delimited::format_row({"id", "label"}, Format::csv);
  for (std::size_t i = 0; i < ids.size(); ++i)
    body << delimited::format_row({ids[i], names(predictions[i])}, Format::csv);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write submission '" + path.string() + "'");
  out << body.str();
}

inline std::vector<int> threshold_predictions(const std::vector<double>& scores, double threshold) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const double s : scores) out.push_back(s >= threshold ? 1 : 0);
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentOutcome {
  ResultRow row;
  EvalReport report;
  std::vector<EpochRecord> history;  // neural runs only
  int selected_epoch = 0;
  std::filesystem::path artifact_dir;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, e);
  }
}

inline void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to '" + path.string() + "'");
  out << line << '\n';
}

}  // namespace detail

// load -> (split) -> embed or tokenize -> train -> evaluate -> persist.
// The config is validated by resolve_config before this runs, so a bad
// config never reaches the filesystem.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, std::ostream& log = std::clog) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  out.row.classifier = c.name;
  out.row.task = std::string(to_string(c.task));
  out.row.seed = c.seed();
  out.row.config_hash = config_hash(c);

  const LabelMap labels = c.label_map();
  const Dataset train = detail::stage("load", [&] {
    return load_dataset(c.train_path.string(), LoadOptions{c.train_format(), labels, c.task, true});
  });
  const Dataset test = detail::stage("load", [&] {
    return load_dataset(c.test_path.string(), LoadOptions{c.test_format(), labels, c.task, true});
  });
  if (train.empty()) throw StageError("load", EmptyDataset("training set is empty"));
  if (test.empty()) throw StageError("load", EmptyDataset("test set is empty"));

  std::vector<double> scores;
  nlohmann::json artifact_meta = {{"classifier", c.name},
                                  {"task", to_string(c.task)},
                                  {"threshold", c.threshold},
                                  {"positive_label", c.label_names.positive},
                                  {"negative_label", c.label_names.negative},
                                  {"config_hash", out.row.config_hash}};
  std::variant<TreeEnsemble, NeuralClassifier> trained;

  if (is_boosted(c.classifier)) {
    const auto embedder = detail::stage("embed", [&] { return make_embedder(c); });
    const EmbeddingMatrix X = detail::stage("embed", [&] { return embed_batch(*embedder, train); });
    const EmbeddingMatrix X_test = detail::stage("embed", [&] { return embed_batch(*embedder, test); });
    const auto y = train.labels();
    std::vector<double> weights;
    detail::stage("train", [&] {
      weights = example_weights(train, class_weights(dataset_stats(train), c.boost_weights));
      trained = train_boosted(X, y, std::span<const double>(weights), c.boost);
    });
    scores = detail::stage("evaluate", [&] { return predict_proba(std::get<TreeEnsemble>(trained), X_test); });
    artifact_meta["kind"] = "boosted";
    if (c.embedding_source == EmbeddingSource::hashing)
      artifact_meta["embedding"] = {{"provider", "hashing"}, {"dim", c.embedding_dim}, {"seed", c.embedding_seed}};
    else
      artifact_meta["embedding"] = {{"provider", "precomputed"}, {"path", std::filesystem::absolute(c.embedding_path).string()}};
  } else {
    Dataset fit = train;
    std::optional<Dataset> validation;
    if (c.split_enabled) {
      auto split = detail::stage("split", [&] { return stratified_split(train, c.split_fraction, c.split_seed); });
      fit = std::move(split.train);
      validation = std::move(split.validation);
    }
    NeuralClassifier model = detail::stage("train", [&] {
      if (c.classifier == ClassifierKind::neural_checkpoint && !c.checkpoint.empty())
        return attach_head(load_external_checkpoint(c.checkpoint), c.max_len, c.train.seed);
      if (c.classifier == ClassifierKind::neural_checkpoint)
        log << "warning: " << c.name << ": no neural.checkpoint configured, training from scratch\n";
      return make_classifier(Vocabulary::build(fit, c.max_vocab, c.min_count), c.embed_dim, c.hidden_dim,
                             c.max_len, c.train.seed);
    });
    TrainConfig tc = c.train;
    auto result = detail::stage("train", [&] {
      tc.class_weights = class_weights(dataset_stats(fit), c.neural_weights);
      return train_classifier(std::move(model), fit, validation ? &*validation : nullptr, tc);
    });
    out.history = result.history;
    out.selected_epoch = result.selected_epoch;
    scores = detail::stage("evaluate", [&] { return predict_scores(result.model, test); });
    trained = std::move(result.model);
    artifact_meta["kind"] = "neural";
  }

  out.report = detail::stage("evaluate", [&] { return evaluate(scores, test.labels(), c.threshold); });
  out.row.f1_positive = out.report.f1_positive;
  out.row.f1_macro = out.report.f1_macro;
  out.row.roc_auc = out.report.roc_auc;
  out.row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  detail::stage("persist", [&] {
    out.artifact_dir = c.output_dir / "model";
    std::filesystem::create_directories(out.artifact_dir);
    if (const auto* ensemble = std::get_if<TreeEnsemble>(&trained)) {
      write_json(out.artifact_dir / "model.json", to_json(*ensemble));
    } else {
      save_checkpoint(out.artifact_dir / "checkpoint", std::get<NeuralClassifier>(trained));
    }
    write_json(out.artifact_dir / "artifact.json", artifact_meta);
    nlohmann::json report = out.report;
    if (!out.history.empty()) {
      nlohmann::json history = nlohmann::json::array();
      for (const auto& h : out.history) {
        nlohmann::json e = {{"epoch", h.epoch}, {"train_loss", h.train_loss}};
        if (h.val_f1) e["val_f1"] = *h.val_f1;
        history.push_back(e);
      }
      report["history"] = history;
      report["selected_epoch"] = out.selected_epoch;
    }
    write_json(c.output_dir / "eval.json", report);
    detail::append_line(c.output_dir / "results.jsonl", to_json(out.row).dump());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Leaderboards

struct ResultsTable {
  std::vector<ResultRow> rows;  // config order
  std::string text;             // rendered leaderboard
  bool any_failed = false;
};

inline std::string format_metric(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(5) << x;
  return s.str();
}

// One line per classifier, an (F1, ROC-AUC) column pair per task. Rows are
// ordered by F1 on the first task, best first; failed or missing results
// sort last.
inline std::string render_table(const std::vector<ResultRow>& rows) {
  std::vector<std::string> tasks, classifiers;
  for (const auto& r : rows) {
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    if (std::find(classifiers.begin(), classifiers.end(), r.classifier) == classifiers.end())
      classifiers.push_back(r.classifier);
  }
  auto find = [&](const std::string& cls, const std::string& task) -> const ResultRow* {
    for (const auto& r : rows)
      if (r.classifier == cls && r.task == task) return &r;
    return nullptr;
  };
  auto sort_key = [&](const std::string& cls) {
    const ResultRow* r = tasks.empty() ? nullptr : find(cls, tasks.front());
    return r && r->ok ? r->f1_positive : -1.0;
  };
  std::stable_sort(classifiers.begin(), classifiers.end(),
                   [&](const std::string& a, const std::string& b) { return sort_key(a) > sort_key(b); });

  std::vector<std::string> header = {"Classifier"};
  for (const auto& t : tasks) {
    header.push_back(t + " F1");
    header.push_back(t + " ROC-AUC");
  }
  std::vector<std::vector<std::string>> cells = {header};
  for (const auto& cls : classifiers) {
    std::vector<std::string> line = {cls};
    for (const auto& t : tasks) {
      const ResultRow* r = find(cls, t);
      if (r == nullptr) {
        line.insert(line.end(), {"-", "-"});
      } else if (!r->ok) {
        line.insert(line.end(), {"FAILED", "FAILED"});
      } else {
        line.push_back(format_metric(r->f1_positive));
        line.push_back(format_metric(r->roc_auc));
      }
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t k = 0; k < line.size(); ++k) width[k] = std::max(width[k], line[k].size());

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      out << (k == 0 ? "| " : " | ");
      if (k == 0) out << std::left;
      else out << std::right;
      out << std::setw(static_cast<int>(width[k])) << line[k];
    }
    out << " |\n";
  };
  auto rule = [&] {
    for (std::size_t k = 0; k < width.size(); ++k) out << (k == 0 ? "|-" : "-|-") << std::string(width[k], '-');
    out << "-|\n";
  };
  emit(cells.front());
  rule();
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  return out.str();
}

// Runs every experiment in order. A failing experiment becomes a FAILED
// row; the rest still run. Writes leaderboard.txt and leaderboard.jsonl
// (one line per config) into out_dir when it is non-empty.
inline ResultsTable run_matrix(const std::vector<ExperimentConfig>& configs,
                               const std::filesystem::path& out_dir = {}, std::ostream& log = std::clog) {
  if (configs.empty()) throw ConfigError("matrix needs at least one config");
  ResultsTable table;
  for (const auto& c : configs) {
    try {
      table.rows.push_back(run_experiment(c, log).row);
    } catch (const Error& e) {
      ResultRow failed;
      failed.classifier = c.name;
      failed.task = std::string(to_string(c.task));
      failed.ok = false;
      failed.seed = c.seed();
      failed.config_hash = config_hash(c);
      failed.error = e.what();
      log << "error: " << c.name << "/" << to_string(c.task) << ": " << e.what() << '\n';
      table.rows.push_back(std::move(failed));
      table.any_failed = true;
    }
  }
  table.text = render_table(table.rows);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream txt(out_dir / "leaderboard.txt", std::ios::binary);
    txt << table.text;
    std::ofstream jsonl(out_dir / "leaderboard.jsonl", std::ios::binary);
    for (const auto& r : table.rows) jsonl << to_json(r).dump() << '\n';
    if (!txt || !jsonl) throw DataError("cannot write leaderboard files in '" + out_dir.string() + "'");
  }
  return table;
}

}  // namespace harmclf
