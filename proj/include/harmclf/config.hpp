#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmclf/boosted.hpp"
#include "harmclf/corpus.hpp"
#include "harmclf/embeddings.hpp"
#include "harmclf/error.hpp"
#include "harmclf/neural.hpp"

// Experiment configuration files.
//
// The format is line-oriented `key = value` text. `[section]` lines prefix
// the keys that follow with `section.`, so
//
//   [neural]
//   epochs = 10
//
// and `neural.epochs = 10` are equivalent. `#` and `;` start comments.
// Every key must appear in config_keys(); anything else is an error.
// Environment variables named HARMCLF_<KEY> (key upper-cased, dots
// replaced by underscores) override file values.
namespace harmclf {

inline constexpr std::string_view kEnvPrefix = "HARMCLF_";

enum class ClassifierKind { boosted_xgb_like, boosted_lgbm_like, neural_scratch, neural_checkpoint };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::boosted_xgb_like: return "boosted_xgb_like";
    case ClassifierKind::boosted_lgbm_like: return "boosted_lgbm_like";
    case ClassifierKind::neural_scratch: return "neural_scratch";
    case ClassifierKind::neural_checkpoint: return "neural_checkpoint";
  }
  return "?";
}

inline ClassifierKind parse_classifier(std::string_view s) {
  for (auto k : {ClassifierKind::boosted_xgb_like, ClassifierKind::boosted_lgbm_like,
                 ClassifierKind::neural_scratch, ClassifierKind::neural_checkpoint})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown classifier '" + std::string(s) +
                    "' (expected boosted_xgb_like|boosted_lgbm_like|neural_scratch|neural_checkpoint)");
}

inline bool is_boosted(ClassifierKind k) {
  return k == ClassifierKind::boosted_xgb_like || k == ClassifierKind::boosted_lgbm_like;
}

enum class EmbeddingSource { hashing, precomputed };

struct KeySpec {
  std::string_view key;
  std::string_view help;
};

inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"name", "display name in leaderboards (default: classifier)"},
      {"task", "abusive | threatening"},
      {"classifier", "boosted_xgb_like | boosted_lgbm_like | neural_scratch | neural_checkpoint"},
      {"data.train", "labeled training file"},
      {"data.test", "labeled test file"},
      {"data.format", "tsv | csv (default: from file extension)"},
      {"data.positive_label", "label text of the harmful class (default: Abusive / Threatening)"},
      {"data.negative_label", "label text of the other class (default: Non-Abusive / Non-Threatening)"},
      {"split.enabled", "hold out a validation split for neural training (task default)"},
      {"split.fraction", "training fraction of the split (default 0.85)"},
      {"split.seed", "split seed (default 13)"},
      {"embedding.provider", "hashing | precomputed"},
      {"embedding.dim", "vector size (default 256 hashing, 1024 precomputed)"},
      {"embedding.path", "precomputed vectors, id<TAB>v1 ... vd"},
      {"embedding.seed", "hashing seed (default 0)"},
      {"boost.n_rounds", "boosting rounds"},
      {"boost.max_depth", "maximum tree depth"},
      {"boost.learning_rate", "shrinkage"},
      {"boost.lambda", "leaf L2 penalty"},
      {"boost.gamma", "minimum split gain"},
      {"boost.min_child_hessian", "minimum hessian per child"},
      {"boost.max_leaves", "leaf budget, 0 = none"},
      {"boost.min_child_samples", "minimum examples per child"},
      {"boost.seed", "seed recorded with the model"},
      {"boost.class_weights", "uniform | inverse_frequency (default uniform)"},
      {"neural.epochs", "training epochs (default 10)"},
      {"neural.learning_rate", "initial learning rate (default 2e-5)"},
      {"neural.batch_size", "mini-batch size (default 16)"},
      {"neural.selection", "best_validation | last_epoch (task default)"},
      {"neural.class_weights", "uniform | inverse_frequency (task default)"},
      {"neural.seed", "initialization and shuffling seed (default 0)"},
      {"neural.beta1", "first-moment decay (default 0.9)"},
      {"neural.beta2", "second-moment decay (default 0.999)"},
      {"neural.epsilon", "optimizer epsilon (default 1e-8)"},
      {"neural.weight_decay", "decoupled weight decay (default 0.01)"},
      {"neural.embed_dim", "token embedding size (default 32)"},
      {"neural.hidden_dim", "dense layer size (default 32)"},
      {"neural.max_len", "tokens per example (default 64)"},
      {"neural.max_vocab", "vocabulary cap including reserved ids, 0 = none (default 20000)"},
      {"neural.min_count", "minimum token frequency (default 1)"},
      {"neural.checkpoint", "encoder checkpoint for neural_checkpoint"},
      {"eval.threshold", "decision threshold (default 0.5)"},
      {"output.dir", "artifact directory (default: output/<name>_<task>)"},
  };
  return keys;
}

inline std::string env_name(std::string_view key) {
  std::string out(kEnvPrefix);
  for (const char c : key) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

inline bool is_known_key(std::string_view key) {
  for (const auto& spec : config_keys())
    if (spec.key == key) return true;
  return false;
}

using RawConfig = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline RawConfig parse_config_text(std::string_view content) {
  RawConfig raw;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    std::string body = trim(std::string_view(line).substr(0, comment));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    if (!is_known_key(key))
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (raw.contains(key))
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' given twice");
    raw[key] = value;
  }
  return raw;
}

inline void apply_env_overrides(RawConfig& raw) {
  for (const auto& spec : config_keys())
    if (const char* value = std::getenv(env_name(spec.key).c_str())) raw[std::string(spec.key)] = value;
}

struct ExperimentConfig {
  std::string name;
  Task task = Task::abusive;
  ClassifierKind classifier = ClassifierKind::neural_scratch;

  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::optional<Format> format;
  LabelNames label_names;

  bool split_enabled = true;
  double split_fraction = 0.85;
  std::int64_t split_seed = 13;

  EmbeddingSource embedding_source = EmbeddingSource::hashing;
  std::size_t embedding_dim = kDefaultHashDim;
  std::filesystem::path embedding_path;
  std::int64_t embedding_seed = 0;

  BoostParams boost;
  WeightScheme boost_weights = WeightScheme::uniform;

  TrainConfig train;
  WeightScheme neural_weights = WeightScheme::uniform;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t max_len = 64;
  std::size_t max_vocab = 20000;
  std::size_t min_count = 1;
  std::filesystem::path checkpoint;

  double threshold = 0.5;
  std::filesystem::path output_dir;

  Format train_format() const { return format.value_or(format_from_path(train_path)); }
  Format test_format() const { return format.value_or(format_from_path(test_path)); }

  LabelMap label_map() const {
    return {{label_names.positive, 1}, {label_names.negative, 0}, {"1", 1}, {"0", 0}};
  }

  std::int64_t seed() const { return is_boosted(classifier) ? boost.seed : train.seed; }
};

namespace detail {

template <typename T>
T parse_number(const RawConfig& raw, const std::string& key, T fallback) {
  const auto it = raw.find(key);
  if (it == raw.end()) return fallback;
  const std::string& s = it->second;
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_floating_point_v<T>) {
      value = static_cast<T>(std::stod(s, &used));
    } else if constexpr (std::is_signed_v<T>) {
      value = static_cast<T>(std::stoll(s, &used));
    } else {
      if (!s.empty() && s.front() == '-') throw std::invalid_argument("negative");
      value = static_cast<T>(std::stoull(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + s + "' as a number");
  }
}

inline bool parse_bool(const RawConfig& raw, const std::string& key, bool fallback) {
  const auto it = raw.find(key);
  if (it == raw.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + it->second + "'");
}

inline std::string get(const RawConfig& raw, const std::string& key, const std::string& fallback = {}) {
  const auto it = raw.find(key);
  return it == raw.end() ? fallback : it->second;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  const std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace detail

// Resolves defaults and validates. Relative paths are taken relative to
// base_dir. Nothing is read or written besides existence checks.
inline ExperimentConfig resolve_config(const RawConfig& raw, const std::filesystem::path& base_dir = {}) {
  using detail::get;
  using detail::parse_number;
  ExperimentConfig c;
  if (!raw.contains("task")) throw ConfigError("missing required key 'task'");
  if (!raw.contains("classifier")) throw ConfigError("missing required key 'classifier'");
  c.task = parse_task(get(raw, "task"));
  c.classifier = parse_classifier(get(raw, "classifier"));
  c.name = get(raw, "name", std::string(to_string(c.classifier)));

  const bool abusive = c.task == Task::abusive;
  c.train_path = detail::resolve(base_dir, get(raw, "data.train"));
  c.test_path = detail::resolve(base_dir, get(raw, "data.test"));
  if (c.train_path.empty()) throw ConfigError("missing required key 'data.train'");
  if (c.test_path.empty()) throw ConfigError("missing required key 'data.test'");
  if (raw.contains("data.format")) c.format = parse_format(get(raw, "data.format"));
  const LabelNames defaults = default_label_names(c.task);
  c.label_names.positive = get(raw, "data.positive_label", defaults.positive);
  c.label_names.negative = get(raw, "data.negative_label", defaults.negative);
  if (c.label_names.positive == c.label_names.negative)
    throw ConfigError("positive and negative label names must differ");

  c.split_enabled = detail::parse_bool(raw, "split.enabled", abusive);
  c.split_fraction = parse_number<double>(raw, "split.fraction", 0.85);
  c.split_seed = parse_number<std::int64_t>(raw, "split.seed", 13);
  if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0))
    throw ConfigError("split.fraction must lie in (0, 1)");

  const std::string provider = get(raw, "embedding.provider", "hashing");
  if (provider == "hashing") c.embedding_source = EmbeddingSource::hashing;
  else if (provider == "precomputed") c.embedding_source = EmbeddingSource::precomputed;
  else throw ConfigError("embedding.provider must be hashing or precomputed, got '" + provider + "'");
  c.embedding_dim = parse_number<std::size_t>(
      raw, "embedding.dim",
      c.embedding_source == EmbeddingSource::hashing ? kDefaultHashDim : kDefaultPrecomputedDim);
  c.embedding_path = detail::resolve(base_dir, get(raw, "embedding.path"));
  c.embedding_seed = parse_number<std::int64_t>(raw, "embedding.seed", 0);

  c.boost = c.classifier == ClassifierKind::boosted_lgbm_like ? BoostParams::lgbm_like() : BoostParams::xgb_like();
  c.boost.n_rounds = parse_number<int>(raw, "boost.n_rounds", c.boost.n_rounds);
  c.boost.max_depth = parse_number<int>(raw, "boost.max_depth", c.boost.max_depth);
  c.boost.learning_rate = parse_number<double>(raw, "boost.learning_rate", c.boost.learning_rate);
  c.boost.lambda = parse_number<double>(raw, "boost.lambda", c.boost.lambda);
  c.boost.gamma = parse_number<double>(raw, "boost.gamma", c.boost.gamma);
  c.boost.min_child_hessian = parse_number<double>(raw, "boost.min_child_hessian", c.boost.min_child_hessian);
  c.boost.max_leaves = parse_number<int>(raw, "boost.max_leaves", c.boost.max_leaves);
  c.boost.min_child_samples = parse_number<int>(raw, "boost.min_child_samples", c.boost.min_child_samples);
  c.boost.seed = parse_number<std::int64_t>(raw, "boost.seed", 0);
  c.boost_weights = parse_weight_scheme(get(raw, "boost.class_weights", "uniform"));

  c.train.epochs = parse_number<int>(raw, "neural.epochs", 10);
  c.train.learning_rate = parse_number<double>(raw, "neural.learning_rate", 2e-5);
  c.train.batch_size = parse_number<std::size_t>(raw, "neural.batch_size", 16);
  c.train.selection =
      parse_selection(get(raw, "neural.selection", abusive ? "best_validation" : "last_epoch"));
  c.neural_weights =
      parse_weight_scheme(get(raw, "neural.class_weights", abusive ? "uniform" : "inverse_frequency"));
  c.train.seed = parse_number<std::int64_t>(raw, "neural.seed", 0);
  c.train.beta1 = parse_number<double>(raw, "neural.beta1", 0.9);
  c.train.beta2 = parse_number<double>(raw, "neural.beta2", 0.999);
  c.train.epsilon = parse_number<double>(raw, "neural.epsilon", 1e-8);
  c.train.weight_decay = parse_number<double>(raw, "neural.weight_decay", 0.01);
  c.embed_dim = parse_number<std::size_t>(raw, "neural.embed_dim", 32);
  c.hidden_dim = parse_number<std::size_t>(raw, "neural.hidden_dim", 32);
  c.max_len = parse_number<std::size_t>(raw, "neural.max_len", 64);
  c.max_vocab = parse_number<std::size_t>(raw, "neural.max_vocab", 20000);
  c.min_count = parse_number<std::size_t>(raw, "neural.min_count", 1);
  c.checkpoint = detail::resolve(base_dir, get(raw, "neural.checkpoint"));

  c.threshold = parse_number<double>(raw, "eval.threshold", 0.5);
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ConfigError("eval.threshold must lie in (0, 1)");
  c.train.threshold = c.threshold;
  c.output_dir = detail::resolve(
      base_dir, get(raw, "output.dir", "output/" + c.name + "_" + std::string(to_string(c.task))));

  if (!std::filesystem::is_regular_file(c.train_path))
    throw ConfigError("data.train '" + c.train_path.string() + "' does not exist");
  if (!std::filesystem::is_regular_file(c.test_path))
    throw ConfigError("data.test '" + c.test_path.string() + "' does not exist");

  if (is_boosted(c.classifier)) {
    c.boost.validate();
    if (c.embedding_source == EmbeddingSource::hashing && c.embedding_dim < 2)
      throw ConfigError("embedding.dim must be at least 2");
    if (c.embedding_source == EmbeddingSource::precomputed) {
      if (c.embedding_path.empty()) throw ConfigError("embedding.provider = precomputed needs embedding.path");
      if (!std::filesystem::is_regular_file(c.embedding_path))
        throw ConfigError("embedding.path '" + c.embedding_path.string() + "' does not exist");
    }
  } else {
    c.train.validate();
    if (c.embed_dim == 0 || c.hidden_dim == 0 || c.max_len == 0)
      throw ConfigError("neural.embed_dim, neural.hidden_dim and neural.max_len must be positive");
    if (c.max_vocab == 1 || c.max_vocab == 2) throw ConfigError("neural.max_vocab must be 0 or larger than 2");
    if (c.train.selection == Selection::best_validation && !c.split_enabled)
      throw ConfigError("neural.selection = best_validation requires split.enabled = true");
    if (!c.checkpoint.empty() && !std::filesystem::exists(c.checkpoint))
      throw ConfigError("neural.checkpoint '" + c.checkpoint.string() + "' does not exist");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, bool use_env = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  RawConfig raw = parse_config_text(buffer.str());
  if (use_env) apply_env_overrides(raw);
  return resolve_config(raw, path.parent_path());
}

// Every resolved setting that can change a result. The output directory is
// left out so the same experiment written elsewhere hashes the same.
inline nlohmann::json canonical_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"name", c.name},
      {"task", to_string(c.task)},
      {"classifier", to_string(c.classifier)},
      {"data.train", c.train_path.lexically_normal().generic_string()},
      {"data.test", c.test_path.lexically_normal().generic_string()},
      {"data.train_format", to_string(c.train_format())},
      {"data.test_format", to_string(c.test_format())},
      {"data.positive_label", c.label_names.positive},
      {"data.negative_label", c.label_names.negative},
      {"eval.threshold", c.threshold},
  };
  if (is_boosted(c.classifier)) {
    j["embedding.provider"] = c.embedding_source == EmbeddingSource::hashing ? "hashing" : "precomputed";
    if (c.embedding_source == EmbeddingSource::hashing) {
      j["embedding.dim"] = c.embedding_dim;
      j["embedding.seed"] = c.embedding_seed;
    } else {
      j["embedding.path"] = c.embedding_path.lexically_normal().generic_string();
    }
    j["boost"] = c.boost;
    j["boost.class_weights"] = to_string(c.boost_weights);
  } else {
    j["split.enabled"] = c.split_enabled;
    if (c.split_enabled) {
      j["split.fraction"] = c.split_fraction;
      j["split.seed"] = c.split_seed;
    }
    j["neural"] = {{"epochs", c.train.epochs},
                   {"learning_rate", c.train.learning_rate},
                   {"batch_size", c.train.batch_size},
                   {"selection", to_string(c.train.selection)},
                   {"class_weights", to_string(c.neural_weights)},
                   {"seed", c.train.seed},
                   {"beta1", c.train.beta1},
                   {"beta2", c.train.beta2},
                   {"epsilon", c.train.epsilon},
                   {"weight_decay", c.train.weight_decay},
                   {"embed_dim", c.embed_dim},
                   {"hidden_dim", c.hidden_dim},
                   {"max_len", c.max_len},
                   {"max_vocab", c.max_vocab},
                   {"min_count", c.min_count},
                   {"checkpoint", c.checkpoint.lexically_normal().generic_string()}};
  }
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  // nlohmann::json objects iterate keys in sorted order, so dump() is canonical.
  return hex64(fnv1a64(canonical_json(c).dump()));
}

}  // namespace harmclf
