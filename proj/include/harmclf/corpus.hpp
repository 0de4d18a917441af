#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmclf/delimited.hpp"
#include "harmclf/error.hpp"
#include "harmclf/random.hpp"
#include "harmclf/text.hpp"

namespace harmclf {

using delimited::Format;

enum class Task { abusive, threatening };

inline std::string_view to_string(Task task) {
  return task == Task::abusive ? "abusive" : "threatening";
}

inline Task parse_task(std::string_view s) {
  if (s == "abusive") return Task::abusive;
  if (s == "threatening") return Task::threatening;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected abusive|threatening)");
}

inline std::string_view to_string(Format format) { return format == Format::tsv ? "tsv" : "csv"; }

inline Format parse_format(std::string_view s) {
  if (s == "tsv") return Format::tsv;
  if (s == "csv") return Format::csv;
  throw ConfigError("unknown data format '" + std::string(s) + "' (expected tsv|csv)");
}

// .csv selects CSV; anything else is read as TSV.
inline Format format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? Format::csv : Format::tsv;
}

struct LabeledExample {
  std::string id;
  std::string text;  // normalized
  int label = 0;     // 1 = harmful class
};

struct Dataset {
  std::string name;
  Task task = Task::abusive;
  std::vector<LabeledExample> examples;
  bool labeled = true;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.id);
    return out;
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.label);
    return out;
  }
};

using LabelMap = std::map<std::string, int, std::less<>>;

struct LabelNames {
  std::string positive;
  std::string negative;

  const std::string& operator()(int label) const { return label == 1 ? positive : negative; }
};

inline LabelNames default_label_names(Task task) {
  if (task == Task::abusive) return {"Abusive", "Non-Abusive"};
  return {"Threatening", "Non-Threatening"};
}

// Class names for the task plus the numeric spellings "1" and "0".
inline LabelMap default_label_map(Task task) {
  const LabelNames names = default_label_names(task);
  return {{names.positive, 1}, {names.negative, 0}, {"1", 1}, {"0", 0}};
}

struct LoadOptions {
  Format format = Format::tsv;
  LabelMap label_map;
  Task task = Task::abusive;
  // When false a missing label column is accepted and every label is 0.
  bool require_labels = true;
};

inline Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  const std::string content = delimited::read_file(path);
  const auto records = delimited::parse(content, options.format);

  Dataset dataset;
  dataset.name = std::filesystem::path(path).stem().string();
  dataset.task = options.task;
  if (records.empty()) throw ParseError(1, "missing header row in '" + path + "'");

  const auto& header = records.front();
  std::ptrdiff_t id_col = -1, text_col = -1, label_col = -1;
  for (std::size_t c = 0; c < header.fields.size(); ++c) {
    std::string name = header.fields[c];
    while (!name.empty() && (name.back() == ' ' || name.back() == '\r')) name.pop_back();
    while (!name.empty() && name.front() == ' ') name.erase(name.begin());
    auto assign = [&](std::ptrdiff_t& col) {
      if (col >= 0) throw ParseError(header.line, "duplicate column '" + name + "'");
      col = static_cast<std::ptrdiff_t>(c);
    };
    if (name == "id") assign(id_col);
    else if (name == "text") assign(text_col);
    else if (name == "label") assign(label_col);
  }
  if (id_col < 0 || text_col < 0)
    throw ParseError(header.line, "header must name columns id, text, label");
  if (label_col < 0 && options.require_labels)
    throw ParseError(header.line, "header must name columns id, text, label");
  dataset.labeled = label_col >= 0;

  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& row = records[r];
    if (row.fields.size() != header.fields.size())
      throw ParseError(row.line, "expected " + std::to_string(header.fields.size()) +
                                     " fields, found " + std::to_string(row.fields.size()));
    LabeledExample example;
    example.id = row.fields[static_cast<std::size_t>(id_col)];
    if (example.id.empty()) throw ParseError(row.line, "empty id");
    auto normalized = text::normalize(row.fields[static_cast<std::size_t>(text_col)]);
    if (!normalized) throw ParseError(row.line, "text is not valid UTF-8");
    if (normalized->empty()) throw EmptyText(row.line, example.id);
    example.text = std::move(*normalized);
    if (label_col >= 0) {
      std::string_view raw = row.fields[static_cast<std::size_t>(label_col)];
      while (!raw.empty() && raw.back() == ' ') raw.remove_suffix(1);
      while (!raw.empty() && raw.front() == ' ') raw.remove_prefix(1);
      const auto it = options.label_map.find(raw);
      if (it == options.label_map.end()) throw UnknownLabel(row.line, std::string(raw));
      if (it->second != 0 && it->second != 1)
        throw ConfigError("label map sends '" + it->first + "' outside {0, 1}");
      example.label = it->second;
    }
    if (!seen.insert(example.id).second) throw DuplicateId(example.id);
    dataset.examples.push_back(std::move(example));
  }
  return dataset;
}

inline Dataset load_dataset(const std::string& path, Format format, const LabelMap& label_map,
                            Task task = Task::abusive) {
  return load_dataset(path, LoadOptions{format, label_map, task, true});
}

inline void write_dataset(const std::string& path, const Dataset& dataset, Format format,
                          const LabelNames& names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << delimited::format_row({"id", "text", "label"}, format);
  for (const auto& e : dataset.examples) out << delimited::format_row({e.id, e.text, names(e.label)}, format);
}

struct ClassCounts {
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t total = 0;

  std::size_t count(int label) const noexcept { return label == 1 ? n_positive : n_negative; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

inline ClassCounts dataset_stats(const Dataset& dataset) {
  ClassCounts counts;
  for (const auto& e : dataset.examples) (e.label == 1 ? counts.n_positive : counts.n_negative)++;
  counts.total = counts.n_positive + counts.n_negative;
  return counts;
}

enum class WeightScheme { uniform, inverse_frequency };

inline std::string_view to_string(WeightScheme scheme) {
  return scheme == WeightScheme::uniform ? "uniform" : "inverse_frequency";
}

inline WeightScheme parse_weight_scheme(std::string_view s) {
  if (s == "uniform") return WeightScheme::uniform;
  if (s == "inverse_frequency") return WeightScheme::inverse_frequency;
  throw ConfigError("unknown class weight scheme '" + std::string(s) +
                    "' (expected uniform|inverse_frequency)");
}

struct ClassWeights {
  double w_positive = 1.0;
  double w_negative = 1.0;

  double operator()(int label) const noexcept { return label == 1 ? w_positive : w_negative; }
};

// inverse_frequency: w_c = total / (2 n_c), so the mean weight per example is 1.
inline ClassWeights class_weights(const ClassCounts& counts, WeightScheme scheme) {
  if (scheme == WeightScheme::uniform) return {1.0, 1.0};
  if (counts.n_positive == 0 || counts.n_negative == 0)
    throw DegenerateClass("inverse_frequency weights need examples of both classes (positive=" +
                          std::to_string(counts.n_positive) +
                          ", negative=" + std::to_string(counts.n_negative) + ")");
  const double total = static_cast<double>(counts.total);
  return {total / (2.0 * static_cast<double>(counts.n_positive)),
          total / (2.0 * static_cast<double>(counts.n_negative))};
}

inline std::vector<double> example_weights(const Dataset& dataset, const ClassWeights& weights) {
  std::vector<double> out;
  out.reserve(dataset.size());
  for (const auto& e : dataset.examples) out.push_back(weights(e.label));
  return out;
}

struct Split {
  Dataset train;
  Dataset validation;
};

// Per-class train sizes: floor(fraction * n_c), then one extra example per
// class in order of largest fractional remainder until the train total is
// round(fraction * total). Within a class, examples are ranked by a seeded
// hash of their id, so the partition does not depend on file order. Both
// outputs keep the input order.
inline Split stratified_split(const Dataset& dataset, double train_fraction, std::int64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  const ClassCounts counts = dataset_stats(dataset);
  if (counts.n_positive == 0 || counts.n_negative == 0)
    throw DegenerateClass("stratified split needs examples of both classes");

  // Guard against 0.85 * 20 evaluating to 16.999...
  constexpr double slack = 1e-9;
  std::size_t quota[2];
  double remainder[2];
  for (int label : {0, 1}) {
    const double exact = train_fraction * static_cast<double>(counts.count(label));
    quota[label] = static_cast<std::size_t>(std::floor(exact + slack));
    remainder[label] = exact - static_cast<double>(quota[label]);
  }
  const auto target =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(counts.total)));
  // Label order by descending remainder; ties go to the positive class.
  const int order[2] = {remainder[1] >= remainder[0] ? 1 : 0, remainder[1] >= remainder[0] ? 0 : 1};
  for (int k = 0; quota[0] + quota[1] < target && k < 2; ++k) ++quota[order[k]];

  const auto seed_bits = static_cast<std::uint64_t>(seed);
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked[2];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& e = dataset.examples[i];
    ranked[e.label].emplace_back(keyed_hash(e.id, seed_bits, 0x5311u), i);
  }
  std::vector<char> in_train(dataset.size(), 0);
  for (int label : {0, 1}) {
    auto& members = ranked[label];
    std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return dataset.examples[a.second].id < dataset.examples[b.second].id;
    });
    for (std::size_t k = 0; k < quota[label]; ++k) in_train[members[k].second] = 1;
  }

  Split split;
  split.train.name = dataset.name + ".train";
  split.validation.name = dataset.name + ".val";
  split.train.task = split.validation.task = dataset.task;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    (in_train[i] ? split.train : split.validation).examples.push_back(dataset.examples[i]);
  return split;
}

inline std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[static_cast<std::size_t>(i)] = digits[value & 0xf];
  return out;
}

// Order-independent digest of a dataset's id set.
inline std::string ids_hash(const Dataset& dataset) {
  auto ids = dataset.ids();
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& id : ids) {
    h = fnv1a64(id, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

inline nlohmann::json split_manifest(const Split& split, double fraction, std::int64_t seed) {
  return {{"seed", seed},
          {"fraction", fraction},
          {"train_ids_hash", ids_hash(split.train)},
          {"val_ids_hash", ids_hash(split.validation)}};
}

}  // namespace harmclf
