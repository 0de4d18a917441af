#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "harmclf/corpus.hpp"
#include "harmclf/random.hpp"
#include "harmclf/text.hpp"

// Seeded synthetic corpora standing in for the shared-task data, which is
// not redistributable. Words are random strings over the Urdu alphabet.
//
// Every positive example carries at least one word from a dedicated
// "marker" list and no negative example carries any, so the two classes
// are separable by a bag-of-words rule. Negatives may carry "decoy" words
// that never occur in positives.
namespace harmclf::synthetic {

struct CorpusSpec {
  std::string name = "synthetic";
  Task task = Task::abusive;
  std::size_t n_positive = 100;
  std::size_t n_negative = 100;
  std::uint64_t seed = 1;          // sampling stream
  std::uint64_t lexicon_seed = 1;  // word lists
  std::size_t min_words = 4;
  std::size_t max_words = 10;
  std::size_t n_markers = 8;
  std::size_t n_decoys = 8;
  std::size_t n_filler = 60;
  std::string id_prefix = "ex";
};

struct Lexicon {
  std::vector<std::string> markers;
  std::vector<std::string> decoys;
  std::vector<std::string> filler;
};

inline const std::vector<std::string>& urdu_letters() {
  static const std::vector<std::string> letters = {
      "ا", "ب", "پ", "ت", "ٹ", "ث", "ج", "چ", "ح", "خ", "د", "ڈ", "ذ", "ر", "ڑ", "ز", "ژ", "س", "ش",
      "ص", "ض", "ط", "ظ", "ع", "غ", "ف", "ق", "ک", "گ", "ل", "م", "ن", "و", "ہ", "ی", "ے"};
  return letters;
}

// Disjoint word lists; the lexicon depends only on lexicon_seed.
inline Lexicon make_lexicon(const CorpusSpec& spec) {
  Rng rng(spec.lexicon_seed * 0x9e37u + 17);
  std::set<std::string> used;
  auto fresh_word = [&] {
    const auto& letters = urdu_letters();
    while (true) {
      const std::size_t len = 3 + static_cast<std::size_t>(rng.below(4));
      std::string w;
      for (std::size_t k = 0; k < len; ++k) w += letters[rng.below(letters.size())];
      if (used.insert(w).second) return w;
    }
  };
  Lexicon lex;
  for (std::size_t k = 0; k < spec.n_markers; ++k) lex.markers.push_back(fresh_word());
  for (std::size_t k = 0; k < spec.n_decoys; ++k) lex.decoys.push_back(fresh_word());
  for (std::size_t k = 0; k < spec.n_filler; ++k) lex.filler.push_back(fresh_word());
  return lex;
}

inline Dataset make_corpus(const CorpusSpec& spec) {
  const Lexicon lex = make_lexicon(spec);
  Rng rng(spec.seed);
  Dataset ds;
  ds.name = spec.name;
  ds.task = spec.task;
  const std::size_t total = spec.n_positive + spec.n_negative;

  // Interleave classes deterministically so files are not sorted by label.
  std::vector<int> labels;
  labels.reserve(total);
  for (std::size_t k = 0; k < spec.n_positive; ++k) labels.push_back(1);
  for (std::size_t k = 0; k < spec.n_negative; ++k) labels.push_back(0);
  rng.shuffle(std::span<int>(labels));

  for (std::size_t i = 0; i < total; ++i) {
    const int label = labels[i];
    const std::size_t n_words =
        spec.min_words + static_cast<std::size_t>(rng.below(spec.max_words - spec.min_words + 1));
    std::vector<std::string> words;
    for (std::size_t k = 0; k < n_words; ++k) words.push_back(lex.filler[rng.below(lex.filler.size())]);
    if (label == 1) {
      const std::size_t n_marks = 1 + static_cast<std::size_t>(rng.below(2));
      for (std::size_t k = 0; k < n_marks; ++k)
        words[rng.below(words.size())] = lex.markers[rng.below(lex.markers.size())];
    } else if (!lex.decoys.empty() && rng.uniform() < 0.5) {
      words[rng.below(words.size())] = lex.decoys[rng.below(lex.decoys.size())];
    }
    std::string text;
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (k > 0) text += ' ';
      text += words[k];
    }
    char id[32];
    std::snprintf(id, sizeof(id), "-%06zu", i);
    ds.examples.push_back({spec.id_prefix + id, text, label});
  }
  return ds;
}

// Token-level separability check: the smallest number of marker tokens in
// a positive example, and the largest in a negative one. The corpus is
// separable by "contains a marker" iff min_positive >= 1 and
// max_negative == 0.
struct Margin {
  std::size_t min_positive = 0;
  std::size_t max_negative = 0;

  bool separable() const { return min_positive >= 1 && max_negative == 0; }
};

inline Margin marker_margin(const Dataset& ds, const Lexicon& lex) {
  const std::set<std::string> markers(lex.markers.begin(), lex.markers.end());
  Margin m{static_cast<std::size_t>(-1), 0};
  bool any_positive = false;
  for (const auto& e : ds.examples) {
    std::size_t hits = 0;
    for (const auto token : text::split_whitespace(e.text)) hits += markers.count(std::string(token));
    if (e.label == 1) {
      any_positive = true;
      m.min_positive = std::min(m.min_positive, hits);
    } else {
      m.max_negative = std::max(m.max_negative, hits);
    }
  }
  if (!any_positive) m.min_positive = 0;
  return m;
}

struct SuiteFiles {
  std::vector<std::filesystem::path> configs;  // classifier-major, abusive then threatening
};

// Writes a small two-task fixture suite: labeled train/test TSV files for
// both tasks (abusive balanced, threatening about 1:5) and one config per
// classifier and task, sized to run in seconds.
inline SuiteFiles write_demo_suite(const std::filesystem::path& dir, std::uint64_t seed = 7) {
  std::filesystem::create_directories(dir / "data");
  std::filesystem::create_directories(dir / "configs");

  struct Part {
    Task task;
    const char* split;
    std::size_t pos, neg;
  };
  const Part parts[] = {{Task::abusive, "train", 119, 121},
                        {Task::abusive, "test", 56, 54},
                        {Task::threatening, "train", 100, 500},
                        {Task::threatening, "test", 72, 323}};
  for (const auto& part : parts) {
    CorpusSpec spec;
    spec.task = part.task;
    spec.name = std::string(to_string(part.task)) + "_" + part.split;
    spec.n_positive = part.pos;
    spec.n_negative = part.neg;
    // Train and test share the lexicon but not the sampling stream.
    spec.lexicon_seed = seed + (part.task == Task::abusive ? 0 : 1000);
    spec.seed = spec.lexicon_seed + (std::string_view(part.split) == "test" ? 500 : 0);
    spec.id_prefix = std::string(part.task == Task::abusive ? "ab" : "th") + "-" + part.split;
    const Dataset ds = make_corpus(spec);
    write_dataset((dir / "data" / (spec.name + ".tsv")).string(), ds, Format::tsv,
                  default_label_names(part.task));
  }

  SuiteFiles files;
  const char* classifiers[] = {"boosted_xgb_like", "boosted_lgbm_like", "neural_scratch", "neural_checkpoint"};
  for (const char* cls : classifiers) {
    for (const Task task : {Task::abusive, Task::threatening}) {
      const std::string t(to_string(task));
      const auto path = dir / "configs" / (std::string(cls) + "_" + t + ".conf");
      std::ofstream out(path);
      out << "task = " << t << "\n"
          << "classifier = " << cls << "\n"
          << "\n[data]\n"
          << "train = ../data/" << t << "_train.tsv\n"
          << "test = ../data/" << t << "_test.tsv\n";
      if (std::string_view(cls).starts_with("boosted")) {
        out << "\n[embedding]\nprovider = hashing\ndim = 64\nseed = 3\n"
            << "\n[boost]\nn_rounds = 40\n";
      } else {
        out << "\n[neural]\nepochs = 10\nlearning_rate = 0.03\nbatch_size = 16\n"
            << "embed_dim = 16\nhidden_dim = 16\nmax_len = 32\nseed = 5\n";
      }
      files.configs.push_back(path);
    }
  }
  return files;
}

}  // namespace harmclf::synthetic
