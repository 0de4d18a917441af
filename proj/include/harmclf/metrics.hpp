#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "harmclf/error.hpp"

namespace harmclf {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }

  // The same predictions scored with class 0 as the positive class.
  ConfusionMatrix flipped() const noexcept { return {tn, fn, fp, tp}; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// A score at or above the threshold predicts the positive class.
inline ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                                 double threshold = 0.5) {
  if (scores.size() != labels.size())
    throw ShapeError("scores (" + std::to_string(scores.size()) + ") and labels (" +
                     std::to_string(labels.size()) + ") differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++cm.tp;
    else if (predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double precision(const ConfusionMatrix& cm) {
  return safe_ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp));
}

inline double recall(const ConfusionMatrix& cm) {
  return safe_ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
}

// Positive-class F1; every 0/0 is taken as 0.
inline double f1(const ConfusionMatrix& cm) {
  const double p = precision(cm);
  const double r = recall(cm);
  return safe_ratio(2.0 * p * r, p + r);
}

inline double f1_macro(const ConfusionMatrix& cm) { return 0.5 * (f1(cm) + f1(cm.flipped())); }

// Mann-Whitney AUC with midranks: ties between a positive and a negative
// count one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ShapeError("scores (" + std::to_string(scores.size()) + ") and labels (" +
                     std::to_string(labels.size()) + ") differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const int y : labels) n_pos += (y == 1);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DegenerateLabels("ROC-AUC needs at least one positive and one negative label");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum, so midranks stay integral.
  std::size_t rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank (i + 1 + j) / 2.
    std::size_t positives = 0;
    for (std::size_t k = i; k < j; ++k) positives += (labels[order[k]] == 1);
    rank_sum_x2 += positives * (i + 1 + j);
    i = j;
  }
  const double u = static_cast<double>(rank_sum_x2) / 2.0 -
                   static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct EvalReport {
  ConfusionMatrix confusion;
  double f1_positive = 0.0;
  double f1_macro = 0.0;
  double roc_auc = 0.0;
  double threshold = 0.5;
  std::size_t n = 0;
};

inline EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                           double threshold = 0.5) {
  if (scores.empty()) throw ShapeError("cannot evaluate zero examples");
  EvalReport report;
  report.confusion = confusion(scores, labels, threshold);
  report.f1_positive = f1(report.confusion);
  report.f1_macro = harmclf::f1_macro(report.confusion);
  report.roc_auc = harmclf::roc_auc(scores, labels);
  report.threshold = threshold;
  report.n = scores.size();
  return report;
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"tp", r.confusion.tp},
       {"fp", r.confusion.fp},
       {"fn", r.confusion.fn},
       {"tn", r.confusion.tn},
       {"f1_positive", r.f1_positive},
       {"f1_macro", r.f1_macro},
       {"roc_auc", r.roc_auc},
       {"threshold", r.threshold},
       {"n", r.n}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  j.at("tp").get_to(r.confusion.tp);
  j.at("fp").get_to(r.confusion.fp);
  j.at("fn").get_to(r.confusion.fn);
  j.at("tn").get_to(r.confusion.tn);
  j.at("f1_positive").get_to(r.f1_positive);
  j.at("f1_macro").get_to(r.f1_macro);
  j.at("roc_auc").get_to(r.roc_auc);
  j.at("threshold").get_to(r.threshold);
  j.at("n").get_to(r.n);
}

}  // namespace harmclf
