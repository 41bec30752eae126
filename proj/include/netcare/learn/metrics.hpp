#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netcare/core.hpp"

namespace netcare::learn {

/// Confusion counts for classes 0..J-1: counts[truth][pred].
struct Confusion {
  int num_classes = 0;
  std::vector<std::size_t> counts;

  explicit Confusion(int j) : num_classes(j), counts(static_cast<std::size_t>(j * j), 0) {}

  void add(int truth, int pred) { ++counts[static_cast<std::size_t>(truth * num_classes + pred)]; }
  std::size_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth * num_classes + pred)]; }
};

/// F1 from per-class true positives, predicted totals and true totals; 0 when P + R = 0.
inline double f1_score(std::size_t tp, std::size_t predicted, std::size_t actual) {
  const double p = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
  const double r = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

/// Unweighted mean of per-class F1 over the classes present in the true labels.
/// `tp`, `predicted` and `actual` are per-class tallies.
inline double macro_f1_from_tallies(std::span<const std::size_t> tp, std::span<const std::size_t> predicted,
                                    std::span<const std::size_t> actual) {
  double sum = 0.0;
  int present = 0;
  for (std::size_t j = 0; j < actual.size(); ++j) {
    if (actual[j] == 0) continue;
    sum += f1_score(tp[j], predicted[j], actual[j]);
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

struct EvalReport {
  double macro_f1 = 0.0;
  std::vector<std::optional<double>> per_class_f1;  // nullopt: class absent from the true labels
  std::vector<std::size_t> support;
};

/// Per-class and macro F1. Labels are 0-based class indices.
inline EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw DataError("evaluate needs equal-length, non-empty prediction and label lists");
  }
  const auto j = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(j, 0);
  std::vector<std::size_t> predicted(j, 0);
  std::vector<std::size_t> actual(j, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto t = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    ++actual[t];
    ++predicted[p];
    if (t == p) ++tp[t];
  }
  EvalReport r;
  r.support = actual;
  r.per_class_f1.resize(j);
  for (std::size_t c = 0; c < j; ++c) {
    if (actual[c] > 0) r.per_class_f1[c] = f1_score(tp[c], predicted[c], actual[c]);
  }
  r.macro_f1 = macro_f1_from_tallies(tp, predicted, actual);
  return r;
}

}  // namespace netcare::learn
