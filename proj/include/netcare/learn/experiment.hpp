#pragma once

// Train/test experiment over the three feature-group ablations: tune each base classifier by
// cross-validation, pick ensemble weights on out-of-fold training predictions, refit on the
// full training split and score the weighted vote on the test split.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/features.hpp"
#include "netcare/learn/classifier.hpp"
#include "netcare/learn/dataset.hpp"
#include "netcare/learn/ensemble.hpp"
#include "netcare/learn/metrics.hpp"

namespace netcare::learn {

enum class SplitMode : std::uint8_t { row, person };

inline std::string_view to_string(SplitMode m) { return m == SplitMode::row ? "row" : "person"; }

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "row") return SplitMode::row;
  if (s == "person") return SplitMode::person;
  throw ConfigError("unknown split mode '" + std::string(s) + "' (expected row or person)");
}

struct Ablation {
  std::string name;
  FeatureGroups groups;
};

inline const std::vector<Ablation>& standard_ablations() {
  static const std::vector<Ablation> a{
      {"gender+behavior", {FeatureGroup::gender, FeatureGroup::behavior}},
      {"structure", {FeatureGroup::structure}},
      {"gender+behavior+structure", {FeatureGroup::gender, FeatureGroup::behavior, FeatureGroup::structure}},
  };
  return a;
}

struct ExperimentConfig {
  SplitMode split = SplitMode::row;
  double train_fraction = 0.75;
  int folds = 5;
  std::uint64_t seed = 7;
  std::vector<ClassifierKind> base{ClassifierKind::svm, ClassifierKind::knn, ClassifierKind::rf};
  Hyperparams defaults;
  GridSpec grid;
  SearchOptions search;
  unsigned threads = 1;

  void validate() const {
    if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train fraction must lie in (0, 1)");
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (base.empty()) throw ConfigError("at least one base classifier is required");
    defaults.validate();
    units_for_step(search.step);
  }
};

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Row mode shuffles person-week rows; person mode shuffles persons so each person's weeks
/// land on one side only. Both return indices in ascending order.
inline TrainTestSplit split_rows(const FeatureMatrix& m, SplitMode mode, double train_fraction, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5117));
  TrainTestSplit s;
  if (mode == SplitMode::row) {
    std::vector<std::size_t> idx(m.rows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle_in_place(idx, rng);
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  } else {
    std::vector<PersonId> persons;
    for (const auto& r : m.rows) persons.push_back(r.person);
    std::sort(persons.begin(), persons.end());
    persons.erase(std::unique(persons.begin(), persons.end()), persons.end());
    shuffle_in_place(persons, rng);
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(persons.size())));
    const std::set<PersonId> train_persons(persons.begin(), persons.begin() + static_cast<std::ptrdiff_t>(cut));
    for (std::size_t i = 0; i < m.rows.size(); ++i) (train_persons.contains(m.rows[i].person) ? s.train : s.test).push_back(i);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  if (s.train.empty() || s.test.empty()) throw DataError("train/test split left one side empty");
  return s;
}

/// Dataset over the given rows and feature groups; labels become 0-based.
inline Dataset to_dataset(const FeatureMatrix& m, FeatureGroups groups, std::span<const std::size_t> rows) {
  const auto cols = active_columns(groups);
  Dataset d;
  d.num_classes = m.num_classes();
  d.x = Matrix(rows.size(), cols.size());
  d.y.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = m.rows[rows[k]];
    for (std::size_t c = 0; c < cols.size(); ++c) d.x(k, c) = r.values[cols[c]];
    d.y.push_back(r.label - 1);
  }
  return d;
}

struct BaseModelResult {
  ClassifierKind kind = ClassifierKind::knn;
  Hyperparams chosen;
  double cv_macro_f1 = 0.0;
  double test_macro_f1 = 0.0;
  bool degenerate = false;
};

struct AblationResult {
  std::string name;
  FeatureGroups groups;
  std::vector<std::string> columns;
  std::vector<BaseModelResult> base;
  EnsembleWeights weights;
  EvalReport report;
  std::vector<int> unevaluated_levels;  // 1-based levels absent from the test labels
};

struct ExperimentResult {
  WellnessTarget target = WellnessTarget::stress;
  SplitMode split = SplitMode::row;
  std::uint64_t seed = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<AblationResult> ablations;
  std::vector<std::string> warnings;
};

inline AblationResult run_ablation(const FeatureMatrix& m, const Ablation& ab, const TrainTestSplit& split,
                                   const ExperimentConfig& cfg, Diagnostics* diag) {
  AblationResult out;
  out.name = ab.name;
  out.groups = ab.groups;
  for (auto c : active_columns(ab.groups)) out.columns.push_back(feature_column_names()[c]);
  const Dataset train = to_dataset(m, ab.groups, split.train);
  const Dataset test = to_dataset(m, ab.groups, split.test);

  std::vector<Matrix> oof;
  std::vector<Matrix> test_proba;
  for (std::size_t b = 0; b < cfg.base.size(); ++b) {
    const auto kind = cfg.base[b];
    const std::uint64_t s = derive_seed(cfg.seed, 0xab, static_cast<std::uint64_t>(kind));
    BaseModelResult r;
    r.kind = kind;
    const auto grid = cfg.grid.expand(kind, cfg.defaults);
    const auto gs = grid_search_cv(kind, grid, train, cfg.folds, s, cfg.threads, diag);
    r.chosen = gs.best;
    r.cv_macro_f1 = gs.mean_scores[gs.best_index];
    oof.push_back(out_of_fold_proba(kind, r.chosen, train, cfg.folds, s, cfg.threads, diag));
    auto pred = fit_predict(kind, r.chosen, train, test.x, s);
    r.degenerate = pred.degenerate;
    r.test_macro_f1 = evaluate(argmax_rows(pred.proba), test.y, test.num_classes).macro_f1;
    test_proba.push_back(std::move(pred.proba));
    out.base.push_back(r);
  }

  SearchOptions so = cfg.search;
  so.threads = cfg.threads;
  out.weights = ensemble_weight_search(oof, train.y, so);
  const auto preds = ensemble_predict(out.weights, test_proba);
  out.report = evaluate(preds, test.y, test.num_classes);
  for (std::size_t c = 0; c < out.report.per_class_f1.size(); ++c) {
    if (!out.report.per_class_f1[c]) out.unevaluated_levels.push_back(static_cast<int>(c) + 1);
  }
  return out;
}

/// Runs every ablation on one shared split. Levels missing from the test split are listed per
/// ablation and excluded from its macro average.
inline ExperimentResult run_experiment(const FeatureMatrix& m, const ExperimentConfig& cfg,
                                       const std::vector<Ablation>& ablations = standard_ablations()) {
  cfg.validate();
  Diagnostics diag;
  const auto split = split_rows(m, cfg.split, cfg.train_fraction, cfg.seed);
  ExperimentResult r;
  r.target = m.target;
  r.split = cfg.split;
  r.seed = cfg.seed;
  r.train_rows = split.train.size();
  r.test_rows = split.test.size();
  for (const auto& ab : ablations) r.ablations.push_back(run_ablation(m, ab, split, cfg, &diag));
  for (const auto& ab : r.ablations) {
    for (int lvl : ab.unevaluated_levels) {
      diag.warn(ab.name + ": level " + std::to_string(lvl) + " absent from the test split; left unevaluated");
    }
  }
  r.warnings = diag.warnings;
  return r;
}

}  // namespace netcare::learn
