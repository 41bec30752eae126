#pragma once

// Uniform fit/predict front end over the five base classifiers, plus cross-validated grid
// search and out-of-fold probability estimates.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/features.hpp"
#include "netcare/learn/dataset.hpp"
#include "netcare/learn/knn.hpp"
#include "netcare/learn/logistic.hpp"
#include "netcare/learn/metrics.hpp"
#include "netcare/learn/svm.hpp"
#include "netcare/learn/tree.hpp"

namespace netcare::learn {

enum class ClassifierKind : std::uint8_t { knn, cart, svm, lr, rf };

inline constexpr std::array kClassifierKinds{ClassifierKind::knn, ClassifierKind::cart, ClassifierKind::svm,
                                             ClassifierKind::lr, ClassifierKind::rf};

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::cart: return "cart";
    case ClassifierKind::svm: return "svm";
    case ClassifierKind::lr: return "lr";
    case ClassifierKind::rf: return "rf";
  }
  return "knn";
}

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  for (auto k : kClassifierKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown classifier '" + std::string(s) + "' (expected knn, cart, svm, lr or rf)");
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "poly") return KernelKind::poly;
  if (s == "rbf") return KernelKind::rbf;
  throw ConfigError("unknown SVM kernel '" + std::string(s) + "' (expected linear, poly or rbf)");
}

struct Hyperparams {
  int knn_k = 5;
  int cart_min_leaf = 1;
  Kernel svm_kernel{KernelKind::rbf, 3, 0.0, 1.0};
  double svm_cost = 1.0;
  double lr_l2 = 1e-3;
  double lr_learning_rate = 0.5;
  int lr_epochs = 300;
  int rf_trees = 35;
  int rf_mtry = 0;  // 0: round(sqrt(features))
  int rf_min_leaf = 1;

  void validate() const {
    if (knn_k < 1 || cart_min_leaf < 1 || rf_trees < 1 || rf_min_leaf < 1 || rf_mtry < 0 || lr_epochs < 1) {
      throw ConfigError("classifier counts must be at least 1");
    }
    if (!(svm_cost > 0) || !(lr_l2 >= 0) || !(lr_learning_rate > 0) || svm_kernel.degree < 1) {
      throw ConfigError("classifier cost, learning rate and degree must be positive and l2 non-negative");
    }
  }

  /// Only the fields that matter for `kind`.
  std::string describe(ClassifierKind kind) const {
    std::ostringstream os;
    switch (kind) {
      case ClassifierKind::knn: os << "k=" << knn_k; break;
      case ClassifierKind::cart: os << "min_leaf=" << cart_min_leaf; break;
      case ClassifierKind::svm:
        os << "kernel=" << to_string(svm_kernel.kind);
        if (svm_kernel.kind == KernelKind::poly) os << " degree=" << svm_kernel.degree;
        if (svm_kernel.kind != KernelKind::linear) os << " gamma=" << format_double(svm_kernel.gamma);
        os << " C=" << format_double(svm_cost);
        break;
      case ClassifierKind::lr:
        os << "l2=" << format_double(lr_l2) << " lr=" << format_double(lr_learning_rate) << " epochs=" << lr_epochs;
        break;
      case ClassifierKind::rf:
        os << "trees=" << rf_trees << " mtry=" << rf_mtry << " min_leaf=" << rf_min_leaf;
        break;
    }
    return os.str();
  }
};

struct SvmGridPoint {
  Kernel kernel;
  double cost = 1.0;
};

/// Candidate values per classifier. Grid points are enumerated in declaration order.
struct GridSpec {
  std::vector<int> knn_k{1, 3, 5, 9, 15, 25};
  std::vector<int> cart_min_leaf{1, 2, 5, 10, 20, 40};
  std::vector<SvmGridPoint> svm{{{KernelKind::linear, 3, 0.0, 1.0}, 1.0},
                                {{KernelKind::rbf, 3, 0.0, 1.0}, 0.1},
                                {{KernelKind::rbf, 3, 0.0, 1.0}, 1.0},
                                {{KernelKind::rbf, 3, 0.0, 1.0}, 10.0}};
  std::vector<double> lr_l2{1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<int> rf_mtry{0};

  std::vector<Hyperparams> expand(ClassifierKind kind, const Hyperparams& base) const {
    std::vector<Hyperparams> out;
    auto push = [&](auto&& set) {
      Hyperparams h = base;
      set(h);
      h.validate();
      out.push_back(h);
    };
    switch (kind) {
      case ClassifierKind::knn:
        for (int k : knn_k) push([&](Hyperparams& h) { h.knn_k = k; });
        break;
      case ClassifierKind::cart:
        for (int m : cart_min_leaf) push([&](Hyperparams& h) { h.cart_min_leaf = m; });
        break;
      case ClassifierKind::svm:
        for (const auto& p : svm) {
          push([&](Hyperparams& h) {
            h.svm_kernel = p.kernel;
            h.svm_cost = p.cost;
          });
        }
        break;
      case ClassifierKind::lr:
        for (double l : lr_l2) push([&](Hyperparams& h) { h.lr_l2 = l; });
        break;
      case ClassifierKind::rf:
        for (int m : rf_mtry) push([&](Hyperparams& h) { h.rf_mtry = m; });
        break;
    }
    if (out.empty()) throw ConfigError("empty hyperparameter grid for " + std::string(to_string(kind)));
    return out;
  }
};

struct Prediction {
  Matrix proba;             // rows sum to 1
  bool degenerate = false;  // training data held a single class
};

/// Fits `kind` on `train` and returns class probabilities for `test`. KNN, SVM and LR see
/// columns standardized with training-row statistics; trees see raw values.
inline Prediction fit_predict(ClassifierKind kind, const Hyperparams& hp, const Dataset& train, const Matrix& test,
                              std::uint64_t seed = 0) {
  if (train.size() == 0) throw DataError("cannot fit a classifier on an empty training set");
  if (test.cols != train.x.cols) throw DataError("test columns do not match training columns");
  const auto counts = train.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
    Prediction p;
    p.degenerate = true;
    p.proba = Matrix(test.rows, static_cast<std::size_t>(train.num_classes));
    const auto only = static_cast<std::size_t>(train.y.front());
    for (std::size_t i = 0; i < test.rows; ++i) p.proba(i, only) = 1.0;
    return p;
  }

  const bool scaled = kind == ClassifierKind::knn || kind == ClassifierKind::svm || kind == ClassifierKind::lr;
  const Dataset* fit_on = &train;
  const Matrix* predict_on = &test;
  Dataset train_scaled;
  Matrix test_scaled;
  if (scaled) {
    const auto st = Standardizer::fit(train.x.data, train.x.cols);
    train_scaled = train;
    st.transform(train_scaled.x.data);
    test_scaled = test;
    st.transform(test_scaled.data);
    fit_on = &train_scaled;
    predict_on = &test_scaled;
  }

  Prediction p;
  switch (kind) {
    case ClassifierKind::knn: {
      KnnClassifier m(hp.knn_k);
      m.fit(*fit_on);
      p.proba = m.predict_proba(*predict_on);
      break;
    }
    case ClassifierKind::cart: {
      DecisionTree m;
      m.fit(*fit_on, TreeOptions{hp.cart_min_leaf, 0, 0});
      p.proba = m.predict_proba(*predict_on);
      break;
    }
    case ClassifierKind::svm: {
      SvmClassifier m(hp.svm_kernel, hp.svm_cost);
      m.fit(*fit_on);
      p.proba = m.predict_proba(*predict_on);
      break;
    }
    case ClassifierKind::lr: {
      LogisticRegression m(hp.lr_l2, hp.lr_learning_rate, hp.lr_epochs);
      m.fit(*fit_on);
      p.proba = m.predict_proba(*predict_on);
      break;
    }
    case ClassifierKind::rf: {
      RandomForest m(hp.rf_trees, hp.rf_mtry, hp.rf_min_leaf, seed);
      m.fit(*fit_on);
      p.proba = m.predict_proba(*predict_on);
      break;
    }
  }
  return p;
}

/// Index of the largest entry; the lowest index wins ties.
inline int argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<int>(best);
}

inline std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = argmax_row(m.row(i));
  return out;
}

struct GridSearchResult {
  Hyperparams best;
  std::size_t best_index = 0;
  std::vector<double> mean_scores;  // per grid point
};

/// Mean validation macro-F1 per grid point over seeded stratified folds; ties go to the
/// earliest grid point.
inline GridSearchResult grid_search_cv(ClassifierKind kind, const std::vector<Hyperparams>& grid, const Dataset& data,
                                       int folds, std::uint64_t seed, unsigned threads = 1,
                                       Diagnostics* diag = nullptr) {
  if (grid.empty()) throw ConfigError("grid search needs at least one grid point");
  const auto fold = assign_folds(data.y, data.num_classes, folds, seed, diag);
  const auto f = static_cast<std::size_t>(folds);
  std::vector<double> scores(grid.size() * f, 0.0);
  parallel_for(grid.size() * f, threads, [&](std::size_t task) {
    const std::size_t g = task / f;
    const int k = static_cast<int>(task % f);
    const auto [tr, va] = fold_split(fold, k);
    if (tr.empty() || va.empty()) return;
    const Dataset train = data.subset(tr);
    const Dataset valid = data.subset(va);
    const auto pred = fit_predict(kind, grid[g], train, valid.x, derive_seed(seed, g, static_cast<std::uint64_t>(k)));
    scores[task] = evaluate(argmax_rows(pred.proba), valid.y, data.num_classes).macro_f1;
  });
  GridSearchResult r;
  r.mean_scores.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (std::size_t k = 0; k < f; ++k) s += scores[g * f + k];
    r.mean_scores[g] = s / static_cast<double>(f);
    if (r.mean_scores[g] > r.mean_scores[r.best_index]) r.best_index = g;
  }
  r.best = grid[r.best_index];
  return r;
}

/// Probabilities for every row of `data` from models that never saw that row.
inline Matrix out_of_fold_proba(ClassifierKind kind, const Hyperparams& hp, const Dataset& data, int folds,
                                std::uint64_t seed, unsigned threads = 1, Diagnostics* diag = nullptr) {
  const auto fold = assign_folds(data.y, data.num_classes, folds, seed, diag);
  Matrix out(data.size(), static_cast<std::size_t>(data.num_classes));
  parallel_for(static_cast<std::size_t>(folds), threads, [&](std::size_t k) {
    const auto [tr, va] = fold_split(fold, static_cast<int>(k));
    if (va.empty()) return;
    const Dataset valid = data.subset(va);
    const auto pred = fit_predict(kind, hp, data.subset(tr), valid.x, derive_seed(seed, 0x0f, k));
    for (std::size_t r = 0; r < va.size(); ++r) {
      std::copy_n(pred.proba.row(r).begin(), out.cols, out.row(va[r]).begin());
    }
  });
  return out;
}

}  // namespace netcare::learn
