#pragma once

// Gini classification trees (CART) and a bagged random forest built on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/learn/dataset.hpp"

namespace netcare::learn {

struct TreeOptions {
  int min_leaf = 1;    // minimum rows per leaf
  int max_depth = 0;   // 0: unlimited
  int max_features = 0;  // features tried per split; 0: all
};

class DecisionTree {
 public:
  /// Grows the tree on `sample` (row indices into `data`, repeats allowed). `rng` is required
  /// when max_features restricts the candidate features.
  void fit(const Dataset& data, std::vector<std::size_t> sample, const TreeOptions& opts, Rng* rng = nullptr) {
    nodes_.clear();
    num_classes_ = data.num_classes;
    opts_ = opts;
    features_.resize(data.x.cols);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    build(data, sample, 0, rng);
  }

  void fit(const Dataset& data, const TreeOptions& opts) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    fit(data, std::move(all), opts, nullptr);
  }

  std::span<const double> predict_row(std::span<const double> x) const {
    std::size_t n = 0;
    while (nodes_[n].feature >= 0) {
      const auto& node = nodes_[n];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[n].probs;
  }

  Matrix predict_proba(const Matrix& x) const {
    Matrix out(x.rows, static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto p = predict_row(x.row(i));
      std::copy(p.begin(), p.end(), out.row(i).begin());
    }
    return out;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<double> probs;
  };

  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;  // sum over sides of (sum of squared class counts / side size); higher is purer
  };

  std::size_t build(const Dataset& data, std::vector<std::size_t>& idx, int depth, Rng* rng) {
    const std::size_t self = nodes_.size();
    nodes_.emplace_back();
    const auto j = static_cast<std::size_t>(num_classes_);
    std::vector<double> counts(j, 0.0);
    for (auto i : idx) counts[static_cast<std::size_t>(data.y[i])] += 1.0;

    auto make_leaf = [&] {
      auto& node = nodes_[self];
      node.probs.resize(j);
      for (std::size_t c = 0; c < j; ++c) node.probs[c] = counts[c] / static_cast<double>(idx.size());
      return self;
    };

    const std::size_t m = idx.size();
    const auto min_leaf = static_cast<std::size_t>(std::max(opts_.min_leaf, 1));
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    if (pure || m < 2 * min_leaf || (opts_.max_depth > 0 && depth >= opts_.max_depth)) return make_leaf();

    double parent_score = 0.0;
    for (double c : counts) parent_score += c * c;
    parent_score /= static_cast<double>(m);

    auto split = best_split(data, idx, min_leaf, parent_score, rng);
    if (!split) return make_leaf();

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) (data.x(i, split->feature) <= split->threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    nodes_[self].feature = static_cast<int>(split->feature);
    nodes_[self].threshold = split->threshold;
    const std::size_t l = build(data, left, depth + 1, rng);
    const std::size_t r = build(data, right, depth + 1, rng);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  std::optional<Split> best_split(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t min_leaf,
                                  double parent_score, Rng* rng) {
    const auto j = static_cast<std::size_t>(num_classes_);
    const std::size_t p = features_.size();
    std::size_t tries = p;
    if (opts_.max_features > 0 && static_cast<std::size_t>(opts_.max_features) < p && rng != nullptr) {
      tries = static_cast<std::size_t>(opts_.max_features);
      for (std::size_t k = 0; k < tries; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>((*rng)() % (p - k));
        std::swap(features_[k], features_[pick]);
      }
    }
    std::vector<std::size_t> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(tries));
    std::sort(candidates.begin(), candidates.end());

    std::optional<Split> best;
    const std::size_t m = idx.size();
    std::vector<std::pair<double, int>> col(m);
    std::vector<double> left(j);
    std::vector<double> right(j);
    for (std::size_t f : candidates) {
      for (std::size_t k = 0; k < m; ++k) col[k] = {data.x(idx[k], f), data.y[idx[k]]};
      std::sort(col.begin(), col.end());
      std::fill(left.begin(), left.end(), 0.0);
      std::fill(right.begin(), right.end(), 0.0);
      for (auto& [_, c] : col) right[static_cast<std::size_t>(c)] += 1.0;
      double sq_left = 0.0;
      double sq_right = 0.0;
      for (double c : right) sq_right += c * c;
      for (std::size_t k = 0; k + 1 < m; ++k) {
        const auto c = static_cast<std::size_t>(col[k].second);
        sq_left += 2.0 * left[c] + 1.0;
        left[c] += 1.0;
        sq_right -= 2.0 * right[c] - 1.0;
        right[c] -= 1.0;
        const std::size_t nl = k + 1;
        const std::size_t nr = m - nl;
        if (nl < min_leaf || nr < min_leaf || !(col[k].first < col[k + 1].first)) continue;
        const double score = sq_left / static_cast<double>(nl) + sq_right / static_cast<double>(nr);
        if (score <= parent_score + 1e-12) continue;
        if (!best || score > best->score + 1e-12) {
          double thr = 0.5 * (col[k].first + col[k + 1].first);
          if (!(thr < col[k + 1].first)) thr = col[k].first;
          best = Split{f, thr, score};
        }
      }
    }
    return best;
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> features_;
  int num_classes_ = 0;
  TreeOptions opts_;
};

/// Bagged trees with per-split feature subsampling; probabilities are the mean of the trees'
/// leaf class frequencies. Tree t draws from its own seed derived from (seed, t).
class RandomForest {
 public:
  RandomForest(int trees, int max_features, int min_leaf, std::uint64_t seed)
      : trees_(trees), max_features_(max_features), min_leaf_(min_leaf), seed_(seed) {}

  void fit(const Dataset& data) {
    forest_.assign(static_cast<std::size_t>(trees_), DecisionTree{});
    num_classes_ = data.num_classes;
    int mtry = max_features_;
    if (mtry <= 0) mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(data.x.cols)))));
    const TreeOptions opts{min_leaf_, 0, mtry};
    for (int t = 0; t < trees_; ++t) {
      Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(t)));
      std::vector<std::size_t> sample(data.size());
      for (auto& s : sample) s = static_cast<std::size_t>(rng() % data.size());
      forest_[static_cast<std::size_t>(t)].fit(data, std::move(sample), opts, &rng);
    }
  }

  Matrix predict_proba(const Matrix& x) const {
    Matrix out(x.rows, static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto dst = out.row(i);
      for (const auto& tree : forest_) {
        const auto p = tree.predict_row(x.row(i));
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += p[c];
      }
      for (auto& v : dst) v /= static_cast<double>(forest_.size());
    }
    return out;
  }

 private:
  int trees_;
  int max_features_;
  int min_leaf_;
  std::uint64_t seed_;
  int num_classes_ = 0;
  std::vector<DecisionTree> forest_;
};

}  // namespace netcare::learn
