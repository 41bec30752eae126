#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "netcare/core.hpp"

namespace netcare::learn {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[k] * cols), cols,
                  out.data.begin() + static_cast<std::ptrdiff_t>(k * cols));
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Features plus 0-based class indices in [0, num_classes).
struct Dataset {
  Matrix x;
  std::vector<int> y;
  int num_classes = 0;

  std::size_t size() const { return y.size(); }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset d;
    d.x = x.select_rows(idx);
    d.y.reserve(idx.size());
    for (auto i : idx) d.y.push_back(y[i]);
    d.num_classes = num_classes;
    return d;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> c(static_cast<std::size_t>(num_classes), 0);
    for (int v : y) ++c[static_cast<std::size_t>(v)];
    return c;
  }
};

using Rng = std::mt19937_64;

/// Fisher-Yates shuffle driven by our own index draws so results do not depend on the
/// standard library's shuffle implementation.
template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

/// Fold id per row. Stratified round-robin per class after a seeded shuffle; falls back to an
/// unstratified assignment (with a warning) when some class has fewer rows than folds.
inline std::vector<int> assign_folds(std::span<const int> y, int num_classes, int folds, std::uint64_t seed,
                                     Diagnostics* diag = nullptr) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  Rng rng(seed);
  std::vector<int> fold(y.size(), 0);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < y.size(); ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);
  bool stratify = true;
  for (const auto& c : by_class) {
    if (!c.empty() && c.size() < static_cast<std::size_t>(folds)) stratify = false;
  }
  if (stratify) {
    int next = 0;
    for (auto& c : by_class) {
      shuffle_in_place(c, rng);
      for (auto i : c) {
        fold[i] = next;
        next = (next + 1) % folds;
      }
    }
  } else {
    warn_to(diag, "a class has fewer rows than folds; using unstratified fold assignment");
    std::vector<std::size_t> all(y.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    shuffle_in_place(all, rng);
    for (std::size_t k = 0; k < all.size(); ++k) fold[all[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  return fold;
}

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fold_split(std::span<const int> fold, int k) {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == k ? valid : train).push_back(i);
  return {train, valid};
}

}  // namespace netcare::learn
