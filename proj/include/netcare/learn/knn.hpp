#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "netcare/learn/dataset.hpp"

namespace netcare::learn {

/// k-nearest neighbors (Euclidean). Probabilities are neighbor class frequencies; equal
/// distances are resolved by training-row order.
class KnnClassifier {
 public:
  explicit KnnClassifier(int k) : k_(k) {}

  void fit(const Dataset& train) { train_ = train; }

  Matrix predict_proba(const Matrix& x) const {
    const auto j = static_cast<std::size_t>(train_.num_classes);
    Matrix out(x.rows, j);
    const std::size_t n = train_.size();
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(k_, 1)), n);
    std::vector<std::pair<double, std::size_t>> d(n);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto q = x.row(i);
      for (std::size_t t = 0; t < n; ++t) {
        const auto r = train_.x.row(t);
        double s = 0.0;
        for (std::size_t c = 0; c < q.size(); ++c) {
          const double diff = q[c] - r[c];
          s += diff * diff;
        }
        d[t] = {s, t};
      }
      std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
      // nth_element leaves the k smallest (by (distance, index)) in front, in some order
      for (std::size_t t = 0; t < k; ++t) out(i, static_cast<std::size_t>(train_.y[d[t].second])) += 1.0;
      for (std::size_t c = 0; c < j; ++c) out(i, c) /= static_cast<double>(k);
    }
    return out;
  }

 private:
  int k_;
  Dataset train_;
};

}  // namespace netcare::learn
