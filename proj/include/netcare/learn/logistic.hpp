#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "netcare/learn/dataset.hpp"

namespace netcare::learn {

/// In-place numerically stable softmax.
inline void softmax(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

/// Multinomial logistic regression trained by full-batch gradient descent.
/// Parameters are laid out as J*p weights (class-major) followed by J biases.
class LogisticRegression {
 public:
  LogisticRegression(double l2, double learning_rate, int epochs = 300)
      : l2_(l2), learning_rate_(learning_rate), epochs_(epochs) {}

  static std::size_t param_count(std::size_t features, int classes) {
    return static_cast<std::size_t>(classes) * (features + 1);
  }

  /// Mean cross-entropy plus (l2/2)*||W||^2 (biases unpenalized). Fills `grad` when non-null.
  static double loss_and_gradient(std::span<const double> params, const Dataset& data, double l2,
                                  std::vector<double>* grad) {
    const std::size_t p = data.x.cols;
    const auto j = static_cast<std::size_t>(data.num_classes);
    const std::size_t n = data.size();
    const double* w = params.data();
    const double* b = params.data() + j * p;
    if (grad != nullptr) grad->assign(params.size(), 0.0);
    std::vector<double> z(j);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.x.row(i);
      for (std::size_t c = 0; c < j; ++c) {
        double s = b[c];
        for (std::size_t f = 0; f < p; ++f) s += w[c * p + f] * x[f];
        z[c] = s;
      }
      softmax(z);
      const auto y = static_cast<std::size_t>(data.y[i]);
      loss -= std::log(std::max(z[y], 1e-300)) * inv_n;
      if (grad != nullptr) {
        for (std::size_t c = 0; c < j; ++c) {
          const double dz = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
          for (std::size_t f = 0; f < p; ++f) (*grad)[c * p + f] += dz * x[f];
          (*grad)[j * p + c] += dz;
        }
      }
    }
    for (std::size_t k = 0; k < j * p; ++k) {
      loss += 0.5 * l2 * w[k] * w[k];
      if (grad != nullptr) (*grad)[k] += l2 * w[k];
    }
    return loss;
  }

  void fit(const Dataset& data) {
    features_ = data.x.cols;
    classes_ = data.num_classes;
    params_.assign(param_count(features_, classes_), 0.0);
    loss_history_.clear();
    std::vector<double> grad;
    for (int e = 0; e < epochs_; ++e) {
      loss_history_.push_back(loss_and_gradient(params_, data, l2_, &grad));
      for (std::size_t k = 0; k < params_.size(); ++k) params_[k] -= learning_rate_ * grad[k];
    }
    loss_history_.push_back(loss_and_gradient(params_, data, l2_, nullptr));
  }

  Matrix predict_proba(const Matrix& x) const {
    const auto j = static_cast<std::size_t>(classes_);
    Matrix out(x.rows, j);
    const double* w = params_.data();
    const double* b = params_.data() + j * features_;
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto z = out.row(i);
      const auto r = x.row(i);
      for (std::size_t c = 0; c < j; ++c) {
        double s = b[c];
        for (std::size_t f = 0; f < features_; ++f) s += w[c * features_ + f] * r[f];
        z[c] = s;
      }
      softmax(z);
    }
    return out;
  }

  const std::vector<double>& loss_history() const { return loss_history_; }
  const std::vector<double>& params() const { return params_; }

 private:
  double l2_;
  double learning_rate_;
  int epochs_;
  std::size_t features_ = 0;
  int classes_ = 0;
  std::vector<double> params_;
  std::vector<double> loss_history_;
};

}  // namespace netcare::learn
