#pragma once

// One-vs-rest C-SVC solved with SMO (maximal-violating-pair working set).
// Class probabilities are a softmax over the per-class decision values.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "netcare/learn/dataset.hpp"
#include "netcare/learn/logistic.hpp"

namespace netcare::learn {

enum class KernelKind : std::uint8_t { linear, poly, rbf };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::poly: return "poly";
    case KernelKind::rbf: return "rbf";
  }
  return "linear";
}

struct Kernel {
  KernelKind kind = KernelKind::linear;
  int degree = 3;
  double gamma = 0.0;  // <= 0: 1 / feature count
  double coef0 = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b, double g) const {
    switch (kind) {
      case KernelKind::linear: return dot(a, b);
      case KernelKind::poly: return std::pow(g * dot(a, b) + coef0, degree);
      case KernelKind::rbf: {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::exp(-g * s);
      }
    }
    return 0.0;
  }

  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
};

namespace detail {

/// Binary C-SVC dual: min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, with Q_ij = y_i y_j K_ij.
/// Returns (alpha, rho); the decision function is sum_i a_i y_i K(x_i, x) - rho.
template <class KernelRow>
std::pair<std::vector<double>, double> smo_solve(std::span<const int> y, double cost, KernelRow&& kernel_row,
                                                 std::span<const double> kdiag, double eps = 1e-3) {
  const std::size_t n = y.size();
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  const std::size_t max_iter = std::max<std::size_t>(100000, 100 * n);
  constexpr double kTau = 1e-12;
  auto up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < cost) || (y[t] == -1 && alpha[t] > 0); };
  auto low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0) || (y[t] == -1 && alpha[t] < cost); };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < eps) break;

    const std::span<const double> ki = kernel_row(i);
    const std::span<const double> kj = kernel_row(j);
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = kdiag[i] + kdiag[j] - 2.0 * ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > cost) {
          alpha[i] = cost;
          alpha[j] = cost - diff;
        }
      } else if (alpha[j] > cost) {
        alpha[j] = cost;
        alpha[i] = cost + diff;
      }
    } else {
      double quad = kdiag[i] + kdiag[j] - 2.0 * ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > cost) {
        if (alpha[i] > cost) {
          alpha[i] = cost;
          alpha[j] = sum - cost;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > cost) {
        if (alpha[j] > cost) {
          alpha[j] = cost;
          alpha[i] = sum - cost;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
    }
  }

  // rho: mean of y*G over free vectors, else midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= cost) {
      if (y[t] == -1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (alpha[t] <= 0) {
      if (y[t] == 1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      sum_free += yg;
      ++free;
    }
  }
  const double rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
  return {std::move(alpha), rho};
}

}  // namespace detail

class SvmClassifier {
 public:
  SvmClassifier(Kernel kernel, double cost) : kernel_(kernel), cost_(cost) {}

  void fit(const Dataset& data) {
    train_ = data.x;
    const std::size_t n = data.size();
    classes_ = data.num_classes;
    gamma_ = kernel_.gamma > 0 ? kernel_.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(data.x.cols, 1));

    // Full Gram matrix when it fits comfortably; otherwise rows are computed on demand.
    constexpr std::size_t kMaxCached = 3000;
    const bool cached = n <= kMaxCached;
    std::vector<double> gram;
    std::vector<double> kdiag(n);
    for (std::size_t i = 0; i < n; ++i) kdiag[i] = kernel_(data.x.row(i), data.x.row(i), gamma_);
    if (cached) {
      gram.resize(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const double k = kernel_(data.x.row(i), data.x.row(j), gamma_);
          gram[i * n + j] = k;
          gram[j * n + i] = k;
        }
      }
    }
    std::vector<double> row_a(n);
    std::vector<double> row_b(n);
    std::size_t last = n;
    bool flip = false;
    auto kernel_row = [&](std::size_t i) -> std::span<const double> {
      if (cached) return {gram.data() + i * n, n};
      if (i == last) return flip ? row_b : row_a;  // same row as the previous request
      flip = !flip;
      auto& r = flip ? row_b : row_a;
      for (std::size_t t = 0; t < n; ++t) r[t] = kernel_(data.x.row(i), data.x.row(t), gamma_);
      last = i;
      return r;
    };

    models_.assign(static_cast<std::size_t>(classes_), {});
    std::vector<int> y(n);
    for (int c = 0; c < classes_; ++c) {
      auto& m = models_[static_cast<std::size_t>(c)];
      std::size_t pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = data.y[i] == c ? 1 : -1;
        pos += y[i] == 1 ? 1 : 0;
      }
      if (pos == 0) {
        m.absent = true;
        continue;
      }
      if (pos == n) {
        m.constant = 1.0;
        continue;
      }
      auto [alpha, rho] = detail::smo_solve(y, cost_, kernel_row, kdiag);
      m.rho = rho;
      for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] > 0) {
          m.support.push_back(i);
          m.coef.push_back(alpha[i] * y[i]);
        }
      }
    }
  }

  /// One-vs-rest decision value per class; classes absent from training score -infinity.
  Matrix decision_values(const Matrix& x) const {
    Matrix out(x.rows, static_cast<std::size_t>(classes_));
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t c = 0; c < models_.size(); ++c) {
        const auto& m = models_[c];
        if (m.absent) {
          out(i, c) = -std::numeric_limits<double>::infinity();
          continue;
        }
        if (m.constant) {
          out(i, c) = *m.constant;
          continue;
        }
        double s = -m.rho;
        for (std::size_t k = 0; k < m.support.size(); ++k) s += m.coef[k] * kernel_(train_.row(m.support[k]), x.row(i), gamma_);
        out(i, c) = s;
      }
    }
    return out;
  }

  Matrix predict_proba(const Matrix& x) const {
    Matrix out = decision_values(x);
    for (std::size_t i = 0; i < out.rows; ++i) softmax(out.row(i));
    return out;
  }

 private:
  struct BinaryModel {
    bool absent = false;
    std::optional<double> constant;
    double rho = 0.0;
    std::vector<std::size_t> support;
    std::vector<double> coef;
  };

  Kernel kernel_;
  double cost_;
  double gamma_ = 1.0;
  int classes_ = 0;
  Matrix train_;
  std::vector<BinaryModel> models_;
};

}  // namespace netcare::learn
