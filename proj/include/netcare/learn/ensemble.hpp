#pragma once

// Class-specific weighted voting over M base classifiers. Each classifier's weight row is a
// composition of `units` grid steps into J parts, so every row sums to one.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/learn/dataset.hpp"
#include "netcare/learn/metrics.hpp"

namespace netcare::learn {

enum class SearchMode : std::uint8_t { auto_select, exhaustive, coordinate };

inline std::string_view to_string(SearchMode m) {
  switch (m) {
    case SearchMode::auto_select: return "auto";
    case SearchMode::exhaustive: return "exhaustive";
    case SearchMode::coordinate: return "coordinate";
  }
  return "auto";
}

inline SearchMode parse_search_mode(std::string_view s) {
  if (s == "auto") return SearchMode::auto_select;
  if (s == "exhaustive") return SearchMode::exhaustive;
  if (s == "coordinate") return SearchMode::coordinate;
  throw ConfigError("unknown ensemble search mode '" + std::string(s) + "' (expected auto, exhaustive or coordinate)");
}

struct EnsembleWeights {
  int classifiers = 0;
  int classes = 0;
  int units = 10;          // grid steps per row: weight = units_ij / units
  std::vector<int> grid;   // classifiers x classes, row-major
  double validation_score = 0.0;
  SearchMode mode = SearchMode::exhaustive;  // the mode actually used

  double weight(int i, int j) const {
    return static_cast<double>(grid[static_cast<std::size_t>(i * classes + j)]) / static_cast<double>(units);
  }

  std::vector<double> as_doubles() const {
    std::vector<double> w(grid.size());
    for (int i = 0; i < classifiers; ++i) {
      for (int j = 0; j < classes; ++j) w[static_cast<std::size_t>(i * classes + j)] = weight(i, j);
    }
    return w;
  }
};

/// Number of grid units for a step such as 0.1 or 0.5; the step must divide 1 evenly.
inline int units_for_step(double step) {
  if (!(step > 0) || step > 1) throw ConfigError("ensemble weight step must lie in (0, 1]");
  const double u = 1.0 / step;
  const long r = std::lround(u);
  if (std::abs(u - static_cast<double>(r)) > 1e-9) throw ConfigError("ensemble weight step must divide 1 evenly");
  return static_cast<int>(r);
}

/// All compositions of `units` into `parts` non-negative parts, in lexicographic order.
inline std::vector<std::vector<int>> compositions(int units, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(parts), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == parts - 1) {
      cur[static_cast<std::size_t>(pos)] = left;
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      cur[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, left - v);
    }
  };
  if (parts > 0) rec(rec, 0, units);
  return out;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Class with the largest sum over classifiers of weight * probability; lowest index on ties.
/// `weights` is classifiers x classes row-major; `probs[i]` is classifier i's distribution.
inline int ensemble_vote(std::span<const double> weights, std::span<const std::span<const double>> probs) {
  const std::size_t m = probs.size();
  const std::size_t j = m == 0 ? 0 : probs[0].size();
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < j; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += weights[i * j + c] * probs[i][c];
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(c);
    }
  }
  return best;
}

/// Applies the vote to every row. `probs[i]` is classifier i's N x J probability matrix.
inline std::vector<int> ensemble_predict(std::span<const double> weights, std::span<const Matrix> probs) {
  if (probs.empty()) throw DataError("ensemble needs at least one classifier");
  const std::size_t n = probs[0].rows;
  for (const auto& p : probs) {
    if (p.rows != n || p.cols != probs[0].cols) throw DataError("classifier probability matrices differ in shape");
  }
  if (weights.size() != probs.size() * probs[0].cols) throw DataError("weight tensor does not match classifiers x classes");
  std::vector<int> out(n);
  std::vector<std::span<const double>> rows(probs.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < probs.size(); ++i) rows[i] = probs[i].row(r);
    out[r] = ensemble_vote(weights, rows);
  }
  return out;
}

inline std::vector<int> ensemble_predict(const EnsembleWeights& w, std::span<const Matrix> probs) {
  const auto d = w.as_doubles();
  return ensemble_predict(d, probs);
}

struct SearchOptions {
  double step = 0.1;
  SearchMode mode = SearchMode::auto_select;
  double budget = 4e9;  // exhaustive limit on (weight combinations x validation rows)
  unsigned threads = 1;
  int max_sweeps = 50;
};

namespace detail {

struct Tally {
  std::vector<std::size_t> tp;
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> actual;

  Tally(std::size_t j, std::span<const int> labels) : tp(j, 0), predicted(j, 0), actual(j, 0) {
    for (int y : labels) ++actual[static_cast<std::size_t>(y)];
  }

  void reset() {
    std::fill(tp.begin(), tp.end(), 0);
    std::fill(predicted.begin(), predicted.end(), 0);
  }

  double score() const { return macro_f1_from_tallies(tp, predicted, actual); }
};

/// contrib[i][r] holds N x J products weight(row r) * p_i, computed exactly as in ensemble_vote.
class SearchTables {
 public:
  SearchTables(std::span<const Matrix> probs, const std::vector<std::vector<int>>& rows, int units)
      : n_(probs[0].rows), j_(probs[0].cols) {
    contrib_.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      contrib_[i].resize(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        contrib_[i][r] = product(probs[i], rows[r], units);
      }
    }
  }

  static std::vector<double> product(const Matrix& p, const std::vector<int>& row, int units) {
    std::vector<double> t(p.rows * p.cols);
    for (std::size_t k = 0; k < p.rows; ++k) {
      for (std::size_t c = 0; c < p.cols; ++c) {
        const double w = static_cast<double>(row[c]) / static_cast<double>(units);
        t[k * p.cols + c] = w * p(k, c);
      }
    }
    return t;
  }

  const std::vector<double>& at(std::size_t i, std::size_t r) const { return contrib_[i][r]; }
  std::size_t n() const { return n_; }
  std::size_t j() const { return j_; }

 private:
  std::size_t n_;
  std::size_t j_;
  std::vector<std::vector<std::vector<double>>> contrib_;
};

/// Macro-F1 of the vote for a full assignment of rows, given the partial sum of the first
/// M-1 classifiers (nullptr when M == 1) and the last classifier's table.
inline double score_last(const std::vector<double>* partial, const std::vector<double>& last, std::size_t n,
                         std::size_t j, std::span<const int> labels, Tally& tally) {
  tally.reset();
  for (std::size_t k = 0; k < n; ++k) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < j; ++c) {
      const double s = partial != nullptr ? (*partial)[k * j + c] + last[k * j + c] : 0.0 + last[k * j + c];
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    const auto y = static_cast<std::size_t>(labels[k]);
    ++tally.predicted[static_cast<std::size_t>(best)];
    if (static_cast<std::size_t>(best) == y) ++tally.tp[y];
  }
  return tally.score();
}

}  // namespace detail

/// Searches the constrained weight grid for the highest validation macro-F1 of the weighted
/// vote. Exhaustive mode is grid-optimal; ties go to the lexicographically smallest flattened
/// weight vector. Coordinate mode optimizes one classifier row at a time until no row changes.
/// `labels` are 0-based.
inline EnsembleWeights ensemble_weight_search(std::span<const Matrix> probs, std::span<const int> labels,
                                              const SearchOptions& opts = {}) {
  if (probs.empty()) throw DataError("ensemble weight search needs at least one classifier");
  const std::size_t m = probs.size();
  const std::size_t n = probs[0].rows;
  const std::size_t j = probs[0].cols;
  if (n == 0 || labels.size() != n) throw DataError("ensemble weight search needs one label per validation row");
  for (const auto& p : probs) {
    if (p.rows != n || p.cols != j) throw DataError("classifier probability matrices differ in shape");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= j) throw DataError("validation label outside the class range");
  }

  const int units = units_for_step(opts.step);
  const auto rows = compositions(units, static_cast<int>(j));
  const double combos = std::pow(static_cast<double>(rows.size()), static_cast<double>(m));
  const double cost = combos * static_cast<double>(n);

  SearchMode mode = opts.mode;
  if (mode == SearchMode::auto_select) mode = cost <= opts.budget ? SearchMode::exhaustive : SearchMode::coordinate;
  if (mode == SearchMode::exhaustive && cost > opts.budget) {
    throw BudgetError("exhaustive ensemble search needs " + format_double(combos) + " weight combinations x " +
                      std::to_string(n) + " rows, above the budget of " + format_double(opts.budget) +
                      "; use coordinate or auto mode, or raise the budget");
  }

  const std::size_t r_count = rows.size();
  std::vector<std::size_t> choice(m, 0);
  double best_score = -1.0;

  if (mode == SearchMode::exhaustive) {
    const detail::SearchTables tables(probs, rows, units);
    // Parallel over the first classifier's row; each worker enumerates the rest in order.
    struct Best {
      double score = -1.0;
      std::vector<std::size_t> choice;
    };
    std::vector<Best> per_first(r_count);
    parallel_for(r_count, opts.threads, [&](std::size_t r0) {
      detail::Tally tally(j, labels);
      Best& best = per_first[r0];
      std::vector<std::size_t> cur(m, 0);
      cur[0] = r0;
      if (m == 1) {
        best.score = detail::score_last(nullptr, tables.at(0, r0), n, j, labels, tally);
        best.choice = cur;
        return;
      }
      std::vector<std::vector<double>> partial(m - 1, std::vector<double>(n * j));
      partial[0] = tables.at(0, r0);
      auto rec = [&](auto&& self, std::size_t level) -> void {
        if (level == m - 1) {
          for (std::size_t r = 0; r < r_count; ++r) {
            const double s = detail::score_last(&partial[level - 1], tables.at(level, r), n, j, labels, tally);
            if (s > best.score) {
              cur[level] = r;
              best.score = s;
              best.choice = cur;
            }
          }
          return;
        }
        for (std::size_t r = 0; r < r_count; ++r) {
          cur[level] = r;
          const auto& add = tables.at(level, r);
          const auto& prev = partial[level - 1];
          auto& dst = partial[level];
          for (std::size_t k = 0; k < n * j; ++k) dst[k] = prev[k] + add[k];
          self(self, level + 1);
        }
      };
      rec(rec, 1);
    });
    for (std::size_t r0 = 0; r0 < r_count; ++r0) {
      if (per_first[r0].score > best_score) {
        best_score = per_first[r0].score;
        choice = per_first[r0].choice;
      }
    }
  } else {
    auto table = [&](std::size_t i, std::size_t r) { return detail::SearchTables::product(probs[i], rows[r], units); };
    // Start every classifier at the most even split (the first such row in order).
    std::size_t start = 0;
    int start_spread = std::numeric_limits<int>::max();
    for (std::size_t r = 0; r < r_count; ++r) {
      const auto [lo, hi] = std::minmax_element(rows[r].begin(), rows[r].end());
      if (*hi - *lo < start_spread) {
        start_spread = *hi - *lo;
        start = r;
      }
    }
    std::fill(choice.begin(), choice.end(), start);
    detail::Tally tally(j, labels);
    auto evaluate_choice = [&](const std::vector<std::size_t>& c) {
      if (m == 1) return detail::score_last(nullptr, table(0, c[0]), n, j, labels, tally);
      std::vector<double> partial = table(0, c[0]);
      for (std::size_t i = 1; i + 1 < m; ++i) {
        const auto& add = table(i, c[i]);
        for (std::size_t k = 0; k < n * j; ++k) partial[k] += add[k];
      }
      return detail::score_last(&partial, table(m - 1, c[m - 1]), n, j, labels, tally);
    };
    best_score = evaluate_choice(choice);
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      bool changed = false;
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> scores(r_count);
        parallel_for(r_count, opts.threads, [&](std::size_t r) {
          auto c = choice;
          c[i] = r;
          detail::Tally local(j, labels);
          std::vector<double> partial(n * j, 0.0);
          bool first = true;
          for (std::size_t q = 0; q + 1 < m; ++q) {
            const auto& add = table(q, c[q]);
            if (first) {
              partial = add;
              first = false;
            } else {
              for (std::size_t k = 0; k < n * j; ++k) partial[k] += add[k];
            }
          }
          scores[r] = detail::score_last(m == 1 ? nullptr : &partial, table(m - 1, c[m - 1]), n, j, labels, local);
        });
        // only strict improvements move a row, so the sweep terminates
        std::size_t pick = choice[i];
        for (std::size_t r = 0; r < r_count; ++r) {
          if (scores[r] > best_score) {
            best_score = scores[r];
            pick = r;
          }
        }
        if (pick != choice[i]) {
          choice[i] = pick;
          changed = true;
        }
      }
      if (!changed) break;
    }
    best_score = evaluate_choice(choice);
  }

  EnsembleWeights w;
  w.classifiers = static_cast<int>(m);
  w.classes = static_cast<int>(j);
  w.units = units;
  w.mode = mode;
  w.validation_score = best_score;
  for (std::size_t i = 0; i < m; ++i) w.grid.insert(w.grid.end(), rows[choice[i]].begin(), rows[choice[i]].end());
  return w;
}

}  // namespace netcare::learn
