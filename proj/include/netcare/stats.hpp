#pragma once

// Structure <-> behavior relationship statistics: zero-lag normalized
// cross-correlation, population and per-person correlation tables, Welch
// t-tests with Bonferroni correction, and one-way ANOVA.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/features.hpp"
#include "netcare/graph.hpp"

namespace netcare {

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

namespace dist {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

/// Upper tail P(F >= f) of the F distribution.
inline double f_upper_tail(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

}  // namespace dist

// ---------------------------------------------------------------------------
// Weekly series and normalized cross-correlation
// ---------------------------------------------------------------------------

/// Values indexed by week position; nullopt marks a missing week.
using WeeklySeries = std::vector<std::optional<double>>;

inline constexpr std::size_t kMinOverlapWeeks = 3;

/// Zero-lag (by default) normalized cross-correlation with mean subtraction over the weeks where
/// both series are present; equals Pearson's r on that overlap. Undefined (nullopt) with fewer than
/// three overlapping weeks or a constant segment. `lag` pairs x[t] with y[t + lag].
inline std::optional<double> ncc(const WeeklySeries& x, const WeeklySeries& y, int lag = 0) {
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(x.size());
  ys.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const auto u = static_cast<std::ptrdiff_t>(t) + lag;
    if (u < 0 || u >= static_cast<std::ptrdiff_t>(y.size())) continue;
    const auto& a = x[t];
    const auto& b = y[static_cast<std::size_t>(u)];
    if (!a || !b) continue;
    xs.push_back(*a);
    ys.push_back(*b);
  }
  if (xs.size() < kMinOverlapWeeks) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Relative guard: a segment whose spread is at rounding level of its magnitude is constant.
  auto is_flat = [&](double ss, double m) { return ss <= 1e-24 * std::max(1.0, m * m) * n; };
  if (is_flat(sxx, mx) || is_flat(syy, my)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Person panel
// ---------------------------------------------------------------------------

inline constexpr std::size_t kStructuralSeries = 10;
inline constexpr std::size_t kBehavioralSeries = 6;

inline std::string structural_series_name(std::size_t i) {
  return std::string(i < 5 ? "participant_" : "whole_") + std::string(kMetricNames[i % 5]);
}

struct PersonPanel {
  PersonId person;
  std::array<WeeklySeries, kStructuralSeries> structure;
  std::array<WeeklySeries, kBehavioralSeries> behavior;  // weekly means, retained weeks only
};

/// One panel per person with at least one retained behavior week. Week positions follow `weeks`.
inline std::vector<PersonPanel> build_panel(const BehaviorTable& behavior, const StructureTable& structure,
                                            std::span<const WeekIndex> weeks) {
  std::map<int, std::size_t> position;
  for (std::size_t i = 0; i < weeks.size(); ++i) position[weeks[i].index] = i;
  std::map<PersonId, PersonPanel> panels;
  auto get = [&](const PersonId& p) -> PersonPanel& {
    auto [it, inserted] = panels.try_emplace(p);
    if (inserted) {
      it->second.person = p;
      for (auto& s : it->second.structure) s.assign(weeks.size(), std::nullopt);
      for (auto& s : it->second.behavior) s.assign(weeks.size(), std::nullopt);
    }
    return it->second;
  };
  for (const auto& [key, bf] : behavior) {
    auto pos = position.find(key.second);
    if (pos == position.end()) continue;
    auto& panel = get(key.first);
    const auto means = bf.weekly_means();
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) panel.behavior[b][pos->second] = means[b];
  }
  for (const auto& [key, sf] : structure) {
    auto it = panels.find(key.first);
    auto pos = position.find(key.second);
    if (it == panels.end() || pos == position.end()) continue;
    for (std::size_t s = 0; s < kStructuralSeries; ++s) it->second.structure[s][pos->second] = sf[s];
  }
  std::vector<PersonPanel> out;
  out.reserve(panels.size());
  for (auto& [_, p] : panels) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Population correlation table
// ---------------------------------------------------------------------------

enum class Aggregator : std::uint8_t { mean, median };

inline Aggregator parse_aggregator(std::string_view s) {
  if (s == "mean") return Aggregator::mean;
  if (s == "median") return Aggregator::median;
  throw ConfigError("unknown aggregator '" + std::string(s) + "'");
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per-week aggregate over persons with data that week.
inline WeeklySeries aggregate_series(std::span<const WeeklySeries* const> series, std::size_t weeks, Aggregator agg) {
  WeeklySeries out(weeks);
  std::vector<double> vals;
  for (std::size_t w = 0; w < weeks; ++w) {
    vals.clear();
    for (const auto* s : series) {
      if ((*s)[w]) vals.push_back(*(*s)[w]);
    }
    if (vals.empty()) continue;
    if (agg == Aggregator::mean) {
      double sum = 0.0;
      for (double v : vals) sum += v;
      out[w] = sum / static_cast<double>(vals.size());
    } else {
      out[w] = median_of(vals);
    }
  }
  return out;
}

/// Structural (rows) x behavioral (columns) coefficients; nullopt entries are undefined.
struct CorrelationTable {
  std::array<std::array<std::optional<double>, kBehavioralSeries>, kStructuralSeries> r{};

  std::size_t count_at_least(double threshold) const {
    std::size_t n = 0;
    for (const auto& row : r) {
      for (const auto& v : row) {
        if (v && std::fabs(*v) >= threshold) ++n;
      }
    }
    return n;
  }

  std::size_t defined_count() const {
    std::size_t n = 0;
    for (const auto& row : r) {
      for (const auto& v : row) n += v ? 1 : 0;
    }
    return n;
  }
};

struct PopulationAnalysis {
  CorrelationTable table;
  std::array<WeeklySeries, kStructuralSeries> structure;
  std::array<WeeklySeries, kBehavioralSeries> behavior;
  std::size_t at_least_05 = 0;
  std::size_t at_least_07 = 0;
};

/// Correlates the per-week population aggregates of every structural and behavioral feature.
inline PopulationAnalysis population_table(std::span<const PersonPanel> panel, std::size_t weeks,
                                           Aggregator agg = Aggregator::mean) {
  PopulationAnalysis out;
  std::vector<const WeeklySeries*> refs;
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    refs.clear();
    for (const auto& p : panel) refs.push_back(&p.structure[s]);
    out.structure[s] = aggregate_series(refs, weeks, agg);
  }
  for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
    refs.clear();
    for (const auto& p : panel) refs.push_back(&p.behavior[b]);
    out.behavior[b] = aggregate_series(refs, weeks, agg);
  }
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) out.table.r[s][b] = ncc(out.structure[s], out.behavior[b]);
  }
  out.at_least_05 = out.table.count_at_least(0.5);
  out.at_least_07 = out.table.count_at_least(0.7);
  return out;
}

// ---------------------------------------------------------------------------
// Per-person census
// ---------------------------------------------------------------------------

/// Per-person 10x6 coefficient matrices, in panel order.
inline std::vector<CorrelationTable> person_correlations(std::span<const PersonPanel> panel) {
  std::vector<CorrelationTable> out(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    for (std::size_t s = 0; s < kStructuralSeries; ++s) {
      for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
        out[i].r[s][b] = ncc(panel[i].structure[s], panel[i].behavior[b]);
      }
    }
  }
  return out;
}

struct CorrelationCensus {
  double threshold = 0.5;
  std::size_t total_persons = 0;
  std::size_t uncorrelatable = 0;  // persons with every pair undefined
  std::array<std::array<std::size_t, kBehavioralSeries>, kStructuralSeries> pair_counts{};
  std::array<std::size_t, kBehavioralSeries> participant_any{};
  std::array<std::size_t, kBehavioralSeries> whole_any{};
  std::array<std::size_t, kBehavioralSeries> either_any{};
};

/// Counts persons with |r| >= threshold per pair, and per behavioral feature the persons with
/// any participant-scope, any whole-scope, or any structural feature at or above the threshold.
inline CorrelationCensus person_census(std::span<const CorrelationTable> per_person, double threshold = 0.5) {
  CorrelationCensus c;
  c.threshold = threshold;
  c.total_persons = per_person.size();
  for (const auto& t : per_person) {
    if (t.defined_count() == 0) {
      ++c.uncorrelatable;
      continue;
    }
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
      bool p_any = false;
      bool w_any = false;
      for (std::size_t s = 0; s < kStructuralSeries; ++s) {
        const auto& v = t.r[s][b];
        if (!v || std::fabs(*v) < threshold) continue;
        ++c.pair_counts[s][b];
        (s < 5 ? p_any : w_any) = true;
      }
      c.participant_any[b] += p_any ? 1 : 0;
      c.whole_any[b] += w_any ? 1 : 0;
      c.either_any[b] += (p_any || w_any) ? 1 : 0;
    }
  }
  return c;
}

inline CorrelationCensus person_census(std::span<const PersonPanel> panel, double threshold = 0.5) {
  return person_census(std::span<const CorrelationTable>(person_correlations(panel)), threshold);
}

// ---------------------------------------------------------------------------
// Hypothesis tests
// ---------------------------------------------------------------------------

struct TestResult {
  bool defined = true;
  bool degenerate = false;
  double statistic = 0.0;
  double df1 = 0.0;  // t: Welch-Satterthwaite df; F: between-group df
  double df2 = 0.0;  // F: within-group df
  double p_value = 1.0;
  double alpha = 0.05;
  std::size_t family_size = 1;
  bool significant_after_correction = false;
};

/// Bonferroni: significant iff p <= alpha / family.
inline void apply_bonferroni(TestResult& r, double alpha, std::size_t family) {
  r.alpha = alpha;
  r.family_size = family;
  r.significant_after_correction = r.defined && r.p_value <= alpha / static_cast<double>(family);
}

namespace detail {

inline std::pair<double, double> mean_var_sample(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, ss / (n - 1.0)};
}

}  // namespace detail

/// Welch's unequal-variance t-test, two-sided. Zero variance in both samples: equal means give
/// t = 0, p = 1; different means give p = 0 with the degenerate flag set.
inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                               std::size_t family = 1) {
  TestResult r;
  if (a.size() < 2 || b.size() < 2) {
    r.defined = false;
    apply_bonferroni(r, alpha, family);
    return r;
  }
  const auto [ma, va] = detail::mean_var_sample(a);
  const auto [mb, vb] = detail::mean_var_sample(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = va / na;
  const double qb = vb / nb;
  const double se2 = qa + qb;
  if (se2 == 0.0) {
    r.degenerate = true;
    r.df1 = na + nb - 2.0;
    if (ma == mb) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
  } else {
    r.statistic = (ma - mb) / std::sqrt(se2);
    r.df1 = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    r.p_value = dist::student_t_two_sided(r.statistic, r.df1);
  }
  apply_bonferroni(r, alpha, family);
  return r;
}

/// Splits paired observations at the structural median (values <= the lower-middle order
/// statistic form the low group), then Welch-tests the behavioral values high vs low.
/// The split depends only on ranks, so it is invariant to increasing transforms of `structural`.
inline TestResult split_and_test(std::span<const double> behavioral, std::span<const double> structural,
                                 double alpha = 0.05, std::size_t family = 60) {
  TestResult undefined;
  undefined.defined = false;
  apply_bonferroni(undefined, alpha, family);
  if (behavioral.size() != structural.size() || structural.size() < 4) return undefined;
  std::vector<double> sorted(structural.begin(), structural.end());
  const std::size_t k = (sorted.size() + 1) / 2 - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  const double cut = sorted[k];
  std::vector<double> high;
  std::vector<double> low;
  for (std::size_t i = 0; i < structural.size(); ++i) (structural[i] > cut ? high : low).push_back(behavioral[i]);
  if (high.size() < 2 || low.size() < 2) return undefined;
  return welch_t_test(high, low, alpha, family);
}

/// One-way ANOVA: F = between-group mean square / within-group mean square.
inline TestResult one_way_anova(std::span<const std::vector<double>> groups, double alpha = 0.05,
                                std::size_t family = 1) {
  TestResult r;
  std::size_t total = 0;
  bool ok = groups.size() >= 2;
  for (const auto& g : groups) {
    total += g.size();
    ok = ok && g.size() >= 2;
  }
  if (!ok) {
    r.defined = false;
    apply_bonferroni(r, alpha, family);
    return r;
  }
  double grand = 0.0;
  for (const auto& g : groups) {
    for (double x : g) grand += x;
  }
  grand /= static_cast<double>(total);
  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    double m = 0.0;
    for (double x : g) m += x;
    m /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ssw += (x - m) * (x - m);
  }
  r.df1 = static_cast<double>(groups.size() - 1);
  r.df2 = static_cast<double>(total - groups.size());
  const double msb = ssb / r.df1;
  const double msw = ssw / r.df2;
  if (msw == 0.0) {
    r.degenerate = true;
    if (msb == 0.0) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
  } else {
    r.statistic = msb / msw;
    r.p_value = dist::f_upper_tail(r.statistic, r.df1, r.df2);
  }
  apply_bonferroni(r, alpha, family);
  return r;
}

// ---------------------------------------------------------------------------
// Full relationship analysis
// ---------------------------------------------------------------------------

struct PairTest {
  std::size_t structural = 0;
  std::size_t behavioral = 0;
  std::size_t observations = 0;
  TestResult result;
};

struct AnovaEntry {
  WellnessTarget target = WellnessTarget::stress;
  std::vector<std::size_t> group_sizes;
  TestResult result;
};

struct AnalysisOptions {
  double threshold = 0.5;
  Aggregator aggregator = Aggregator::mean;
  double alpha = 0.05;
};

struct AnalysisResults {
  AnalysisOptions options;
  std::size_t weeks = 0;
  PopulationAnalysis population;
  CorrelationCensus census;
  std::vector<PairTest> split_tests;  // structural-major, 60 entries
  std::vector<AnovaEntry> heart_rate_anova;
  std::size_t significant_tests = 0;
};

/// Population table, per-person census, 60 pooled median-split t-tests (Bonferroni family 60) and
/// heart-rate ANOVA across the levels of every wellness question.
inline AnalysisResults run_analysis(std::span<const PersonPanel> panel, std::size_t weeks,
                                    std::span<const SurveyRecord> surveys, const AnalysisOptions& opts) {
  AnalysisResults out;
  out.options = opts;
  out.weeks = weeks;
  out.population = population_table(panel, weeks, opts.aggregator);
  out.census = person_census(panel, opts.threshold);

  const std::size_t family = kStructuralSeries * kBehavioralSeries;
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
      std::vector<double> beh;
      std::vector<double> str;
      for (const auto& p : panel) {
        for (std::size_t w = 0; w < weeks; ++w) {
          if (p.behavior[b][w] && p.structure[s][w]) {
            beh.push_back(*p.behavior[b][w]);
            str.push_back(*p.structure[s][w]);
          }
        }
      }
      PairTest t{s, b, beh.size(), split_and_test(beh, str, opts.alpha, family)};
      out.significant_tests += t.result.significant_after_correction ? 1 : 0;
      out.split_tests.push_back(t);
    }
  }

  std::map<PersonId, const SurveyRecord*> by_person;
  for (const auto& s : surveys) by_person.emplace(s.person, &s);
  for (std::size_t ti = 0; ti < kWellnessTargetNames.size(); ++ti) {
    const auto target = static_cast<WellnessTarget>(ti);
    std::vector<std::vector<double>> groups(static_cast<std::size_t>(level_count(target)));
    for (const auto& p : panel) {
      auto it = by_person.find(p.person);
      if (it == by_person.end()) continue;
      const auto level = it->second->level(target);
      if (!level) continue;
      for (std::size_t w = 0; w < weeks; ++w) {
        if (p.behavior[0][w]) groups[static_cast<std::size_t>(*level - 1)].push_back(*p.behavior[0][w]);
      }
    }
    std::vector<std::vector<double>> non_empty;
    AnovaEntry e;
    e.target = target;
    for (auto& g : groups) {
      e.group_sizes.push_back(g.size());
      if (!g.empty()) non_empty.push_back(std::move(g));
    }
    e.result = one_way_anova(non_empty, opts.alpha, kWellnessTargetNames.size());
    out.heart_rate_anova.push_back(std::move(e));
  }
  return out;
}

}  // namespace netcare
