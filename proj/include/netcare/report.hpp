#pragma once

// Output tables: population correlations, per-person censuses, prediction
// results with improvement rows, and per-week box-plot summaries.

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/features.hpp"
#include "netcare/stats.hpp"

namespace netcare {

// ---------------------------------------------------------------------------
// Box-plot series
// ---------------------------------------------------------------------------

struct BoxplotWeek {
  int week = 0;
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

struct BoxplotSeries {
  std::string feature;
  std::vector<BoxplotWeek> weeks;  // weeks with at least one value
};

/// Linear-interpolation quantile (R type 7) of sorted values.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline BoxplotWeek summarize_week(int week, std::vector<double> values) {
  std::sort(values.begin(), values.end());
  BoxplotWeek b;
  b.week = week;
  b.n = values.size();
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  double s = 0.0;
  for (double v : values) s += v;
  b.mean = std::clamp(s / static_cast<double>(values.size()), b.min, b.max);
  return b;
}

/// One series per structural and behavioral feature, summarizing persons' values each week.
inline std::vector<BoxplotSeries> boxplot_series(std::span<const PersonPanel> panel, std::span<const WeekIndex> weeks) {
  std::vector<BoxplotSeries> out;
  auto build = [&](std::string name, auto&& get) {
    BoxplotSeries s;
    s.feature = std::move(name);
    for (std::size_t w = 0; w < weeks.size(); ++w) {
      std::vector<double> vals;
      for (const auto& p : panel) {
        if (const auto& v = get(p)[w]) vals.push_back(*v);
      }
      if (!vals.empty()) s.weeks.push_back(summarize_week(weeks[w].index, std::move(vals)));
    }
    out.push_back(std::move(s));
  };
  for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
    build(std::string(kBehaviorSeriesNames[b]), [&](const PersonPanel& p) -> const WeeklySeries& { return p.behavior[b]; });
  }
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    build(structural_series_name(s), [&](const PersonPanel& p) -> const WeeklySeries& { return p.structure[s]; });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Improvement arithmetic
// ---------------------------------------------------------------------------

/// (combined - baseline) / baseline in whole percent, rounded half to even; nullopt when the
/// baseline is zero.
inline std::optional<long> improvement_percent(double baseline, double combined) {
  if (baseline == 0.0) return std::nullopt;
  const double pct = (combined - baseline) / baseline * 100.0;
  const int mode = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const long r = std::lrint(pct);
  std::fesetround(mode);
  return r;
}

inline std::string format_improvement(std::optional<long> p) { return p ? std::to_string(*p) + "%" : "n/a"; }

// ---------------------------------------------------------------------------
// Table rendering (comma-separated, one header row)
// ---------------------------------------------------------------------------

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fixed(const std::optional<double>& v, int digits = 4) { return v ? fixed(*v, digits) : "NA"; }

/// Structural features as rows, behavioral weekly means as columns.
inline std::string render_population_table(const CorrelationTable& t) {
  std::ostringstream os;
  os << "structure";
  for (auto b : kBehaviorSeriesNames) os << ',' << b;
  os << '\n';
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    os << structural_series_name(s);
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) os << ',' << fixed(t.r[s][b]);
    os << '\n';
  }
  return os.str();
}

inline std::string render_census_counts(const CorrelationCensus& c) {
  std::ostringstream os;
  os << "structure";
  for (auto b : kBehaviorSeriesNames) os << ',' << b;
  os << '\n';
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    os << structural_series_name(s);
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) os << ',' << c.pair_counts[s][b];
    os << '\n';
  }
  return os.str();
}

inline std::string render_census_summary(const CorrelationCensus& c) {
  std::ostringstream os;
  os << "behavior,participant_network,whole_network,either_network,total_persons,uncorrelatable\n";
  for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
    os << kBehaviorSeriesNames[b] << ',' << c.participant_any[b] << ',' << c.whole_any[b] << ',' << c.either_any[b]
       << ',' << c.total_persons << ',' << c.uncorrelatable << '\n';
  }
  return os.str();
}

inline std::string render_boxplots(std::span<const BoxplotSeries> series) {
  std::ostringstream os;
  os << "feature,week,n,min,q1,median,mean,q3,max\n";
  for (const auto& s : series) {
    for (const auto& w : s.weeks) {
      os << s.feature << ',' << w.week << ',' << w.n << ',' << fixed(w.min) << ',' << fixed(w.q1) << ','
         << fixed(w.median) << ',' << fixed(w.mean) << ',' << fixed(w.q3) << ',' << fixed(w.max) << '\n';
    }
  }
  return os.str();
}

struct PredictionRow {
  std::string name;
  double f1 = 0.0;
  std::vector<std::optional<double>> levels;  // nullopt: level absent from the test labels
};

/// Prediction results for one target: ablation rows followed by an improvement row comparing
/// the last row against the first.
struct PredictionTable {
  std::string target;
  int levels = 4;
  std::vector<PredictionRow> rows;
};

inline std::string render_prediction_table(const PredictionTable& t) {
  std::ostringstream os;
  os << "features,F1";
  for (int l = 1; l <= t.levels; ++l) os << ",Level" << l;
  os << '\n';
  for (const auto& r : t.rows) {
    os << r.name << ',' << fixed(r.f1, 3);
    for (const auto& v : r.levels) os << ',' << fixed(v, 3);
    os << '\n';
  }
  if (t.rows.size() >= 2) {
    const auto& base = t.rows.front();
    const auto& comb = t.rows.back();
    os << "improvement," << format_improvement(improvement_percent(base.f1, comb.f1));
    for (std::size_t l = 0; l < static_cast<std::size_t>(t.levels); ++l) {
      const auto& b = base.levels[l];
      const auto& c = comb.levels[l];
      os << ',' << (b && c ? format_improvement(improvement_percent(*b, *c)) : "n/a");
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace netcare
