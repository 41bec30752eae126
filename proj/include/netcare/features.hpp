#pragma once

// Weekly behavior summaries from minute-level wearable data and assembly of
// the person-week feature matrix (gender + behavior + structure + label).

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/graph.hpp"
#include "netcare/ingest.hpp"

namespace netcare {

// ---------------------------------------------------------------------------
// Behavior features
// ---------------------------------------------------------------------------

struct BehaviorFeatures {
  double hr_mean = 0.0;
  double hr_var = 0.0;  // population variance
  double steps_daily_mean = 0.0;
  double steps_daily_std = 0.0;
  std::array<double, 4> state_minutes_mean{};  // indexed by ActivityState
  std::array<double, 4> state_minutes_std{};

  /// Fixed order: hr_mean, hr_var, steps mean/std, then mean/std per activity state.
  std::array<double, 12> values() const {
    std::array<double, 12> v{hr_mean, hr_var, steps_daily_mean, steps_daily_std};
    for (std::size_t s = 0; s < 4; ++s) {
      v[4 + 2 * s] = state_minutes_mean[s];
      v[5 + 2 * s] = state_minutes_std[s];
    }
    return v;
  }

  static BehaviorFeatures from_values(std::span<const double, 12> v) {
    BehaviorFeatures b;
    b.hr_mean = v[0];
    b.hr_var = v[1];
    b.steps_daily_mean = v[2];
    b.steps_daily_std = v[3];
    for (std::size_t s = 0; s < 4; ++s) {
      b.state_minutes_mean[s] = v[4 + 2 * s];
      b.state_minutes_std[s] = v[5 + 2 * s];
    }
    return b;
  }

  /// The six weekly means used by the correlation analysis: heart rate, steps and the four states.
  std::array<double, 6> weekly_means() const {
    return {hr_mean, steps_daily_mean, state_minutes_mean[0], state_minutes_mean[1], state_minutes_mean[2],
            state_minutes_mean[3]};
  }
};

inline constexpr std::array<std::string_view, 12> kBehaviorColumnNames = {
    "hr_mean",          "hr_var",          "steps_daily_mean",      "steps_daily_std",
    "sedentary_mean",   "sedentary_std",   "lightly_active_mean",   "lightly_active_std",
    "fairly_active_mean", "fairly_active_std", "very_active_mean", "very_active_std"};

inline constexpr std::array<std::string_view, 6> kBehaviorSeriesNames = {
    "heart_rate", "steps", "sedentary", "lightly_active", "fairly_active", "very_active"};

namespace detail {

/// Mean and population standard deviation.
inline std::pair<double, double> mean_std(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace detail

/// Summaries over one person-week. Heart-rate statistics use the minutes that carry a heart rate;
/// steps and state minutes are summed per day first, then averaged over the 7 daily sums.
inline BehaviorFeatures behavior_features(std::span<const MinuteRecord> records, const WeekIndex& week) {
  std::array<double, 7> steps{};
  std::array<std::array<double, 7>, 4> state_minutes{};
  double hr_sum = 0.0;
  std::size_t hr_n = 0;
  const Timestamp begin = week.start_ts();
  for (const auto& r : records) {
    if (!week.contains(r.timestamp)) continue;
    const auto day = static_cast<std::size_t>((r.timestamp - begin) / kSecondsPerDay);
    steps[day] += static_cast<double>(r.steps);
    if (r.activity_state) state_minutes[static_cast<std::size_t>(*r.activity_state)][day] += 1.0;
    if (r.heart_rate) {
      hr_sum += *r.heart_rate;
      ++hr_n;
    }
  }
  if (hr_n == 0) {
    throw DataError("no heart-rate minutes in retained week " + std::to_string(week.index) +
                    "; compliance filtering should have excluded it");
  }
  BehaviorFeatures f;
  f.hr_mean = hr_sum / static_cast<double>(hr_n);
  double ss = 0.0;
  for (const auto& r : records) {
    if (r.heart_rate && week.contains(r.timestamp)) ss += (*r.heart_rate - f.hr_mean) * (*r.heart_rate - f.hr_mean);
  }
  f.hr_var = ss / static_cast<double>(hr_n);
  std::tie(f.steps_daily_mean, f.steps_daily_std) = detail::mean_std(steps);
  for (std::size_t s = 0; s < 4; ++s) {
    std::tie(f.state_minutes_mean[s], f.state_minutes_std[s]) = detail::mean_std(state_minutes[s]);
  }
  return f;
}

using BehaviorTable = std::map<PersonWeek, BehaviorFeatures>;

struct BehaviorResult {
  ComplianceMask compliance;
  BehaviorTable table;  // retained weeks only
};

/// Compliance plus behavior features from any source of person-week record batches.
/// `source(visit)` must call visit(person, week_position, records) for each person-week.
template <class BatchSource>
BehaviorResult behavior_from_batches(BatchSource&& source, std::span<const WeekIndex> weeks, double threshold) {
  check_threshold(threshold);
  BehaviorResult out;
  out.compliance.weeks.assign(weeks.begin(), weeks.end());
  out.compliance.threshold = threshold;
  source([&](const PersonId& p, std::size_t w, std::span<const MinuteRecord> recs) {
    const auto wc = week_compliance(recs, weeks[w]);
    out.compliance.record(p, w, wc);
    if (wc.retained(threshold)) out.table.emplace(PersonWeek{p, weeks[w].index}, behavior_features(recs, weeks[w]));
  });
  return out;
}

/// Same as behavior_from_batches over an in-memory record list sorted by (person, timestamp).
inline BehaviorResult behavior_from_records(std::span<const MinuteRecord> records, std::span<const WeekIndex> weeks,
                                            double threshold = 0.8) {
  return behavior_from_batches([&](auto&& visit) { for_each_person_week(records, weeks, visit); }, weeks, threshold);
}

// ---------------------------------------------------------------------------
// Feature matrix
// ---------------------------------------------------------------------------

enum class FeatureGroup : std::uint8_t { gender = 1, behavior = 2, structure = 4 };

/// Bitmask over FeatureGroup.
struct FeatureGroups {
  std::uint8_t bits = 0;

  constexpr FeatureGroups() = default;
  constexpr FeatureGroups(std::initializer_list<FeatureGroup> gs) {
    for (auto g : gs) bits |= static_cast<std::uint8_t>(g);
  }
  constexpr bool has(FeatureGroup g) const { return (bits & static_cast<std::uint8_t>(g)) != 0; }
  constexpr FeatureGroups operator|(FeatureGroups o) const {
    FeatureGroups r;
    r.bits = bits | o.bits;
    return r;
  }
  friend constexpr bool operator==(FeatureGroups, FeatureGroups) = default;
};

inline constexpr std::size_t kGenderColumns = 1;
inline constexpr std::size_t kBehaviorColumns = 12;
inline constexpr std::size_t kStructureColumns = 10;
inline constexpr std::size_t kFeatureColumns = kGenderColumns + kBehaviorColumns + kStructureColumns;

inline const std::array<std::string, kFeatureColumns>& feature_column_names() {
  static const auto names = [] {
    std::array<std::string, kFeatureColumns> n;
    std::size_t k = 0;
    n[k++] = "gender";
    for (auto b : kBehaviorColumnNames) n[k++] = std::string(b);
    for (Scope s : kScopes) {
      for (auto m : kMetricNames) n[k++] = std::string(s == Scope::participant ? "p_" : "w_") + std::string(m);
    }
    return n;
  }();
  return names;
}

/// Column indices (into the full 23-column layout) active under `groups`, in fixed order.
inline std::vector<std::size_t> active_columns(FeatureGroups groups) {
  std::vector<std::size_t> cols;
  if (groups.has(FeatureGroup::gender)) cols.push_back(0);
  if (groups.has(FeatureGroup::behavior)) {
    for (std::size_t i = 0; i < kBehaviorColumns; ++i) cols.push_back(kGenderColumns + i);
  }
  if (groups.has(FeatureGroup::structure)) {
    for (std::size_t i = 0; i < kStructureColumns; ++i) cols.push_back(kGenderColumns + kBehaviorColumns + i);
  }
  return cols;
}

inline FeatureGroups parse_feature_groups(std::span<const std::string> names) {
  FeatureGroups g;
  for (const auto& n : names) {
    if (n == "gender") {
      g = g | FeatureGroups{FeatureGroup::gender};
    } else if (n == "behavior") {
      g = g | FeatureGroups{FeatureGroup::behavior};
    } else if (n == "structure") {
      g = g | FeatureGroups{FeatureGroup::structure};
    } else {
      throw ConfigError("unknown feature group '" + n + "'");
    }
  }
  if (g.bits == 0) throw ConfigError("feature group list is empty");
  return g;
}

struct FeatureRow {
  PersonId person;
  int week = 0;
  std::array<double, kFeatureColumns> values{};  // full layout, independent of the active mask
  int label = 0;                                 // wellness level, 1-based
};

/// Row accounting: retained_person_weeks == rows + no_survey + missing_label + missing_structure.
struct ExclusionLedger {
  std::size_t retained_person_weeks = 0;
  std::size_t no_survey = 0;
  std::size_t missing_label = 0;
  std::size_t missing_structure = 0;
  std::size_t rows = 0;
  std::size_t persons_with_rows = 0;
  std::size_t persons_without_survey = 0;
};

struct FeatureMatrix {
  std::vector<FeatureRow> rows;
  FeatureGroups groups{FeatureGroup::gender, FeatureGroup::behavior, FeatureGroup::structure};
  WellnessTarget target = WellnessTarget::stress;
  ExclusionLedger exclusions;

  std::vector<std::size_t> columns() const { return active_columns(groups); }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (auto c : columns()) out.push_back(feature_column_names()[c]);
    return out;
  }

  /// Active-column values of one row.
  std::vector<double> row_values(std::size_t i) const {
    std::vector<double> out;
    for (auto c : columns()) out.push_back(rows[i].values[c]);
    return out;
  }

  int num_classes() const { return level_count(target); }
};

/// One row per retained person-week that has structure metrics and a survey label for `target`.
/// The person's single survey label is replicated across their weeks.
inline FeatureMatrix assemble_matrix(const BehaviorTable& behavior, const StructureTable& structure,
                                     std::span<const SurveyRecord> surveys, WellnessTarget target,
                                     FeatureGroups groups) {
  std::map<PersonId, const SurveyRecord*> by_person;
  for (const auto& s : surveys) by_person.emplace(s.person, &s);

  FeatureMatrix m;
  m.groups = groups;
  m.target = target;
  auto& ex = m.exclusions;
  std::set<PersonId> with_rows;
  std::set<PersonId> without_survey;
  for (const auto& [key, bf] : behavior) {
    ++ex.retained_person_weeks;
    auto sit = by_person.find(key.first);
    if (sit == by_person.end()) {
      ++ex.no_survey;
      without_survey.insert(key.first);
      continue;
    }
    const auto label = sit->second->level(target);
    if (!label) {
      ++ex.missing_label;
      continue;
    }
    auto st = structure.find(key);
    if (st == structure.end()) {
      ++ex.missing_structure;
      continue;
    }
    FeatureRow row;
    row.person = key.first;
    row.week = key.second;
    row.label = *label;
    row.values[0] = sit->second->gender == Gender::female ? 1.0 : 0.0;
    const auto bv = bf.values();
    std::copy(bv.begin(), bv.end(), row.values.begin() + kGenderColumns);
    std::copy(st->second.begin(), st->second.end(), row.values.begin() + kGenderColumns + kBehaviorColumns);
    m.rows.push_back(std::move(row));
    with_rows.insert(key.first);
  }
  ex.rows = m.rows.size();
  ex.persons_with_rows = with_rows.size();
  ex.persons_without_survey = without_survey.size();
  if (m.rows.empty()) {
    std::set<PersonId> behavior_persons;
    for (const auto& [key, _] : behavior) behavior_persons.insert(key.first);
    std::set<PersonId> structure_persons;
    for (const auto& [key, _] : structure) structure_persons.insert(key.first);
    throw DataError("feature sources do not intersect: " + std::to_string(behavior_persons.size()) +
                    " persons with retained behavior weeks, " + std::to_string(structure_persons.size()) +
                    " with structure metrics, " + std::to_string(surveys.size()) + " survey rows (" +
                    std::to_string(ex.missing_label) + " person-weeks lacking a '" + std::string(to_string(target)) +
                    "' label)");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Standardization (fit on training rows only)
// ---------------------------------------------------------------------------

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // population std; 0 marks a constant column

  /// `x` is row-major with `cols` columns.
  static Standardizer fit(std::span<const double> x, std::size_t cols) {
    Standardizer s;
    s.mean.assign(cols, 0.0);
    s.scale.assign(cols, 0.0);
    const std::size_t n = cols == 0 ? 0 : x.size() / cols;
    if (n == 0) return s;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < cols; ++c) s.mean[c] += x[i * cols + c];
    }
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = x[i * cols + c] - s.mean[c];
        s.scale[c] += d * d;
      }
    }
    for (auto& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-12) v = 0.0;
    }
    return s;
  }

  /// Constant columns map to 0.
  void transform(std::span<double> x) const {
    const std::size_t cols = mean.size();
    if (cols == 0) return;
    for (std::size_t i = 0; i < x.size() / cols; ++i) {
      for (std::size_t c = 0; c < cols; ++c) {
        double& v = x[i * cols + c];
        v = scale[c] == 0.0 ? 0.0 : (v - mean[c]) / scale[c];
      }
    }
  }
};

}  // namespace netcare
