#pragma once

// Parsing of communication logs, minute-level wearable logs and wellness
// surveys; study windowing into one-week slices; wear-compliance filtering.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "netcare/core.hpp"

namespace netcare {

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

enum class CommKind : std::uint8_t { call, text };

struct CommEvent {
  Timestamp timestamp = 0;
  PersonId src;
  PersonId dst;
  CommKind kind = CommKind::text;
  std::int64_t duration_s = 0;  // calls only
  bool answered = true;         // calls only; texts are always "answered"

  friend bool operator==(const CommEvent&, const CommEvent&) = default;
};

enum class ActivityState : std::uint8_t { sedentary, lightly_active, fairly_active, very_active };
enum class HrZone : std::uint8_t { out_of_range, fat_burn, cardio, peak };

inline constexpr std::array<std::string_view, 4> kActivityStateNames = {"sedentary", "lightly_active", "fairly_active",
                                                                        "very_active"};
inline constexpr std::array<std::string_view, 4> kHrZoneNames = {"out_of_range", "fat_burn", "cardio", "peak"};

inline constexpr double kMinHeartRate = 20.0;
inline constexpr double kMaxHeartRate = 250.0;

struct MinuteRecord {
  PersonId person;
  Timestamp timestamp = 0;  // minute-aligned
  std::optional<double> heart_rate;
  std::int64_t steps = 0;
  std::optional<ActivityState> activity_state;
  std::optional<HrZone> hr_zone;

  friend bool operator==(const MinuteRecord&, const MinuteRecord&) = default;
};

enum class Gender : std::uint8_t { male, female };

/// Survey questions that can serve as the prediction target.
enum class WellnessTarget : std::uint8_t { stress, happiness, positive_attitude, self_health };

inline constexpr std::array<std::string_view, 4> kWellnessTargetNames = {"stress", "happiness", "positive_attitude",
                                                                         "self_health"};

/// Number of answer levels per question (positive attitude uses a 5-level scale).
constexpr int level_count(WellnessTarget t) { return t == WellnessTarget::positive_attitude ? 5 : 4; }

inline std::string_view to_string(WellnessTarget t) { return kWellnessTargetNames[static_cast<int>(t)]; }

inline WellnessTarget parse_wellness_target(std::string_view s) {
  for (std::size_t i = 0; i < kWellnessTargetNames.size(); ++i) {
    if (kWellnessTargetNames[i] == s) return static_cast<WellnessTarget>(i);
  }
  throw ConfigError("unknown wellness target '" + std::string(s) + "'");
}

struct SurveyRecord {
  PersonId person;
  Gender gender = Gender::male;
  std::optional<int> stress;
  std::optional<int> happiness;
  std::optional<int> positive_attitude;
  std::optional<int> self_health;

  std::optional<int> level(WellnessTarget t) const {
    switch (t) {
      case WellnessTarget::stress: return stress;
      case WellnessTarget::happiness: return happiness;
      case WellnessTarget::positive_attitude: return positive_attitude;
      case WellnessTarget::self_health: return self_health;
    }
    return std::nullopt;
  }

  friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

// ---------------------------------------------------------------------------
// Schemas: logical field -> header column name
// ---------------------------------------------------------------------------

struct CommSchema {
  std::string timestamp = "timestamp";
  std::string src = "src";
  std::string dst = "dst";
  std::string kind = "kind";
  std::string duration = "duration_s";
  std::string answered = "answered";
  char delimiter = ',';
};

struct WearableSchema {
  std::string person = "person";
  std::string timestamp = "timestamp";
  std::string heart_rate = "heart_rate";
  std::string steps = "steps";
  std::string activity_state = "activity_state";
  std::string hr_zone = "hr_zone";
  char delimiter = ',';
};

struct SurveySchema {
  std::string person = "person";
  std::string gender = "gender";
  std::string stress = "stress";
  std::string happiness = "happiness";
  std::string positive_attitude = "positive_attitude";
  std::string self_health = "self_health";
  char delimiter = ',';
};

struct ParseOptions {
  /// Rejected rows above this fraction of all data rows abort the parse.
  double max_malformed_fraction = 0.01;
};

/// Row accounting for one parsed file. accepted + rejected + deduplicated == total_rows.
struct ParseStats {
  std::size_t total_rows = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t deduplicated = 0;
  std::optional<std::size_t> first_bad_line;
  std::vector<std::string> messages;  // first few rejection reasons
};

template <class Record>
struct Parsed {
  std::vector<Record> records;
  ParseStats stats;
};

namespace detail {

struct RowReject {
  std::string reason;
};

/// Drives a header + rows delimited parse. `on_row` returns a record or a RowReject.
template <class Record, class RowFn>
Parsed<Record> parse_rows(std::istream& in, char delim, std::span<const std::string> columns, const ParseOptions& opts,
                          RowFn&& on_row) {
  if (!in.good()) throw IoError("input stream is not readable");
  Parsed<Record> out;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> index(columns.size());

  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto header = split_fields(line, delim);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto it = std::find(header.begin(), header.end(), std::string_view(columns[c]));
      if (it == header.end()) throw SchemaError("missing column '" + columns[c] + "'", line_no);
      index[c] = static_cast<std::size_t>(it - header.begin());
    }
    have_header = true;
    break;
  }
  if (in.bad()) throw IoError("read failure");
  if (!have_header) return out;  // empty file

  std::vector<std::string_view> picked(columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++out.stats.total_rows;
    const auto fields = split_fields(line, delim);
    std::variant<Record, RowReject> result = RowReject{"wrong field count"};
    bool ok_shape = true;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (index[c] >= fields.size()) {
        ok_shape = false;
        break;
      }
      picked[c] = fields[index[c]];
    }
    if (ok_shape) result = on_row(std::span<const std::string_view>(picked), line_no);
    if (auto* rec = std::get_if<Record>(&result)) {
      out.records.push_back(std::move(*rec));
      ++out.stats.accepted;
    } else {
      ++out.stats.rejected;
      if (!out.stats.first_bad_line) out.stats.first_bad_line = line_no;
      if (out.stats.messages.size() < 10) {
        out.stats.messages.push_back("line " + std::to_string(line_no) + ": " + std::get<RowReject>(result).reason);
      }
    }
  }
  if (in.bad()) throw IoError("read failure");

  const double budget = opts.max_malformed_fraction * static_cast<double>(out.stats.total_rows);
  if (out.stats.rejected > 0 && static_cast<double>(out.stats.rejected) > budget) {
    throw SchemaError(std::to_string(out.stats.rejected) + " of " + std::to_string(out.stats.total_rows) +
                          " rows malformed; first: " + out.stats.messages.front(),
                      *out.stats.first_bad_line);
  }
  return out;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "1" || s == "true" || s == "True" || s == "TRUE" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "False" || s == "FALSE" || s == "no") return false;
  return std::nullopt;
}

template <std::size_t N>
std::optional<std::size_t> lookup_name(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return i;
  }
  return std::nullopt;
}

inline std::optional<int> parse_level(std::string_view s, int max_level, bool& bad) {
  if (s.empty()) return std::nullopt;
  auto v = parse_number<int>(s);
  if (!v || *v < 1 || *v > max_level) {
    bad = true;
    return std::nullopt;
  }
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

/// Communication log: one call or text per row. Output is sorted by timestamp (stable).
inline Parsed<CommEvent> parse_comm_log(std::istream& in, const CommSchema& schema = {},
                                        const ParseOptions& opts = {}) {
  const std::array<std::string, 6> cols = {schema.timestamp, schema.src, schema.dst,
                                           schema.kind,      schema.duration, schema.answered};
  using Row = std::variant<CommEvent, detail::RowReject>;
  auto parsed = detail::parse_rows<CommEvent>(in, schema.delimiter, cols, opts, [&](auto f, std::size_t) -> Row {
    CommEvent ev;
    auto ts = parse_number<std::int64_t>(f[0]);
    if (!ts) return detail::RowReject{"bad timestamp"};
    ev.timestamp = *ts;
    if (f[1].empty() || f[2].empty()) return detail::RowReject{"empty endpoint"};
    if (f[1] == f[2]) return detail::RowReject{"self-loop (src == dst)"};
    ev.src = PersonId(std::string(f[1]));
    ev.dst = PersonId(std::string(f[2]));
    if (f[3] == "call") {
      ev.kind = CommKind::call;
      auto dur = f[4].empty() ? std::optional<std::int64_t>(0) : parse_number<std::int64_t>(f[4]);
      if (!dur || *dur < 0) return detail::RowReject{"bad duration"};
      ev.duration_s = *dur;
      auto ans = detail::parse_bool(f[5]);
      if (!ans) return detail::RowReject{"bad answered flag"};
      ev.answered = *ans;
    } else if (f[3] == "text") {
      ev.kind = CommKind::text;
      ev.duration_s = 0;
      ev.answered = true;
    } else {
      return detail::RowReject{"unknown kind '" + std::string(f[3]) + "'"};
    }
    return ev;
  });
  std::stable_sort(parsed.records.begin(), parsed.records.end(),
                   [](const CommEvent& a, const CommEvent& b) { return a.timestamp < b.timestamp; });
  return parsed;
}

/// Minute-level wearable log. Duplicate (person, minute) rows keep the last occurrence.
/// Output is sorted by (person, timestamp).
inline Parsed<MinuteRecord> parse_wearable_log(std::istream& in, const WearableSchema& schema = {},
                                               const ParseOptions& opts = {}) {
  const std::array<std::string, 6> cols = {schema.person, schema.timestamp, schema.heart_rate,
                                           schema.steps,  schema.activity_state, schema.hr_zone};
  using Row = std::variant<MinuteRecord, detail::RowReject>;
  auto parsed = detail::parse_rows<MinuteRecord>(in, schema.delimiter, cols, opts, [&](auto f, std::size_t) -> Row {
    MinuteRecord r;
    if (f[0].empty()) return detail::RowReject{"empty person"};
    r.person = PersonId(std::string(f[0]));
    auto ts = try_parse_datetime(f[1]);
    if (!ts) ts = parse_number<std::int64_t>(f[1]);
    if (!ts) return detail::RowReject{"bad timestamp"};
    if (*ts % 60 != 0) return detail::RowReject{"timestamp not minute-aligned"};
    r.timestamp = *ts;
    if (!f[2].empty()) {
      auto hr = parse_number<double>(f[2]);
      if (!hr) return detail::RowReject{"bad heart rate"};
      if (!(*hr >= kMinHeartRate && *hr <= kMaxHeartRate)) return detail::RowReject{"heart rate out of range"};
      r.heart_rate = *hr;
    }
    if (!f[3].empty()) {
      auto steps = parse_number<std::int64_t>(f[3]);
      if (!steps || *steps < 0) return detail::RowReject{"bad steps"};
      r.steps = *steps;
    }
    if (!f[4].empty()) {
      auto s = detail::lookup_name(kActivityStateNames, f[4]);
      if (!s) return detail::RowReject{"unknown activity state"};
      r.activity_state = static_cast<ActivityState>(*s);
    }
    if (!f[5].empty()) {
      auto z = detail::lookup_name(kHrZoneNames, f[5]);
      if (!z) return detail::RowReject{"unknown heart-rate zone"};
      r.hr_zone = static_cast<HrZone>(*z);
    }
    return r;
  });

  // Stable sort then keep the last row of each (person, minute) run.
  auto& recs = parsed.records;
  std::stable_sort(recs.begin(), recs.end(), [](const MinuteRecord& a, const MinuteRecord& b) {
    if (a.person != b.person) return a.person < b.person;
    return a.timestamp < b.timestamp;
  });
  std::vector<MinuteRecord> unique;
  unique.reserve(recs.size());
  for (auto& r : recs) {
    if (!unique.empty() && unique.back().person == r.person && unique.back().timestamp == r.timestamp) {
      unique.back() = std::move(r);
      ++parsed.stats.deduplicated;
      --parsed.stats.accepted;
    } else {
      unique.push_back(std::move(r));
    }
  }
  recs = std::move(unique);
  return parsed;
}

/// One row per participant. Duplicate ids are a schema error; out-of-range levels reject the row.
inline Parsed<SurveyRecord> parse_survey(std::istream& in, const SurveySchema& schema = {},
                                         const ParseOptions& opts = {}) {
  const std::array<std::string, 6> cols = {schema.person, schema.gender,           schema.stress,
                                           schema.happiness, schema.positive_attitude, schema.self_health};
  using Row = std::variant<SurveyRecord, detail::RowReject>;
  std::set<PersonId> seen;
  auto parsed = detail::parse_rows<SurveyRecord>(in, schema.delimiter, cols, opts, [&](auto f, std::size_t line) -> Row {
    SurveyRecord s;
    if (f[0].empty()) return detail::RowReject{"empty person"};
    s.person = PersonId(std::string(f[0]));
    if (!seen.insert(s.person).second) throw SchemaError("duplicate survey participant '" + s.person.value + "'", line);
    if (f[1] == "male" || f[1] == "m" || f[1] == "M") {
      s.gender = Gender::male;
    } else if (f[1] == "female" || f[1] == "f" || f[1] == "F") {
      s.gender = Gender::female;
    } else {
      return detail::RowReject{"missing or unknown gender"};
    }
    bool bad = false;
    s.stress = detail::parse_level(f[2], level_count(WellnessTarget::stress), bad);
    s.happiness = detail::parse_level(f[3], level_count(WellnessTarget::happiness), bad);
    s.positive_attitude = detail::parse_level(f[4], level_count(WellnessTarget::positive_attitude), bad);
    s.self_health = detail::parse_level(f[5], level_count(WellnessTarget::self_health), bad);
    if (bad) return detail::RowReject{"level out of range"};
    return s;
  });
  std::sort(parsed.records.begin(), parsed.records.end(),
            [](const SurveyRecord& a, const SurveyRecord& b) { return a.person < b.person; });
  return parsed;
}

// File-path conveniences; an unreadable path is an I/O error.
inline Parsed<CommEvent> parse_comm_file(const std::string& path, const CommSchema& schema = {},
                                         const ParseOptions& opts = {}) {
  auto in = detail::open_input(path);
  return parse_comm_log(in, schema, opts);
}
inline Parsed<MinuteRecord> parse_wearable_file(const std::string& path, const WearableSchema& schema = {},
                                                const ParseOptions& opts = {}) {
  auto in = detail::open_input(path);
  return parse_wearable_log(in, schema, opts);
}
inline Parsed<SurveyRecord> parse_survey_file(const std::string& path, const SurveySchema& schema = {},
                                              const ParseOptions& opts = {}) {
  auto in = detail::open_input(path);
  return parse_survey(in, schema, opts);
}

// ---------------------------------------------------------------------------
// Writers (canonical form, readable by the parsers above)
// ---------------------------------------------------------------------------

inline void write_comm_log(std::ostream& out, std::span<const CommEvent> events, const CommSchema& s = {}) {
  const char d = s.delimiter;
  out << s.timestamp << d << s.src << d << s.dst << d << s.kind << d << s.duration << d << s.answered << '\n';
  for (const auto& e : events) {
    out << e.timestamp << d << e.src << d << e.dst << d << (e.kind == CommKind::call ? "call" : "text") << d
        << e.duration_s << d << (e.answered ? 1 : 0) << '\n';
  }
}

inline void write_minute_row(std::ostream& out, const MinuteRecord& r, char d) {
  out << r.person << d << format_minute(r.timestamp) << d;
  if (r.heart_rate) out << format_double(*r.heart_rate);
  out << d << r.steps << d;
  if (r.activity_state) out << kActivityStateNames[static_cast<int>(*r.activity_state)];
  out << d;
  if (r.hr_zone) out << kHrZoneNames[static_cast<int>(*r.hr_zone)];
  out << '\n';
}

inline void write_wearable_header(std::ostream& out, const WearableSchema& s = {}) {
  const char d = s.delimiter;
  out << s.person << d << s.timestamp << d << s.heart_rate << d << s.steps << d << s.activity_state << d
      << s.hr_zone << '\n';
}

inline void write_wearable_log(std::ostream& out, std::span<const MinuteRecord> records, const WearableSchema& s = {}) {
  write_wearable_header(out, s);
  for (const auto& r : records) write_minute_row(out, r, s.delimiter);
}

inline void write_survey(std::ostream& out, std::span<const SurveyRecord> records, const SurveySchema& s = {}) {
  const char d = s.delimiter;
  out << s.person << d << s.gender << d << s.stress << d << s.happiness << d << s.positive_attitude << d
      << s.self_health << '\n';
  auto lvl = [&](const std::optional<int>& v) {
    if (v) out << *v;
  };
  for (const auto& r : records) {
    out << r.person << d << (r.gender == Gender::female ? "female" : "male") << d;
    lvl(r.stress);
    out << d;
    lvl(r.happiness);
    out << d;
    lvl(r.positive_attitude);
    out << d;
    lvl(r.self_health);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Weekly windowing
// ---------------------------------------------------------------------------

struct WeekIndex {
  int index = 0;
  Date start;
  Date end;  // exclusive

  Timestamp start_ts() const { return to_timestamp(start); }
  Timestamp end_ts() const { return to_timestamp(end); }
  bool contains(Timestamp t) const { return t >= start_ts() && t < end_ts(); }

  friend bool operator==(const WeekIndex&, const WeekIndex&) = default;
};

/// Consecutive 7-day windows from `study_start`; a trailing partial week is dropped.
inline std::vector<WeekIndex> make_weeks(Date study_start, Date study_end, Diagnostics* diag = nullptr) {
  if (study_end <= study_start) throw ConfigError("study_end must be after study_start");
  const auto days = (study_end - study_start).count();
  const auto n = days / 7;
  if (n == 0) {
    warn_to(diag, "study range of " + std::to_string(days) + " days is shorter than one week; no windows");
    return {};
  }
  std::vector<WeekIndex> weeks;
  weeks.reserve(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    const Date s = study_start + std::chrono::days{7 * w};
    weeks.push_back({w, s, s + std::chrono::days{7}});
  }
  return weeks;
}

/// Index of the window containing `t`, or nullopt when out of range.
inline std::optional<std::size_t> week_of(Timestamp t, std::span<const WeekIndex> weeks) {
  if (weeks.empty()) return std::nullopt;
  const Timestamp begin = weeks.front().start_ts();
  if (t < begin || t >= weeks.back().end_ts()) return std::nullopt;
  return static_cast<std::size_t>((t - begin) / (7 * kSecondsPerDay));
}

// ---------------------------------------------------------------------------
// Compliance
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kMinutesPerWeek = 7 * kMinutesPerDay;

/// Minimum number of valid minutes in a week for retention at `threshold`.
inline std::int64_t required_week_minutes(double threshold) {
  return static_cast<std::int64_t>(std::ceil(threshold * static_cast<double>(kMinutesPerWeek) - 1e-6));
}

inline void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("compliance threshold must lie in (0, 1]");
}

/// Wear compliance of one person-week, computed from that week's records.
struct WeekCompliance {
  std::array<std::int64_t, 7> valid_minutes{};  // per day, minutes with a heart rate
  std::int64_t total_valid = 0;

  double day_fraction(int d) const { return static_cast<double>(valid_minutes[d]) / kMinutesPerDay; }
  double week_fraction() const { return static_cast<double>(total_valid) / kMinutesPerWeek; }
  bool retained(double threshold) const { return total_valid >= required_week_minutes(threshold); }
};

/// `records` belong to one person; entries outside `week` are ignored.
inline WeekCompliance week_compliance(std::span<const MinuteRecord> records, const WeekIndex& week) {
  WeekCompliance c;
  const Timestamp begin = week.start_ts();
  for (const auto& r : records) {
    if (!r.heart_rate || !week.contains(r.timestamp)) continue;
    const auto day = (r.timestamp - begin) / kSecondsPerDay;
    ++c.valid_minutes[static_cast<std::size_t>(day)];
    ++c.total_valid;
  }
  return c;
}

struct PersonCompliance {
  std::vector<double> day_fraction;   // 7 entries per week, in week order
  std::vector<double> week_fraction;  // one per week
  std::vector<bool> retained;         // one per week
};

struct ComplianceMask {
  std::vector<WeekIndex> weeks;
  double threshold = 0.8;
  std::map<PersonId, PersonCompliance> persons;

  bool retained(const PersonId& p, std::size_t week) const {
    auto it = persons.find(p);
    return it != persons.end() && week < it->second.retained.size() && it->second.retained[week];
  }

  std::size_t retained_count() const {
    std::size_t n = 0;
    for (const auto& [_, pc] : persons) n += static_cast<std::size_t>(std::count(pc.retained.begin(), pc.retained.end(), true));
    return n;
  }

  /// Adds one person-week result; weeks are filled in order of arrival per person.
  void record(const PersonId& p, std::size_t week, const WeekCompliance& wc) {
    auto& pc = persons[p];
    const std::size_t n = weeks.size();
    if (pc.retained.size() != n) {
      pc.day_fraction.assign(7 * n, 0.0);
      pc.week_fraction.assign(n, 0.0);
      pc.retained.assign(n, false);
    }
    for (int d = 0; d < 7; ++d) pc.day_fraction[7 * week + static_cast<std::size_t>(d)] = wc.day_fraction(d);
    pc.week_fraction[week] = wc.week_fraction();
    pc.retained[week] = wc.retained(threshold);
  }
};

/// Visits each (person, week) group of records. `records` must be sorted by (person, timestamp),
/// as produced by parse_wearable_log. Persons are visited for every week, empty weeks included.
template <class Visitor>
void for_each_person_week(std::span<const MinuteRecord> records, std::span<const WeekIndex> weeks, Visitor&& visit) {
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].person == records[i].person) ++j;
    const auto person_records = records.subspan(i, j - i);
    std::size_t k = 0;
    for (std::size_t w = 0; w < weeks.size(); ++w) {
      const Timestamp begin = weeks[w].start_ts();
      const Timestamp end = weeks[w].end_ts();
      while (k < person_records.size() && person_records[k].timestamp < begin) ++k;
      std::size_t m = k;
      while (m < person_records.size() && person_records[m].timestamp < end) ++m;
      visit(records[i].person, w, person_records.subspan(k, m - k));
      k = m;
    }
    i = j;
  }
}

/// Day compliance = heart-rate-present minutes / 1440; a week is retained iff the mean of its
/// seven day compliances reaches `threshold` (inclusive). Missing days count as zero.
inline ComplianceMask compliance_filter(std::span<const MinuteRecord> records, std::span<const WeekIndex> weeks,
                                        double threshold = 0.8) {
  check_threshold(threshold);
  ComplianceMask mask;
  mask.weeks.assign(weeks.begin(), weeks.end());
  mask.threshold = threshold;
  for_each_person_week(records, weeks, [&](const PersonId& p, std::size_t w, std::span<const MinuteRecord> recs) {
    mask.record(p, w, week_compliance(recs, weeks[w]));
  });
  return mask;
}

}  // namespace netcare
