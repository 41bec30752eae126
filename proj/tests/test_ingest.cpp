#include <catch_amalgamated.hpp>
#include <sstream>

#include "netcare/ingest.hpp"

using namespace netcare;

namespace {

const Date kStart = parse_date("2016-08-29");
const Timestamp kT0 = to_timestamp(kStart);

MinuteRecord minute(const std::string& p, Timestamp t, std::optional<double> hr, std::int64_t steps = 0) {
  MinuteRecord r;
  r.person = PersonId(p);
  r.timestamp = t;
  r.heart_rate = hr;
  r.steps = steps;
  return r;
}

}  // namespace

TEST_CASE("comm log round-trips through writer and parser", "[ingest]") {
  std::vector<CommEvent> ev;
  ev.push_back({kT0 + 100, PersonId("a"), PersonId("b"), CommKind::call, 65, false});
  ev.push_back({kT0 + 50, PersonId("b"), PersonId("c"), CommKind::text, 0, true});
  std::stringstream ss;
  write_comm_log(ss, ev);
  const auto parsed = parse_comm_log(ss);
  REQUIRE(parsed.records.size() == 2);
  CHECK(parsed.records[0] == ev[1]);
  CHECK(parsed.records[1] == ev[0]);
  CHECK(parsed.stats.accepted == 2);
}

TEST_CASE("comm parser rejects self-loops and unknown kinds within budget", "[ingest]") {
  std::stringstream ss;
  ss << "timestamp,src,dst,kind,duration_s,answered\n";
  for (int i = 0; i < 200; ++i) ss << kT0 + i << ",a,b,text,0,1\n";
  ss << kT0 << ",a,a,text,0,1\n";
  ss << kT0 << ",a,b,fax,0,1\n";
  ParseOptions opts;
  opts.max_malformed_fraction = 0.01;
  const auto p = parse_comm_log(ss, {}, opts);
  CHECK(p.stats.total_rows == 202);
  CHECK(p.stats.rejected == 2);
  CHECK(p.stats.accepted + p.stats.rejected + p.stats.deduplicated == p.stats.total_rows);
  CHECK(p.stats.first_bad_line == 202);
}

TEST_CASE("malformed rows above the budget raise a schema error with the first bad line", "[ingest]") {
  std::stringstream ss;
  ss << "timestamp,src,dst,kind,duration_s,answered\n" << kT0 << ",a,b,text,0,1\nxx,a,b,text,0,1\n";
  try {
    parse_comm_log(ss);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("missing columns are a schema error", "[ingest]") {
  std::stringstream ss("person,timestamp,steps\n");
  CHECK_THROWS_AS(parse_wearable_log(ss), SchemaError);
}

TEST_CASE("custom column names and delimiter", "[ingest]") {
  WearableSchema s;
  s.person = "pid";
  s.heart_rate = "bpm";
  s.delimiter = ';';
  std::stringstream ss;
  ss << "bpm;pid;timestamp;steps;activity_state;hr_zone\n";
  ss << "71;p1;2016-08-29T00:05;3;sedentary;fat_burn\n";
  const auto p = parse_wearable_log(ss, s);
  REQUIRE(p.records.size() == 1);
  CHECK(p.records[0].person == PersonId("p1"));
  CHECK(p.records[0].heart_rate == 71.0);
  CHECK(p.records[0].timestamp == kT0 + 300);
  CHECK(p.records[0].activity_state == ActivityState::sedentary);
  CHECK(p.records[0].hr_zone == HrZone::fat_burn);
}

TEST_CASE("wearable duplicates keep the last row and are counted", "[ingest]") {
  std::stringstream ss;
  ss << "person,timestamp,heart_rate,steps,activity_state,hr_zone\n";
  ss << "p,2016-08-29T00:01,60,1,,\n";
  ss << "p,2016-08-29T00:00,61,2,,\n";
  ss << "p,2016-08-29T00:01,90,5,,\n";
  const auto p = parse_wearable_log(ss);
  REQUIRE(p.records.size() == 2);
  CHECK(p.records[1].heart_rate == 90.0);
  CHECK(p.stats.deduplicated == 1);
  CHECK(p.stats.accepted + p.stats.rejected + p.stats.deduplicated == p.stats.total_rows);
}

TEST_CASE("wearable round trip preserves records", "[ingest]") {
  std::vector<MinuteRecord> recs;
  for (int i = 0; i < 30; ++i) {
    auto r = minute(i % 2 ? "b" : "a", kT0 + 60 * i, i % 3 ? std::optional<double>(60.5 + i) : std::nullopt, i);
    if (i % 4 == 0) r.activity_state = ActivityState::very_active;
    if (i % 5 == 0) r.hr_zone = HrZone::peak;
    recs.push_back(r);
  }
  std::stringstream ss;
  write_wearable_log(ss, recs);
  const auto p = parse_wearable_log(ss);
  auto sorted = recs;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
    return std::tie(x.person, x.timestamp) < std::tie(y.person, y.timestamp);
  });
  CHECK(p.records == sorted);
}

TEST_CASE("wearable rejects out-of-range heart rate and unaligned minutes", "[ingest]") {
  std::stringstream ss;
  ss << "person,timestamp,heart_rate,steps,activity_state,hr_zone\n";
  ss << "p,2016-08-29T00:01,300,1,,\n";
  ss << "p,2016-08-29T00:02:30,60,1,,\n";
  ParseOptions o;
  o.max_malformed_fraction = 1.0;
  const auto p = parse_wearable_log(ss, {}, o);
  CHECK(p.records.empty());
  CHECK(p.stats.rejected == 2);
}

TEST_CASE("survey round trip, level bounds and duplicate ids", "[ingest]") {
  std::vector<SurveyRecord> s(2);
  s[0].person = PersonId("b");
  s[0].gender = Gender::female;
  s[0].stress = 2;
  s[0].positive_attitude = 5;
  s[1].person = PersonId("a");
  s[1].self_health = 4;
  std::stringstream ss;
  write_survey(ss, s);
  const auto p = parse_survey(ss);
  REQUIRE(p.records.size() == 2);
  CHECK(p.records[0] == s[1]);
  CHECK(p.records[1] == s[0]);

  std::stringstream bad("person,gender,stress,happiness,positive_attitude,self_health\nx,male,5,,,\n");
  ParseOptions o;
  o.max_malformed_fraction = 1.0;
  CHECK(parse_survey(bad, {}, o).stats.rejected == 1);

  std::stringstream dup("person,gender,stress,happiness,positive_attitude,self_health\nx,m,1,,,\nx,f,2,,,\n");
  CHECK_THROWS_AS(parse_survey(dup), SchemaError);
}

TEST_CASE("unreadable files are I/O errors", "[ingest]") {
  CHECK_THROWS_AS(parse_comm_file("/nonexistent/comm.csv"), IoError);
}

TEST_CASE("weeks tile the study range and drop a partial tail", "[ingest]") {
  Diagnostics diag;
  const auto w = make_weeks(kStart, kStart + std::chrono::days{17}, &diag);
  REQUIRE(w.size() == 2);
  CHECK(w[1].start == kStart + std::chrono::days{7});
  CHECK(week_of(kT0 - 1, w) == std::nullopt);
  CHECK(week_of(kT0, w) == 0u);
  CHECK(week_of(kT0 + 7 * kSecondsPerDay, w) == 1u);
  CHECK(week_of(kT0 + 14 * kSecondsPerDay, w) == std::nullopt);
  CHECK(make_weeks(kStart, kStart + std::chrono::days{3}, &diag).empty());
  CHECK(diag.warnings.size() == 1);
  CHECK_THROWS_AS(make_weeks(kStart, kStart), ConfigError);
}

TEST_CASE("compliance boundary is inclusive at the threshold", "[ingest]") {
  const auto weeks = make_weeks(kStart, kStart + std::chrono::days{7});
  const std::int64_t need = required_week_minutes(0.8);
  CHECK(need == 8064);
  for (std::int64_t valid : {need - 1, need}) {
    std::vector<MinuteRecord> recs;
    for (std::int64_t m = 0; m < 7 * kMinutesPerDay; ++m) {
      recs.push_back(minute("p", kT0 + 60 * m, m < valid ? std::optional<double>(70) : std::nullopt));
    }
    const auto mask = compliance_filter(recs, weeks, 0.8);
    CHECK(mask.retained(PersonId("p"), 0) == (valid == need));
    const auto& pc = mask.persons.at(PersonId("p"));
    CHECK(pc.day_fraction[0] == 1.0);
    CHECK(pc.week_fraction[0] == Catch::Approx(static_cast<double>(valid) / 10080.0));
  }
  CHECK_THROWS_AS(compliance_filter({}, weeks, 0.0), ConfigError);
}

TEST_CASE("compliance counts missing days as zero and visits empty weeks", "[ingest]") {
  const auto weeks = make_weeks(kStart, kStart + std::chrono::days{14});
  std::vector<MinuteRecord> recs;
  for (std::int64_t m = 0; m < 6 * kMinutesPerDay; ++m) recs.push_back(minute("p", kT0 + 60 * m, 70.0));
  const auto mask = compliance_filter(recs, weeks, 0.8);
  const auto& pc = mask.persons.at(PersonId("p"));
  CHECK(pc.day_fraction[6] == 0.0);
  CHECK(pc.week_fraction[0] == Catch::Approx(6.0 / 7.0));
  CHECK(pc.retained == std::vector<bool>{true, false});
  CHECK(mask.retained_count() == 1);
}
