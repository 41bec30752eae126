#include <catch_amalgamated.hpp>

#include "netcare/report.hpp"

using namespace netcare;

TEST_CASE("type-7 quantiles", "[report]") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 0.25) == Catch::Approx(1.75));
  CHECK(quantile_sorted(v, 0.5) == Catch::Approx(2.5));
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  const std::vector<double> one{7};
  CHECK(quantile_sorted(one, 0.75) == 7.0);
  CHECK_THROWS_AS(quantile_sorted(std::vector<double>{}, 0.5), DataError);
}

TEST_CASE("week summary orders its statistics", "[report]") {
  const auto b = summarize_week(3, {5, 1, 4, 2, 3});
  CHECK(b.week == 3);
  CHECK(b.n == 5);
  CHECK(b.min == 1);
  CHECK(b.q1 == 2);
  CHECK(b.median == 3);
  CHECK(b.mean == 3);
  CHECK(b.q3 == 4);
  CHECK(b.max == 5);
}

TEST_CASE("box-plot series skip weeks without values", "[report]") {
  std::vector<PersonPanel> panel(2);
  for (auto& p : panel) {
    for (auto& s : p.structure) s.assign(2, std::nullopt);
    for (auto& s : p.behavior) s.assign(2, std::nullopt);
  }
  panel[0].behavior[1][0] = 100.0;
  panel[1].behavior[1][0] = 300.0;
  panel[1].structure[0][1] = 2.0;
  const auto weeks = make_weeks(parse_date("2016-08-29"), parse_date("2016-09-12"));
  const auto s = boxplot_series(panel, weeks);
  REQUIRE(s.size() == 16);
  CHECK(s[1].feature == "steps");
  REQUIRE(s[1].weeks.size() == 1);
  CHECK(s[1].weeks[0].median == 200.0);
  CHECK(s[6].feature == "participant_degree");
  REQUIRE(s[6].weeks.size() == 1);
  CHECK(s[6].weeks[0].week == 1);
  CHECK(s[0].weeks.empty());
  const auto text = render_boxplots(s);
  CHECK(text.rfind("feature,week,n,min,q1,median,mean,q3,max\n", 0) == 0);
  CHECK(text.find("steps,0,2,100.0000,150.0000,200.0000,200.0000,250.0000,300.0000\n") != std::string::npos);
}

TEST_CASE("improvement percent rounds and guards a zero baseline", "[report]") {
  CHECK(improvement_percent(0.42, 0.58) == 38);
  CHECK(improvement_percent(0.5, 0.25) == -50);
  CHECK(improvement_percent(0.5, 0.498) == 0);
  CHECK(improvement_percent(0.18, 0.46) == 156);
  CHECK_FALSE(improvement_percent(0.0, 0.3));
  CHECK(format_improvement(std::nullopt) == "n/a");
  CHECK(format_improvement(155) == "155%");
}

TEST_CASE("prediction table renders rows and an improvement row", "[report]") {
  PredictionTable t;
  t.target = "stress";
  t.levels = 2;
  t.rows.push_back({"gender+behavior", 0.42, {0.18, std::nullopt}});
  t.rows.push_back({"structure", 0.34, {0.05, 0.43}});
  t.rows.push_back({"gender+behavior+structure", 0.58, {0.46, 0.63}});
  const auto text = render_prediction_table(t);
  CHECK(text ==
        "features,F1,Level1,Level2\n"
        "gender+behavior,0.420,0.180,NA\n"
        "structure,0.340,0.050,0.430\n"
        "gender+behavior+structure,0.580,0.460,0.630\n"
        "improvement,38%,156%,n/a\n");
}

TEST_CASE("population and census tables have fixed shapes", "[report]") {
  CorrelationTable t;
  t.r[0][1] = 0.75;
  const auto pop = render_population_table(t);
  CHECK(pop.rfind("structure,heart_rate,steps,sedentary,lightly_active,fairly_active,very_active\n", 0) == 0);
  CHECK(pop.find("participant_degree,NA,0.7500,") != std::string::npos);
  CHECK(std::count(pop.begin(), pop.end(), '\n') == 11);

  CorrelationCensus c;
  c.total_persons = 9;
  c.pair_counts[5][1] = 4;
  c.either_any[1] = 6;
  CHECK(render_census_counts(c).find("whole_degree,0,4,") != std::string::npos);
  const auto summary = render_census_summary(c);
  CHECK(summary.find("steps,0,0,6,9,0\n") != std::string::npos);
}
