#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <catch_amalgamated.hpp>
#include <random>

#include "netcare/stats.hpp"
#include "oracles.hpp"

using namespace netcare;

namespace {

WeeklySeries series(std::initializer_list<double> v) {
  WeeklySeries s;
  for (double x : v) s.emplace_back(x);
  return s;
}

}  // namespace

TEST_CASE("distribution tails match Boost.Math", "[stats]") {
  for (double df : {1.0, 2.5, 7.0, 30.0, 200.0}) {
    for (double t : {0.0, 0.3, 1.7, 4.2}) {
      const boost::math::students_t d(df);
      CHECK(dist::student_t_two_sided(t, df) == Catch::Approx(2 * boost::math::cdf(boost::math::complement(d, t))).margin(1e-12));
      CHECK(dist::student_t_two_sided(-t, df) == Catch::Approx(dist::student_t_two_sided(t, df)));
    }
  }
  for (auto [d1, d2] : {std::pair{1.0, 5.0}, {3.0, 40.0}, {9.0, 2.0}}) {
    const boost::math::fisher_f d(d1, d2);
    for (double f : {0.2, 1.0, 3.5, 12.0}) {
      CHECK(dist::f_upper_tail(f, d1, d2) == Catch::Approx(boost::math::cdf(boost::math::complement(d, f))).margin(1e-12));
    }
  }
}

TEST_CASE("ncc equals Pearson on the overlap", "[stats]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    WeeklySeries x(15), y(15);
    std::vector<double> xs, ys;
    for (std::size_t t = 0; t < 15; ++t) {
      x[t] = g(rng);
      y[t] = 0.5 * *x[t] + g(rng);
      if (t % 4 == 1) x[t].reset();
      if (t % 5 == 2) y[t].reset();
      if (x[t] && y[t]) {
        xs.push_back(*x[t]);
        ys.push_back(*y[t]);
      }
    }
    CHECK(*ncc(x, y) == Catch::Approx(oracle::pearson(xs, ys)).margin(1e-12));
  }
}

TEST_CASE("ncc is undefined for short or constant overlaps", "[stats]") {
  CHECK_FALSE(ncc(series({1, 2}), series({3, 4})));
  CHECK_FALSE(ncc(series({1, 1, 1, 1}), series({1, 2, 3, 4})));
  CHECK_FALSE(ncc(series({1e6, 1e6, 1e6}), series({1, 2, 3})));
  CHECK(*ncc(series({1, 2, 3}), series({2, 4, 6})) == Catch::Approx(1.0));
  CHECK(*ncc(series({1, 2, 3}), series({3, 2, 1})) == Catch::Approx(-1.0));
  CHECK(*ncc(series({1, 2, 3, 4}), series({0, 1, 2, 3}), 1) == Catch::Approx(1.0));
}

TEST_CASE("Welch t-test matches the textbook formula and Boost p-values", "[stats]") {
  const std::vector<double> a{19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0};
  const std::vector<double> b{28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9};
  const auto r = welch_t_test(a, b);
  double ma = 0, mb = 0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= a.size();
  mb /= b.size();
  double va = 0, vb = 0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= a.size() - 1.0;
  vb /= b.size() - 1.0;
  const double qa = va / a.size(), qb = vb / b.size();
  const double t = (ma - mb) / std::sqrt(qa + qb);
  const double df = (qa + qb) * (qa + qb) / (qa * qa / (a.size() - 1.0) + qb * qb / (b.size() - 1.0));
  const boost::math::students_t dist_t(df);
  CHECK(r.statistic == Catch::Approx(t).epsilon(1e-12));
  CHECK(r.df1 == Catch::Approx(df).epsilon(1e-12));
  CHECK(r.p_value == Catch::Approx(2 * boost::math::cdf(boost::math::complement(dist_t, std::fabs(t)))).margin(1e-10));
  CHECK(r.p_value < 0.05);

  const std::vector<double> c{1, 1, 1};
  const std::vector<double> d{2, 2};
  const auto deg = welch_t_test(c, d);
  CHECK(deg.degenerate);
  CHECK(deg.p_value == 0.0);
  CHECK(welch_t_test(c, c).p_value == 1.0);
  CHECK_FALSE(welch_t_test(std::vector<double>{1}, d).defined);
}

TEST_CASE("two-group ANOVA F equals the pooled t squared", "[stats]") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> groups(2);
    for (int i = 0; i < 6 + trial; ++i) groups[0].push_back(g(rng));
    for (int i = 0; i < 4 + trial % 5; ++i) groups[1].push_back(g(rng) + 0.5);
    const auto f = one_way_anova(groups);
    const auto& x = groups[0];
    const auto& y = groups[1];
    const double nx = x.size(), ny = y.size();
    double mx = 0, my = 0;
    for (double v : x) mx += v;
    for (double v : y) my += v;
    mx /= nx;
    my /= ny;
    double ss = 0;
    for (double v : x) ss += (v - mx) * (v - mx);
    for (double v : y) ss += (v - my) * (v - my);
    const double sp2 = ss / (nx + ny - 2);
    const double t = (mx - my) / std::sqrt(sp2 * (1 / nx + 1 / ny));
    CHECK(f.statistic == Catch::Approx(t * t).epsilon(1e-12));
    CHECK(f.df1 == 1.0);
    CHECK(f.df2 == nx + ny - 2);
  }
}

TEST_CASE("ANOVA edge cases", "[stats]") {
  const std::vector<std::vector<double>> same{{2, 2}, {2, 2}};
  CHECK(one_way_anova(same).p_value == 1.0);
  const std::vector<std::vector<double>> apart{{1, 1}, {2, 2}};
  CHECK(one_way_anova(apart).degenerate);
  const std::vector<std::vector<double>> tiny{{1, 2}, {3}};
  CHECK_FALSE(one_way_anova(tiny).defined);
}

TEST_CASE("Bonferroni divides alpha by the family size", "[stats]") {
  TestResult r;
  r.p_value = 0.001;
  apply_bonferroni(r, 0.05, 60);
  CHECK_FALSE(r.significant_after_correction);
  r.p_value = 0.05 / 60;
  apply_bonferroni(r, 0.05, 60);
  CHECK(r.significant_after_correction);
  apply_bonferroni(r, 0.05, 1);
  CHECK(r.significant_after_correction);
}

TEST_CASE("median split is invariant to increasing transforms", "[stats]") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> beh, str, str_exp, str_cube;
  for (int i = 0; i < 41; ++i) {
    str.push_back(g(rng));
    beh.push_back(str.back() + g(rng));
    str_exp.push_back(std::exp(str.back()));
    str_cube.push_back(5 * str.back() * str.back() * str.back() + 2);
  }
  str[3] = str[4];  // ties at arbitrary positions
  str_exp[3] = str_exp[4];
  str_cube[3] = str_cube[4];
  const auto base = split_and_test(beh, str);
  CHECK(split_and_test(beh, str_exp).statistic == base.statistic);
  CHECK(split_and_test(beh, str_cube).statistic == base.statistic);
  CHECK(base.family_size == 60);
  CHECK_FALSE(split_and_test(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}).defined);
}

TEST_CASE("census counts are monotone in the threshold", "[stats]") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<PersonPanel> panel(40);
  for (auto& p : panel) {
    for (auto& s : p.structure) {
      s.resize(10);
      for (auto& v : s) v = g(rng);
    }
    for (auto& s : p.behavior) {
      s.resize(10);
      for (auto& v : s) v = g(rng);
    }
  }
  panel[0].behavior.fill(WeeklySeries(10));
  const auto per_person = person_correlations(panel);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double th : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto c = person_census(std::span<const CorrelationTable>(per_person), th);
    CHECK(c.uncorrelatable == 1);
    std::size_t total = 0;
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
      total += c.either_any[b];
      CHECK(c.either_any[b] <= c.participant_any[b] + c.whole_any[b]);
      CHECK(c.either_any[b] >= std::max(c.participant_any[b], c.whole_any[b]));
    }
    CHECK(total <= prev);
    prev = total;
  }
}

TEST_CASE("population table aggregates per week before correlating", "[stats]") {
  std::vector<PersonPanel> panel(2);
  for (std::size_t i = 0; i < 2; ++i) {
    for (auto& s : panel[i].structure) s = series({1.0 + i, 2.0 + i, 3.0 + i, 4.0 + i});
    for (auto& s : panel[i].behavior) s = series({10, 20, 30, 45});
  }
  panel[1].behavior[1][3].reset();
  const auto pop = population_table(panel, 4);
  CHECK(pop.structure[0][0] == 1.5);
  CHECK(pop.behavior[1][3] == 45.0);
  CHECK(*pop.table.r[0][0] > 0.99);
  CHECK(pop.at_least_07 == 60);
  const auto med = population_table(panel, 4, Aggregator::median);
  CHECK(med.structure[0][0] == 1.5);
}
