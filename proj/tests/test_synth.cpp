#include <catch_amalgamated.hpp>
#include <filesystem>

#include "netcare/features.hpp"
#include "netcare/synth.hpp"
#include "oracles.hpp"

using namespace netcare;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.n_participants = 10;
  c.n_outsiders = 5;
  c.n_weeks = 3;
  c.seed = seed;
  c.label_signal = LabelSignal::structural;
  return c;
}

}  // namespace

TEST_CASE("generator output depends only on the config", "[synth]") {
  const SynthGenerator a(small(3)), b(small(3)), c(small(4));
  CHECK(a.events() == b.events());
  CHECK(a.surveys() == b.surveys());
  CHECK(a.minutes(2, 1) == b.minutes(2, 1));
  CHECK(a.ground_truth() == b.ground_truth());
  CHECK_FALSE(a.events() == c.events());
  CHECK(a.weeks().size() == 3);
  CHECK(a.roster().size() == 10);
}

TEST_CASE("unreachable coupling strength is rejected", "[synth]") {
  auto c = small(1);
  c.coupling_rho = 0.99;
  CHECK(c.achievable_rho() < 0.99);
  CHECK_THROWS_AS(SynthGenerator(c), ConfigError);
  c.coupling_rho = 0.5;
  c.n_weeks = 2;
  CHECK_THROWS_AS(SynthGenerator(c), ConfigError);
}

TEST_CASE("coupled persons' weekly activity tracks the latent at the configured strength", "[synth]") {
  for (double rho : {0.0, 0.6, 0.9}) {
    SynthConfig c;
    c.n_participants = 6;
    c.n_outsiders = 0;
    c.n_weeks = 100;
    c.coupling_rho = rho;
    c.coupled_fraction = 1.0;
    c.seed = 5;
    const SynthGenerator g(c);
    double sum = 0;
    for (std::size_t p = 0; p < 6; ++p) {
      std::vector<double> lat, act;
      for (std::size_t w = 0; w < g.weeks().size(); ++w) {
        const auto recs = g.minutes(p, w);
        const auto f = behavior_features(recs, g.weeks()[w]);
        lat.push_back(g.latent(p, w));
        act.push_back(f.state_minutes_mean[1] + f.state_minutes_mean[2] + f.state_minutes_mean[3]);
      }
      sum += oracle::pearson(lat, act);
    }
    CAPTURE(rho);
    CHECK(std::fabs(sum / 6 - rho) <= 0.1);
  }
}

TEST_CASE("written files parse back to the generated data", "[synth]") {
  const auto dir = std::filesystem::temp_directory_path() / "netcare_synth_test";
  std::filesystem::remove_all(dir);
  const SynthGenerator g(small(9));
  g.write(dir);
  const auto comm = parse_comm_file((dir / "comm.csv").string());
  CHECK(comm.stats.rejected == 0);
  CHECK(comm.records.size() == g.events().size());
  const auto survey = parse_survey_file((dir / "survey.csv").string());
  CHECK(survey.records == g.surveys());
  const auto wear = parse_wearable_file((dir / "wearable.csv").string());
  CHECK(wear.stats.rejected == 0);
  CHECK(wear.records.size() == 10u * 3u * 7u * 1440u);
  CHECK(wear.records[5] == g.minutes(0, 0)[5]);
  CHECK(std::filesystem::exists(dir / "ground_truth.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("structural labels follow sociability rank without noise", "[synth]") {
  auto c = small(2);
  c.n_participants = 40;
  c.label_noise = 0.0;
  const SynthGenerator g(c);
  std::vector<std::pair<double, int>> v;
  for (std::size_t i = 0; i < g.persons().size(); ++i) v.emplace_back(g.persons()[i].sociability, *g.surveys()[i].stress);
  std::sort(v.begin(), v.end());
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i].second >= v[i - 1].second);
  CHECK(v.front().second == 1);
  CHECK(v.back().second == 4);
}
