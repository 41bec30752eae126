#include <catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "netcare/pipeline.hpp"

using namespace netcare;
namespace fs = std::filesystem;

namespace {

Json tiny_config() {
  return Json::parse(R"({
    "seed": 3,
    "output": "out",
    "synth": {"n_participants": 10, "n_outsiders": 4, "n_weeks": 3, "label_signal": "structural"},
    "learn": {
      "targets": ["stress"],
      "split_modes": ["person"],
      "folds": 2,
      "base": ["knn", "cart"],
      "grid": {"knn_k": [3], "cart_min_leaf": [2]},
      "ensemble": {"step": 0.5}
    }
  })");
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("netcare_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_CASE("config rejects unknown keys and wrong types", "[config]") {
  auto doc = tiny_config();
  doc["graph"] = {{"min_frequncy", 3}};
  CHECK_THROWS_WITH(parse_config(doc, "/tmp"), Catch::Matchers::ContainsSubstring("min_frequncy"));
  doc = tiny_config();
  doc["seed"] = "seven";
  CHECK_THROWS_AS(parse_config(doc, "/tmp"), ConfigError);
  doc = tiny_config();
  doc["learn"]["targets"] = {"mood"};
  CHECK_THROWS_AS(parse_config(doc, "/tmp"), ConfigError);
  doc = tiny_config();
  doc.erase("synth");
  CHECK_THROWS_AS(parse_config(doc, "/tmp"), ConfigError);
  doc = tiny_config();
  doc["learn"]["ensemble"]["step"] = 0.3;
  CHECK_THROWS_AS(parse_config(doc, "/tmp"), ConfigError);
}

TEST_CASE("config defaults, synth inputs and overrides", "[config]") {
  const auto cfg = parse_config(tiny_config(), "/base");
  CHECK(cfg.out_dir == fs::path("/base/out"));
  CHECK(cfg.ingest.inputs_from_synth);
  CHECK(cfg.ingest.comm == fs::path("/base/out/synth/comm.csv"));
  CHECK(cfg.ingest.study_start == parse_date("2016-08-29"));
  CHECK(cfg.ingest.study_end == parse_date("2016-09-19"));
  CHECK(cfg.min_frequency == 3);
  CHECK(cfg.learn.experiment.seed == 3);

  ConfigOverrides ov;
  ov.out = "/elsewhere";
  ov.seed = 11;
  ov.threshold = 0.7;
  ov.threads = 4;
  const auto o = parse_config(tiny_config(), "/base", ov);
  CHECK(o.out_dir == fs::path("/elsewhere"));
  CHECK(o.seed == 11);
  CHECK(o.synth->seed == 11);
  CHECK(o.analysis.threshold == 0.7);
  CHECK(o.learn.experiment.threads == 4);
  ov.threshold = 1.5;
  CHECK_THROWS_AS(parse_config(tiny_config(), "/base", ov), ConfigError);
}

TEST_CASE("loading a config reports missing files and bad JSON", "[config]") {
  CHECK_THROWS_AS(load_config("/nonexistent/netcare.json"), IoError);
  const auto dir = scratch("badjson");
  std::ofstream(dir / "c.json") << "{ not json";
  CHECK_THROWS_AS(load_config(dir / "c.json"), ConfigError);
}

TEST_CASE("stage names and dependencies", "[pipeline]") {
  CHECK(parse_stage("features") == Stage::features);
  CHECK_THROWS_AS(parse_stage("plot"), ConfigError);
  Pipeline p(parse_config(tiny_config(), "/base"));
  CHECK(p.upstream(Stage::ingest) == std::vector{Stage::synth});
  CHECK(p.upstream(Stage::report) == std::vector{Stage::analyze, Stage::train});
}

TEST_CASE("fingerprints ignore threads and output paths", "[pipeline]") {
  ConfigOverrides a, b;
  a.threads = 1;
  b.threads = 8;
  b.out = "/other";
  Pipeline pa(parse_config(tiny_config(), "/base", a));
  Pipeline pb(parse_config(tiny_config(), "/base", b));
  for (auto s : kStages) CHECK(pa.expected_hash(s) == pb.expected_hash(s));
  ConfigOverrides c;
  c.threshold = 0.6;
  Pipeline pc(parse_config(tiny_config(), "/base", c));
  CHECK(pc.expected_hash(Stage::analyze) != pa.expected_hash(Stage::analyze));
  CHECK(pc.expected_hash(Stage::train) == pa.expected_hash(Stage::train));
  CHECK(pc.expected_hash(Stage::report) != pa.expected_hash(Stage::report));
}

TEST_CASE("stages refuse missing or stale upstream artifacts", "[pipeline]") {
  const auto dir = scratch("stale");
  ConfigOverrides ov;
  ov.out = dir;
  Pipeline p(parse_config(tiny_config(), dir, ov));
  try {
    p.run(Stage::graph);
    FAIL("expected ArtifactError");
  } catch (const ArtifactError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(std::string(e.what()).find("netcare ingest") != std::string::npos);
  }
  p.run(Stage::synth);
  p.run(Stage::ingest);
  p.run(Stage::graph);

  auto doc = tiny_config();
  doc["graph"] = {{"min_frequency", 2}};
  Pipeline changed(parse_config(doc, dir, ov));
  try {
    changed.run(Stage::features);
    FAIL("expected ArtifactError");
  } catch (const ArtifactError& e) {
    CHECK(e.stage() == "graph");
    CHECK(std::string(e.what()).find("stale") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("a full run writes every stable artifact and is repeatable", "[pipeline]") {
  const auto dir = scratch("full");
  ConfigOverrides ov;
  ov.out = dir / "a";
  Pipeline(parse_config(tiny_config(), dir, ov)).run_all();
  for (const char* f : {"synth/comm.csv", "synth/ground_truth.json", "ingest/roster.csv", "ingest/weeks.csv",
                        "ingest/compliance.csv", "ingest/parse_stats.json", "graph/edges.csv", "graph/metrics.csv",
                        "graph/structure.csv", "features/behavior.csv", "features/matrix_stress.csv",
                        "features/exclusions.json", "analyze/analysis.json", "train/results.json",
                        "report/table3_population.csv", "report/table4_census_pairs.csv",
                        "report/table5_census_summary.csv", "report/boxplots.csv", "report/tests.json",
                        "report/table7_stress_person.csv", "report/manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "a" / f));
  }
  const auto t7 = slurp(dir / "a/report/table7_stress_person.csv");
  CHECK(t7.rfind("features,F1,Level1,Level2,Level3,Level4\n", 0) == 0);
  CHECK(t7.find("\nimprovement,") != std::string::npos);
  const auto manifest = Json::parse(slurp(dir / "a/report/manifest.json"));
  CHECK(manifest["seed"] == 3);
  CHECK_FALSE(manifest.dump().find("elapsed") != std::string::npos);

  ov.out = dir / "b";
  ov.threads = 3;
  Pipeline(parse_config(tiny_config(), dir, ov)).run_all();
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    CAPTURE(rel.string());
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
  }
  fs::remove_all(dir);
}
