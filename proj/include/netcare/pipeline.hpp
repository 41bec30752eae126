#pragma once

// Staged batch pipeline over one output directory. Every stage writes plain CSV/JSON files
// into out/<stage>/ plus a stage.json fingerprint; a stage refuses to start when a
// predecessor's fingerprint is missing or disagrees with the current configuration.

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcare/config.hpp"
#include "netcare/core.hpp"
#include "netcare/features.hpp"
#include "netcare/graph.hpp"
#include "netcare/ingest.hpp"
#include "netcare/learn/experiment.hpp"
#include "netcare/report.hpp"
#include "netcare/stats.hpp"
#include "netcare/synth.hpp"

namespace netcare {

enum class Stage : std::uint8_t { synth, ingest, graph, features, analyze, train, report };

inline constexpr std::array kStages{Stage::synth,   Stage::ingest, Stage::graph, Stage::features,
                                    Stage::analyze, Stage::train,  Stage::report};

inline std::string_view to_string(Stage s) {
  static constexpr std::array<std::string_view, 7> names{"synth",   "ingest", "graph", "features",
                                                         "analyze", "train",  "report"};
  return names[static_cast<std::size_t>(s)];
}

inline Stage parse_stage(std::string_view s) {
  for (auto st : kStages) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown stage '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Artifact files
// ---------------------------------------------------------------------------

namespace artifact {

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string read_text(const std::filesystem::path& path, std::string_view stage) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw ArtifactError(std::string(stage), "missing artifact '" + path.string() + "' from stage '" +
                                                std::string(stage) + "'; run `netcare " + std::string(stage) +
                                                "` first");
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Json read_json(const std::filesystem::path& path, std::string_view stage) {
  const auto text = read_text(path, stage);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string(stage), "corrupt artifact '" + path.string() + "': " + e.what());
  }
}

/// FNV-1a over the file bytes.
inline std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<char> buf(1 << 20);
  std::uint64_t h = fnv1a({});
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(f.gcount())), h);
  }
  return h;
}

struct Csv {
  std::vector<std::vector<std::string>> rows;
};

/// Reads a comma-separated artifact whose header must equal `header` exactly.
inline Csv read_csv(const std::filesystem::path& path, std::string_view stage, const std::vector<std::string>& header) {
  std::istringstream in(read_text(path, stage));
  std::string line;
  auto corrupt = [&](const std::string& why) {
    return ArtifactError(std::string(stage), "corrupt artifact '" + path.string() + "': " + why);
  };
  if (!std::getline(in, line)) throw corrupt("empty file");
  const auto fields = split_fields(line, ',');
  if (fields.size() != header.size() || !std::equal(fields.begin(), fields.end(), header.begin())) {
    throw corrupt("unexpected header");
  }
  Csv out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_fields(line, ',');
    if (f.size() != header.size()) throw corrupt("wrong field count");
    out.rows.emplace_back(f.begin(), f.end());
  }
  return out;
}

template <class T>
T field(const std::string& s, std::string_view stage) {
  auto v = parse_number<T>(s);
  if (!v) throw ArtifactError(std::string(stage), "corrupt artifact value '" + s + "'");
  return *v;
}

}  // namespace artifact

// ---------------------------------------------------------------------------
// JSON encodings
// ---------------------------------------------------------------------------

namespace encode {

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

inline std::optional<double> to_optional(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline Json series(const WeeklySeries& s) {
  Json a = Json::array();
  for (const auto& v : s) a.push_back(optional_number(v));
  return a;
}

inline Json table(const CorrelationTable& t) {
  Json rows = Json::array();
  for (const auto& row : t.r) {
    Json r = Json::array();
    for (const auto& v : row) r.push_back(optional_number(v));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline CorrelationTable table_from(const Json& j) {
  CorrelationTable t;
  if (!j.is_array() || j.size() != kStructuralSeries) throw DataError("correlation table has the wrong shape");
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    if (j[s].size() != kBehavioralSeries) throw DataError("correlation table has the wrong shape");
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) t.r[s][b] = to_optional(j[s][b]);
  }
  return t;
}

inline Json test(const TestResult& r) {
  return Json{{"defined", r.defined},
              {"degenerate", r.degenerate},
              {"statistic", r.defined ? number(r.statistic) : Json(nullptr)},
              {"statistic_sign", r.statistic > 0 ? 1 : (r.statistic < 0 ? -1 : 0)},
              {"df1", number(r.df1)},
              {"df2", number(r.df2)},
              {"p_value", number(r.p_value)},
              {"alpha", r.alpha},
              {"family_size", r.family_size},
              {"significant_after_correction", r.significant_after_correction}};
}

inline Json census(const CorrelationCensus& c) {
  Json pairs = Json::array();
  for (const auto& row : c.pair_counts) pairs.push_back(row);
  return Json{{"threshold", c.threshold},
              {"total_persons", c.total_persons},
              {"uncorrelatable", c.uncorrelatable},
              {"pair_counts", pairs},
              {"participant_any", c.participant_any},
              {"whole_any", c.whole_any},
              {"either_any", c.either_any}};
}

inline CorrelationCensus census_from(const Json& j) {
  CorrelationCensus c;
  c.threshold = j.at("threshold").get<double>();
  c.total_persons = j.at("total_persons").get<std::size_t>();
  c.uncorrelatable = j.at("uncorrelatable").get<std::size_t>();
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) c.pair_counts[s][b] = j.at("pair_counts")[s][b].get<std::size_t>();
  }
  for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
    c.participant_any[b] = j.at("participant_any")[b].get<std::size_t>();
    c.whole_any[b] = j.at("whole_any")[b].get<std::size_t>();
    c.either_any[b] = j.at("either_any")[b].get<std::size_t>();
  }
  return c;
}

inline Json boxplots(std::span<const BoxplotSeries> series) {
  Json a = Json::array();
  for (const auto& s : series) {
    Json weeks = Json::array();
    for (const auto& w : s.weeks) {
      weeks.push_back(Json{{"week", w.week},
                           {"n", w.n},
                           {"min", w.min},
                           {"q1", w.q1},
                           {"median", w.median},
                           {"mean", w.mean},
                           {"q3", w.q3},
                           {"max", w.max}});
    }
    a.push_back(Json{{"feature", s.feature}, {"weeks", std::move(weeks)}});
  }
  return a;
}

inline std::vector<BoxplotSeries> boxplots_from(const Json& j) {
  std::vector<BoxplotSeries> out;
  for (const auto& s : j) {
    BoxplotSeries b;
    b.feature = s.at("feature").get<std::string>();
    for (const auto& w : s.at("weeks")) {
      b.weeks.push_back(BoxplotWeek{w.at("week").get<int>(), w.at("n").get<std::size_t>(), w.at("min").get<double>(),
                                    w.at("q1").get<double>(), w.at("median").get<double>(),
                                    w.at("mean").get<double>(), w.at("q3").get<double>(), w.at("max").get<double>()});
    }
    out.push_back(std::move(b));
  }
  return out;
}

inline Json analysis(const AnalysisResults& a, std::span<const BoxplotSeries> box) {
  Json structure = Json::object();
  for (std::size_t s = 0; s < kStructuralSeries; ++s) structure[structural_series_name(s)] = series(a.population.structure[s]);
  Json behavior = Json::object();
  for (std::size_t b = 0; b < kBehavioralSeries; ++b) behavior[std::string(kBehaviorSeriesNames[b])] = series(a.population.behavior[b]);
  Json tests = Json::array();
  for (const auto& t : a.split_tests) {
    tests.push_back(Json{{"structural", structural_series_name(t.structural)},
                         {"behavioral", kBehaviorSeriesNames[t.behavioral]},
                         {"observations", t.observations},
                         {"result", test(t.result)}});
  }
  Json anova = Json::array();
  for (const auto& e : a.heart_rate_anova) {
    anova.push_back(Json{{"target", to_string(e.target)}, {"group_sizes", e.group_sizes}, {"result", test(e.result)}});
  }
  return Json{{"options",
               {{"threshold", a.options.threshold},
                {"aggregator", a.options.aggregator == Aggregator::mean ? "mean" : "median"},
                {"alpha", a.options.alpha}}},
              {"weeks", a.weeks},
              {"population",
               {{"table", table(a.population.table)},
                {"at_least_05", a.population.at_least_05},
                {"at_least_07", a.population.at_least_07},
                {"at_threshold", a.population.table.count_at_least(a.options.threshold)},
                {"structure_series", std::move(structure)},
                {"behavior_series", std::move(behavior)}}},
              {"census", census(a.census)},
              {"split_tests", std::move(tests)},
              {"heart_rate_anova", std::move(anova)},
              {"significant_tests", a.significant_tests},
              {"boxplots", boxplots(box)}};
}

inline Json hyperparams(learn::ClassifierKind kind, const learn::Hyperparams& h) {
  Json j{{"summary", h.describe(kind)}};
  switch (kind) {
    case learn::ClassifierKind::knn: j["knn_k"] = h.knn_k; break;
    case learn::ClassifierKind::cart: j["cart_min_leaf"] = h.cart_min_leaf; break;
    case learn::ClassifierKind::svm:
      j["svm_kernel"] = learn::to_string(h.svm_kernel.kind);
      j["svm_degree"] = h.svm_kernel.degree;
      j["svm_gamma"] = h.svm_kernel.gamma;
      j["svm_coef0"] = h.svm_kernel.coef0;
      j["svm_cost"] = h.svm_cost;
      break;
    case learn::ClassifierKind::lr:
      j["lr_l2"] = h.lr_l2;
      j["lr_learning_rate"] = h.lr_learning_rate;
      j["lr_epochs"] = h.lr_epochs;
      break;
    case learn::ClassifierKind::rf:
      j["rf_trees"] = h.rf_trees;
      j["rf_mtry"] = h.rf_mtry;
      j["rf_min_leaf"] = h.rf_min_leaf;
      break;
  }
  return j;
}

inline Json all_hyperparams(const learn::Hyperparams& h) {
  return Json{{"knn_k", h.knn_k},
              {"cart_min_leaf", h.cart_min_leaf},
              {"svm_kernel", learn::to_string(h.svm_kernel.kind)},
              {"svm_degree", h.svm_kernel.degree},
              {"svm_gamma", h.svm_kernel.gamma},
              {"svm_coef0", h.svm_kernel.coef0},
              {"svm_cost", h.svm_cost},
              {"lr_l2", h.lr_l2},
              {"lr_learning_rate", h.lr_learning_rate},
              {"lr_epochs", h.lr_epochs},
              {"rf_trees", h.rf_trees},
              {"rf_mtry", h.rf_mtry},
              {"rf_min_leaf", h.rf_min_leaf}};
}

inline Json grid(const learn::GridSpec& g) {
  Json svm = Json::array();
  for (const auto& p : g.svm) {
    svm.push_back(Json{{"kernel", learn::to_string(p.kernel.kind)},
                       {"degree", p.kernel.degree},
                       {"gamma", p.kernel.gamma},
                       {"coef0", p.kernel.coef0},
                       {"cost", p.cost}});
  }
  return Json{{"knn_k", g.knn_k},
              {"cart_min_leaf", g.cart_min_leaf},
              {"svm", std::move(svm)},
              {"lr_l2", g.lr_l2},
              {"rf_mtry", g.rf_mtry}};
}

inline Json weights(const learn::EnsembleWeights& w, std::span<const learn::ClassifierKind> base) {
  Json rows = Json::object();
  for (int i = 0; i < w.classifiers; ++i) {
    Json r = Json::array();
    for (int j = 0; j < w.classes; ++j) r.push_back(w.weight(i, j));
    rows[std::string(learn::to_string(base[static_cast<std::size_t>(i)]))] = std::move(r);
  }
  return Json{{"mode", learn::to_string(w.mode)},
              {"units", w.units},
              {"validation_macro_f1", w.validation_score},
              {"weights", std::move(rows)}};
}

inline Json experiment(const learn::ExperimentResult& r, std::span<const learn::ClassifierKind> base) {
  Json abl = Json::array();
  for (const auto& a : r.ablations) {
    Json models = Json::array();
    for (const auto& b : a.base) {
      models.push_back(Json{{"classifier", learn::to_string(b.kind)},
                            {"hyperparameters", hyperparams(b.kind, b.chosen)},
                            {"cv_macro_f1", b.cv_macro_f1},
                            {"test_macro_f1", b.test_macro_f1},
                            {"degenerate", b.degenerate}});
    }
    Json levels = Json::array();
    for (const auto& v : a.report.per_class_f1) levels.push_back(optional_number(v));
    abl.push_back(Json{{"name", a.name},
                       {"columns", a.columns},
                       {"base_models", std::move(models)},
                       {"ensemble", weights(a.weights, base)},
                       {"macro_f1", a.report.macro_f1},
                       {"level_f1", std::move(levels)},
                       {"level_support", a.report.support},
                       {"unevaluated_levels", a.unevaluated_levels}});
  }
  return Json{{"target", to_string(r.target)},
              {"split", learn::to_string(r.split)},
              {"seed", r.seed},
              {"train_rows", r.train_rows},
              {"test_rows", r.test_rows},
              {"ablations", std::move(abl)},
              {"warnings", r.warnings}};
}

inline PredictionTable prediction_table(const Json& result) {
  PredictionTable t;
  t.target = result.at("target").get<std::string>();
  t.levels = level_count(parse_wellness_target(t.target));
  for (const auto& a : result.at("ablations")) {
    PredictionRow row;
    row.name = a.at("name").get<std::string>();
    row.f1 = a.at("macro_f1").get<double>();
    for (const auto& v : a.at("level_f1")) row.levels.push_back(to_optional(v));
    row.levels.resize(static_cast<std::size_t>(t.levels));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace encode

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {}

  const RunConfig& config() const { return cfg_; }

  std::filesystem::path stage_dir(Stage s) const { return cfg_.out_dir / std::string(to_string(s)); }

  /// Direct predecessors whose artifacts the stage reads.
  std::vector<Stage> upstream(Stage s) const {
    switch (s) {
      case Stage::synth: return {};
      case Stage::ingest: return cfg_.ingest.inputs_from_synth ? std::vector{Stage::synth} : std::vector<Stage>{};
      case Stage::graph: return {Stage::ingest};
      case Stage::features: return {Stage::ingest, Stage::graph};
      case Stage::analyze: return {Stage::ingest, Stage::graph, Stage::features};
      case Stage::train: return {Stage::features};
      case Stage::report: return {Stage::analyze, Stage::train};
    }
    return {};
  }

  /// Configuration content that determines a stage's artifacts (thread count and paths excluded).
  Json section(Stage s) const {
    switch (s) {
      case Stage::synth: {
        if (!cfg_.synth) return Json(nullptr);
        const auto& c = *cfg_.synth;
        return Json{{"seed", c.seed},
                    {"n_participants", c.n_participants},
                    {"n_outsiders", c.n_outsiders},
                    {"n_weeks", c.n_weeks},
                    {"coupling_rho", c.coupling_rho},
                    {"coupled_fraction", c.coupled_fraction},
                    {"label_signal", to_string(c.label_signal)},
                    {"label_noise", c.label_noise},
                    {"start", format_date(c.start)},
                    {"active_week_sd", c.active_week_sd},
                    {"active_day_sd", c.active_day_sd}};
      }
      case Stage::ingest: {
        const auto& in = cfg_.ingest;
        auto cols = [](const auto&... names) {
          Json a = Json::array();
          (a.push_back(names), ...);
          return a;
        };
        const auto& c = in.comm_columns;
        const auto& w = in.wearable_columns;
        const auto& v = in.survey_columns;
        Json doc{{"study_start", format_date(in.study_start)},
                    {"study_end", format_date(in.study_end)},
                    {"compliance_threshold", in.compliance_threshold},
                    {"max_malformed_fraction", in.parse.max_malformed_fraction},
                    {"delimiter", std::string(1, c.delimiter)},
                    {"comm_columns", cols(c.timestamp, c.src, c.dst, c.kind, c.duration, c.answered)},
                    {"wearable_columns", cols(w.person, w.timestamp, w.heart_rate, w.steps, w.activity_state, w.hr_zone)},
                    {"survey_columns", cols(v.person, v.gender, v.stress, v.happiness, v.positive_attitude, v.self_health)}};
        if (!in.inputs_from_synth) {
          doc["input_fnv1a"] = {{"comm", hex64(artifact::hash_file(in.comm))},
                                {"wearable", hex64(artifact::hash_file(in.wearable))},
                                {"survey", hex64(artifact::hash_file(in.survey))}};
        }
        return doc;
      }
      case Stage::graph: return Json{{"min_frequency", cfg_.min_frequency}};
      case Stage::features: return Json{{"targets", target_names()}};
      case Stage::analyze:
        return Json{{"threshold", cfg_.analysis.threshold},
                    {"aggregator", cfg_.analysis.aggregator == Aggregator::mean ? "mean" : "median"},
                    {"alpha", cfg_.analysis.alpha}};
      case Stage::train: {
        const auto& l = cfg_.learn;
        const auto& e = l.experiment;
        Json modes = Json::array();
        for (auto m : l.split_modes) modes.push_back(learn::to_string(m));
        Json abl = Json::array();
        for (const auto& a : l.ablations) abl.push_back(Json{{"name", a.name}, {"groups", a.groups.bits}});
        Json base = Json::array();
        for (auto k : e.base) base.push_back(learn::to_string(k));
        return Json{{"seed", e.seed},
                    {"targets", target_names()},
                    {"split_modes", std::move(modes)},
                    {"ablations", std::move(abl)},
                    {"train_fraction", e.train_fraction},
                    {"folds", e.folds},
                    {"base", std::move(base)},
                    {"defaults", encode::all_hyperparams(e.defaults)},
                    {"grid", encode::grid(e.grid)},
                    {"ensemble",
                     {{"step", e.search.step},
                      {"mode", learn::to_string(e.search.mode)},
                      {"budget", e.search.budget},
                      {"max_sweeps", e.search.max_sweeps}}},
                    {"include_timings", cfg_.include_timings}};
      }
      case Stage::report: return Json{{"include_timings", cfg_.include_timings}};
    }
    return Json(nullptr);
  }

  /// Fingerprint the stage's artifacts must carry under the current configuration.
  std::string expected_hash(Stage s) {
    if (auto it = hash_cache_.find(s); it != hash_cache_.end()) return it->second;
    Json up = Json::object();
    for (auto u : upstream(s)) up[std::string(to_string(u))] = expected_hash(u);
    const Json doc{{"stage", to_string(s)}, {"section", section(s)}, {"upstream", std::move(up)}};
    return hash_cache_[s] = hex64(fnv1a(doc.dump()));
  }

  /// Throws ArtifactError naming the first predecessor that is missing or stale.
  void check_upstream(Stage s) {
    for (auto u : upstream(s)) {
      const auto name = std::string(to_string(u));
      const auto path = stage_dir(u) / "stage.json";
      if (!std::filesystem::exists(path)) {
        throw ArtifactError(name, "stage '" + name + "' has not produced its artifacts (missing " + path.string() +
                                      "); run `netcare " + name + "` first");
      }
      const auto j = artifact::read_json(path, name);
      if (!j.contains("hash") || j["hash"] != expected_hash(u)) {
        throw ArtifactError(name, "stage '" + name + "' is stale: its artifacts were built under a different "
                                  "configuration; re-run `netcare " + name + "`");
      }
    }
  }

  void run(Stage s) {
    if (s == Stage::synth && !cfg_.synth) throw ConfigError("the config has no 'synth' section");
    check_upstream(s);
    hash_cache_.clear();
    const auto dir = stage_dir(s);
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    log::info("stage " + std::string(to_string(s)) + " starting");
    Json summary;
    switch (s) {
      case Stage::synth: summary = run_synth(dir); break;
      case Stage::ingest: summary = run_ingest(dir); break;
      case Stage::graph: summary = run_graph(dir); break;
      case Stage::features: summary = run_features(dir); break;
      case Stage::analyze: summary = run_analyze(dir); break;
      case Stage::train: summary = run_train(dir); break;
      case Stage::report: summary = run_report(dir); break;
    }
    hash_cache_.clear();
    Json up = Json::object();
    for (auto u : upstream(s)) up[std::string(to_string(u))] = expected_hash(u);
    artifact::write_json(dir / "stage.json", Json{{"stage", to_string(s)},
                                                  {"hash", expected_hash(s)},
                                                  {"upstream", std::move(up)},
                                                  {"summary", std::move(summary)}});
    log::info("stage " + std::string(to_string(s)) + " done");
  }

  /// Every stage in order; synth only when configured.
  void run_all() {
    for (auto s : kStages) {
      if (s == Stage::synth && !cfg_.synth) continue;
      run(s);
    }
  }

 private:
  Json target_names() const {
    Json a = Json::array();
    for (auto t : cfg_.learn.targets) a.push_back(to_string(t));
    return a;
  }

  // --- shared readers -----------------------------------------------------

  std::vector<WeekIndex> read_weeks() const {
    const auto csv = artifact::read_csv(stage_dir(Stage::ingest) / "weeks.csv", "ingest", {"week", "start", "end"});
    std::vector<WeekIndex> weeks;
    for (const auto& r : csv.rows) {
      auto s = try_parse_date(r[1]);
      auto e = try_parse_date(r[2]);
      if (!s || !e) throw ArtifactError("ingest", "corrupt weeks.csv");
      weeks.push_back({artifact::field<int>(r[0], "ingest"), *s, *e});
    }
    return weeks;
  }

  std::set<PersonId> read_roster() const {
    const auto csv = artifact::read_csv(stage_dir(Stage::ingest) / "roster.csv", "ingest", {"person"});
    std::set<PersonId> roster;
    for (const auto& r : csv.rows) roster.insert(PersonId(r[0]));
    return roster;
  }

  std::vector<SurveyRecord> read_surveys() const {
    const auto path = stage_dir(Stage::ingest) / "survey.csv";
    artifact::read_text(path, "ingest");
    return parse_survey_file(path.string(), {}, ParseOptions{0.0}).records;
  }

  static std::vector<std::string> structure_header() {
    std::vector<std::string> h{"person", "week"};
    const auto& names = feature_column_names();
    h.insert(h.end(), names.begin() + kGenderColumns + kBehaviorColumns, names.end());
    return h;
  }

  static std::vector<std::string> behavior_header() {
    std::vector<std::string> h{"person", "week"};
    for (auto n : kBehaviorColumnNames) h.emplace_back(n);
    return h;
  }

  static std::vector<std::string> matrix_header() {
    std::vector<std::string> h{"person", "week"};
    const auto& names = feature_column_names();
    h.insert(h.end(), names.begin(), names.end());
    h.emplace_back("label");
    return h;
  }

  StructureTable read_structure() const {
    const auto csv = artifact::read_csv(stage_dir(Stage::graph) / "structure.csv", "graph", structure_header());
    StructureTable t;
    for (const auto& r : csv.rows) {
      StructuralFeatures f{};
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = artifact::field<double>(r[2 + i], "graph");
      t.emplace(PersonWeek{PersonId(r[0]), artifact::field<int>(r[1], "graph")}, f);
    }
    return t;
  }

  BehaviorTable read_behavior() const {
    const auto csv = artifact::read_csv(stage_dir(Stage::features) / "behavior.csv", "features", behavior_header());
    BehaviorTable t;
    for (const auto& r : csv.rows) {
      std::array<double, 12> v{};
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = artifact::field<double>(r[2 + i], "features");
      t.emplace(PersonWeek{PersonId(r[0]), artifact::field<int>(r[1], "features")}, BehaviorFeatures::from_values(v));
    }
    return t;
  }

  FeatureMatrix read_matrix(WellnessTarget target) const {
    const auto path = stage_dir(Stage::features) / ("matrix_" + std::string(to_string(target)) + ".csv");
    const auto csv = artifact::read_csv(path, "features", matrix_header());
    FeatureMatrix m;
    m.target = target;
    for (const auto& r : csv.rows) {
      FeatureRow row;
      row.person = PersonId(r[0]);
      row.week = artifact::field<int>(r[1], "features");
      for (std::size_t i = 0; i < kFeatureColumns; ++i) row.values[i] = artifact::field<double>(r[2 + i], "features");
      row.label = artifact::field<int>(r.back(), "features");
      m.rows.push_back(std::move(row));
    }
    return m;
  }

  static std::string join_row(std::initializer_list<std::string> fields) {
    std::string s;
    for (const auto& f : fields) {
      if (!s.empty()) s += ',';
      s += f;
    }
    return s;
  }

  // --- stages ---------------------------------------------------------------

  Json run_synth(const std::filesystem::path& dir) {
    SynthGenerator gen(*cfg_.synth);
    gen.write(dir);
    return Json{{"persons", gen.persons().size()}, {"events", gen.events().size()}, {"weeks", gen.weeks().size()}};
  }

  Json run_ingest(const std::filesystem::path& dir) {
    const auto& in = cfg_.ingest;
    Diagnostics diag;
    const auto comm = parse_comm_file(in.comm.string(), in.comm_columns, in.parse);
    const auto wear = parse_wearable_file(in.wearable.string(), in.wearable_columns, in.parse);
    const auto surv = parse_survey_file(in.survey.string(), in.survey_columns, in.parse);
    const auto weeks = make_weeks(in.study_start, in.study_end, &diag);
    if (weeks.empty()) throw DataError("the study range holds no complete week");

    std::vector<CommEvent> events;
    std::size_t out_of_range = 0;
    for (const auto& e : comm.records) {
      if (week_of(e.timestamp, weeks)) {
        events.push_back(e);
      } else {
        ++out_of_range;
      }
    }
    const auto mask = compliance_filter(wear.records, weeks, in.compliance_threshold);
    std::set<PersonId> roster;
    for (const auto& s : surv.records) roster.insert(s.person);
    for (const auto& [p, _] : mask.persons) roster.insert(p);

    {
      std::ostringstream os;
      write_comm_log(os, events);
      artifact::write_text(dir / "comm.csv", os.str());
    }
    {
      std::ostringstream os;
      write_survey(os, surv.records);
      artifact::write_text(dir / "survey.csv", os.str());
    }
    {
      std::ostringstream os;
      os << "person\n";
      for (const auto& p : roster) os << p << '\n';
      artifact::write_text(dir / "roster.csv", os.str());
    }
    {
      std::ostringstream os;
      os << "week,start,end\n";
      for (const auto& w : weeks) os << w.index << ',' << format_date(w.start) << ',' << format_date(w.end) << '\n';
      artifact::write_text(dir / "weeks.csv", os.str());
    }
    {
      std::ostringstream os;
      os << "person,week,day1,day2,day3,day4,day5,day6,day7,week_fraction,retained\n";
      for (const auto& [p, pc] : mask.persons) {
        for (std::size_t w = 0; w < weeks.size(); ++w) {
          os << p << ',' << weeks[w].index;
          for (std::size_t d = 0; d < 7; ++d) os << ',' << format_double(pc.day_fraction[7 * w + d]);
          os << ',' << format_double(pc.week_fraction[w]) << ',' << (pc.retained[w] ? 1 : 0) << '\n';
        }
      }
      artifact::write_text(dir / "compliance.csv", os.str());
    }
    auto stats = [](const ParseStats& s) {
      return Json{{"total_rows", s.total_rows},
                  {"accepted", s.accepted},
                  {"rejected", s.rejected},
                  {"deduplicated", s.deduplicated},
                  {"first_bad_line", s.first_bad_line ? Json(*s.first_bad_line) : Json(nullptr)},
                  {"messages", s.messages}};
    };
    const Json summary{{"comm", stats(comm.stats)},
                       {"comm_out_of_range", out_of_range},
                       {"wearable", stats(wear.stats)},
                       {"survey", stats(surv.stats)},
                       {"weeks", weeks.size()},
                       {"roster", roster.size()},
                       {"wearable_persons", mask.persons.size()},
                       {"retained_person_weeks", mask.retained_count()},
                       {"warnings", diag.warnings}};
    artifact::write_json(dir / "parse_stats.json", summary);
    for (const auto& w : diag.warnings) log::warn(w);
    return Json{{"events", events.size()}, {"roster", roster.size()}, {"retained_person_weeks", mask.retained_count()}};
  }

  Json run_graph(const std::filesystem::path& dir) {
    const auto comm_path = stage_dir(Stage::ingest) / "comm.csv";
    artifact::read_text(comm_path, "ingest");
    const auto events = parse_comm_file(comm_path.string(), {}, ParseOptions{0.0}).records;
    const auto weeks = read_weeks();
    const auto roster = read_roster();
    const auto res = compute_structure(events, weeks, roster, cfg_.min_frequency, cfg_.threads);
    {
      std::ostringstream os;
      os << "a,b,count\n";
      for (const auto& [pair, n] : res.edges.contact_count) os << pair.first << ',' << pair.second << ',' << n << '\n';
      artifact::write_text(dir / "edges.csv", os.str());
    }
    {
      std::ostringstream os;
      os << "week,scope,person,degree,triangles,clustering,betweenness,closeness,closeness_component\n";
      for (const auto& m : res.metrics) {
        for (const auto& r : m.rows) {
          os << m.week.index << ',' << to_string(m.scope) << ',' << r.person << ',' << r.degree << ',' << r.triangles
             << ',' << format_double(r.clustering) << ',' << format_double(r.betweenness) << ','
             << format_double(r.closeness) << ',' << format_double(r.closeness_component) << '\n';
        }
      }
      artifact::write_text(dir / "metrics.csv", os.str());
    }
    {
      std::ostringstream os;
      const auto h = structure_header();
      for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
      os << '\n';
      for (const auto& [key, f] : res.table) {
        os << key.first << ',' << key.second;
        for (double v : f) os << ',' << format_double(v);
        os << '\n';
      }
      artifact::write_text(dir / "structure.csv", os.str());
    }
    return Json{{"edges", res.edges.size()}, {"snapshots", res.metrics.size()}, {"person_weeks", res.table.size()}};
  }

  Json run_features(const std::filesystem::path& dir) {
    const auto& in = cfg_.ingest;
    const auto weeks = read_weeks();
    const auto wear = parse_wearable_file(in.wearable.string(), in.wearable_columns, in.parse);
    const auto behavior = behavior_from_records(wear.records, weeks, in.compliance_threshold);
    const auto structure = read_structure();
    const auto surveys = read_surveys();
    {
      std::ostringstream os;
      const auto h = behavior_header();
      for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
      os << '\n';
      for (const auto& [key, bf] : behavior.table) {
        os << key.first << ',' << key.second;
        for (double v : bf.values()) os << ',' << format_double(v);
        os << '\n';
      }
      artifact::write_text(dir / "behavior.csv", os.str());
    }
    Json exclusions = Json::object();
    const FeatureGroups all{FeatureGroup::gender, FeatureGroup::behavior, FeatureGroup::structure};
    for (auto target : cfg_.learn.targets) {
      const auto m = assemble_matrix(behavior.table, structure, surveys, target, all);
      std::ostringstream os;
      const auto h = matrix_header();
      for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
      os << '\n';
      for (const auto& r : m.rows) {
        os << r.person << ',' << r.week;
        for (double v : r.values) os << ',' << format_double(v);
        os << ',' << r.label << '\n';
      }
      artifact::write_text(dir / ("matrix_" + std::string(to_string(target)) + ".csv"), os.str());
      const auto& ex = m.exclusions;
      exclusions[std::string(to_string(target))] = Json{{"retained_person_weeks", ex.retained_person_weeks},
                                                        {"no_survey", ex.no_survey},
                                                        {"missing_label", ex.missing_label},
                                                        {"missing_structure", ex.missing_structure},
                                                        {"rows", ex.rows},
                                                        {"persons_with_rows", ex.persons_with_rows},
                                                        {"persons_without_survey", ex.persons_without_survey}};
    }
    artifact::write_json(dir / "exclusions.json", exclusions);
    return Json{{"behavior_rows", behavior.table.size()}, {"exclusions", exclusions}};
  }

  Json run_analyze(const std::filesystem::path& dir) {
    const auto weeks = read_weeks();
    const auto behavior = read_behavior();
    const auto structure = read_structure();
    const auto surveys = read_surveys();
    const auto panel = build_panel(behavior, structure, weeks);
    const auto res = run_analysis(panel, weeks.size(), surveys, cfg_.analysis);
    const auto box = boxplot_series(panel, weeks);
    artifact::write_json(dir / "analysis.json", encode::analysis(res, box));
    return Json{{"persons", panel.size()},
                {"threshold", cfg_.analysis.threshold},
                {"population_at_threshold", res.population.table.count_at_least(cfg_.analysis.threshold)},
                {"significant_tests", res.significant_tests}};
  }

  Json run_train(const std::filesystem::path& dir) {
    Json results = Json::array();
    Json timings = Json::array();
    const auto& l = cfg_.learn;
    for (auto target : l.targets) {
      const auto m = read_matrix(target);
      for (auto mode : l.split_modes) {
        auto ecfg = l.experiment;
        ecfg.split = mode;
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = learn::run_experiment(m, ecfg, l.ablations);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        results.push_back(encode::experiment(r, ecfg.base));
        timings.push_back(Json{{"target", to_string(target)}, {"split", learn::to_string(mode)}, {"seconds", dt.count()}});
      }
    }
    Json out{{"results", results}};
    if (cfg_.include_timings) out["timings"] = timings;
    artifact::write_json(dir / "results.json", out);
    return Json{{"experiments", results.size()}};
  }

  Json run_report(const std::filesystem::path& dir) {
    const auto analysis = artifact::read_json(stage_dir(Stage::analyze) / "analysis.json", "analyze");
    const auto train = artifact::read_json(stage_dir(Stage::train) / "results.json", "train");
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& text) {
      artifact::write_text(dir / name, text);
      files.push_back(name);
    };
    try {
      const auto& pop = analysis.at("population");
      emit("table3_population.csv", render_population_table(encode::table_from(pop.at("table"))));
      const auto census = encode::census_from(analysis.at("census"));
      emit("table4_census_pairs.csv", render_census_counts(census));
      emit("table5_census_summary.csv", render_census_summary(census));
      emit("boxplots.csv", render_boxplots(encode::boxplots_from(analysis.at("boxplots"))));
      const Json ledger{{"split_tests", analysis.at("split_tests")},
                        {"heart_rate_anova", analysis.at("heart_rate_anova")},
                        {"significant_tests", analysis.at("significant_tests")}};
      emit("tests.json", ledger.dump(2) + "\n");
      for (const auto& r : train.at("results")) {
        const auto t = encode::prediction_table(r);
        emit("table7_" + t.target + "_" + r.at("split").get<std::string>() + ".csv", render_prediction_table(t));
      }
      Json stages = Json::object();
      for (auto s : kStages) {
        if (s == Stage::report || (s == Stage::synth && !cfg_.synth)) continue;
        stages[std::string(to_string(s))] = expected_hash(s);
      }
      Json overrides = Json::object();
      if (cfg_.overrides.seed) overrides["seed"] = *cfg_.overrides.seed;
      if (cfg_.overrides.threshold) overrides["threshold"] = *cfg_.overrides.threshold;
      Json manifest{{"config", cfg_.source},
                    {"overrides", overrides},
                    {"seed", cfg_.seed},
                    {"split_modes", section(Stage::train).at("split_modes")},
                    {"stage_hashes", stages},
                    {"population",
                     {{"at_least_05", pop.at("at_least_05")},
                      {"at_least_07", pop.at("at_least_07")},
                      {"threshold", analysis.at("options").at("threshold")},
                      {"at_threshold", pop.at("at_threshold")}}},
                    {"experiments", train.at("results")}};
      if (cfg_.include_timings && train.contains("timings")) manifest["timings"] = train.at("timings");
      files.push_back("manifest.json");
      std::sort(files.begin(), files.end());
      manifest["files"] = files;
      artifact::write_json(dir / "manifest.json", manifest);
    } catch (const nlohmann::json::exception& e) {
      throw ArtifactError("analyze", std::string("upstream artifact has an unexpected layout: ") + e.what());
    }
    return Json{{"files", files.size()}};
  }

  RunConfig cfg_;
  std::map<Stage, std::string> hash_cache_;
};

}  // namespace netcare
