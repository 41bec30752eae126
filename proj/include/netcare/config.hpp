#pragma once

// Run configuration: one JSON document shared by every pipeline stage. Unknown keys are
// rejected so a typo cannot silently fall back to a default.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcare/core.hpp"
#include "netcare/features.hpp"
#include "netcare/ingest.hpp"
#include "netcare/learn/classifier.hpp"
#include "netcare/learn/ensemble.hpp"
#include "netcare/learn/experiment.hpp"
#include "netcare/stats.hpp"
#include "netcare/synth.hpp"

namespace netcare {

using Json = nlohmann::ordered_json;

namespace detail {

/// Typed, path-aware reader over one JSON object that remembers which keys were consumed.
class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required key " + where(key));
    return convert<T>(j_.at(key), key);
  }

  std::optional<ConfigReader> child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return ConfigReader(j_.at(key), where(key));
  }

  const Json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : "'" + path_ + "'";
    return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
  }

  /// Throws on any key that no getter asked for.
  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown key " + where(k));
    }
  }

 private:
  template <class T>
  T convert(const Json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const ConfigError&) {
    } catch (const nlohmann::json::exception&) {
    }
    throw ConfigError("wrong type for " + where(key) + ": " + v.dump());
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError("delimiter must be a single character (or \"tab\")");
  return s[0];
}

inline Date config_date(const std::string& s, const std::string& key) {
  auto d = try_parse_date(s);
  if (!d) throw ConfigError("'" + key + "' is not a YYYY-MM-DD date: " + s);
  return *d;
}

}  // namespace detail

struct IngestSettings {
  std::filesystem::path comm;
  std::filesystem::path wearable;
  std::filesystem::path survey;
  bool inputs_from_synth = false;  // the three paths point at the synth stage output
  Date study_start;
  Date study_end;
  double compliance_threshold = 0.8;
  ParseOptions parse;
  CommSchema comm_columns;
  WearableSchema wearable_columns;
  SurveySchema survey_columns;
};

struct LearnSettings {
  std::vector<WellnessTarget> targets{WellnessTarget::stress, WellnessTarget::happiness,
                                      WellnessTarget::positive_attitude, WellnessTarget::self_health};
  std::vector<learn::SplitMode> split_modes{learn::SplitMode::row, learn::SplitMode::person};
  std::vector<learn::Ablation> ablations = learn::standard_ablations();
  learn::ExperimentConfig experiment;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::filesystem::path> out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
};

struct RunConfig {
  Json source;  // the document as read, before overrides
  ConfigOverrides overrides;
  std::filesystem::path base_dir;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 7;
  unsigned threads = 1;
  std::optional<SynthConfig> synth;
  IngestSettings ingest;
  std::size_t min_frequency = 3;
  AnalysisOptions analysis;
  LearnSettings learn;
  bool include_timings = false;
};

namespace detail {

inline SynthConfig read_synth(ConfigReader& r, std::uint64_t seed) {
  SynthConfig s;
  s.n_participants = r.get("n_participants", s.n_participants);
  s.n_outsiders = r.get("n_outsiders", s.n_outsiders);
  s.n_weeks = r.get("n_weeks", s.n_weeks);
  s.coupling_rho = r.get("coupling_rho", s.coupling_rho);
  s.coupled_fraction = r.get("coupled_fraction", s.coupled_fraction);
  s.label_signal = parse_label_signal(r.get<std::string>("label_signal", "none"));
  s.label_noise = r.get("label_noise", s.label_noise);
  s.active_week_sd = r.get("active_week_sd", s.active_week_sd);
  s.active_day_sd = r.get("active_day_sd", s.active_day_sd);
  s.seed = r.get<std::uint64_t>("seed", seed);
  if (r.has("start")) s.start = config_date(r.get<std::string>("start", ""), "synth.start");
  r.finish();
  s.validate();
  return s;
}

inline void read_columns(ConfigReader& r, IngestSettings& in) {
  if (auto c = r.child("comm")) {
    auto& s = in.comm_columns;
    s.timestamp = c->get("timestamp", s.timestamp);
    s.src = c->get("src", s.src);
    s.dst = c->get("dst", s.dst);
    s.kind = c->get("kind", s.kind);
    s.duration = c->get("duration", s.duration);
    s.answered = c->get("answered", s.answered);
    c->finish();
  }
  if (auto c = r.child("wearable")) {
    auto& s = in.wearable_columns;
    s.person = c->get("person", s.person);
    s.timestamp = c->get("timestamp", s.timestamp);
    s.heart_rate = c->get("heart_rate", s.heart_rate);
    s.steps = c->get("steps", s.steps);
    s.activity_state = c->get("activity_state", s.activity_state);
    s.hr_zone = c->get("hr_zone", s.hr_zone);
    c->finish();
  }
  if (auto c = r.child("survey")) {
    auto& s = in.survey_columns;
    s.person = c->get("person", s.person);
    s.gender = c->get("gender", s.gender);
    s.stress = c->get("stress", s.stress);
    s.happiness = c->get("happiness", s.happiness);
    s.positive_attitude = c->get("positive_attitude", s.positive_attitude);
    s.self_health = c->get("self_health", s.self_health);
    c->finish();
  }
  r.finish();
}

inline learn::Kernel read_kernel(ConfigReader& r, const std::string& prefix, learn::Kernel k) {
  k.kind = learn::parse_kernel_kind(r.get<std::string>(prefix + "kernel", std::string(learn::to_string(k.kind))));
  k.degree = r.get(prefix + "degree", k.degree);
  k.gamma = r.get(prefix + "gamma", k.gamma);
  k.coef0 = r.get(prefix + "coef0", k.coef0);
  if (k.gamma < 0) throw ConfigError("SVM gamma must be non-negative (0 selects 1/features)");
  return k;
}

inline learn::Hyperparams read_hyperparams(ConfigReader& r) {
  learn::Hyperparams h;
  h.knn_k = r.get("knn_k", h.knn_k);
  h.cart_min_leaf = r.get("cart_min_leaf", h.cart_min_leaf);
  h.svm_kernel = read_kernel(r, "svm_", h.svm_kernel);
  h.svm_cost = r.get("svm_cost", h.svm_cost);
  h.lr_l2 = r.get("lr_l2", h.lr_l2);
  h.lr_learning_rate = r.get("lr_learning_rate", h.lr_learning_rate);
  h.lr_epochs = r.get("lr_epochs", h.lr_epochs);
  h.rf_trees = r.get("rf_trees", h.rf_trees);
  h.rf_mtry = r.get("rf_mtry", h.rf_mtry);
  h.rf_min_leaf = r.get("rf_min_leaf", h.rf_min_leaf);
  r.finish();
  h.validate();
  return h;
}

inline learn::GridSpec read_grid(ConfigReader& r) {
  learn::GridSpec g;
  g.knn_k = r.get("knn_k", g.knn_k);
  g.cart_min_leaf = r.get("cart_min_leaf", g.cart_min_leaf);
  g.lr_l2 = r.get("lr_l2", g.lr_l2);
  g.rf_mtry = r.get("rf_mtry", g.rf_mtry);
  if (const Json* svm = r.raw("svm")) {
    if (!svm->is_array()) throw ConfigError(r.where("svm") + " must be an array of {kernel, cost, ...}");
    g.svm.clear();
    for (std::size_t i = 0; i < svm->size(); ++i) {
      ConfigReader p((*svm)[i], "learn.grid.svm[" + std::to_string(i) + "]");
      learn::SvmGridPoint pt;
      pt.kernel = read_kernel(p, "", pt.kernel);
      pt.cost = p.get("cost", pt.cost);
      p.finish();
      if (!(pt.cost > 0)) throw ConfigError("SVM cost must be positive");
      g.svm.push_back(pt);
    }
  }
  r.finish();
  return g;
}

inline LearnSettings read_learn(ConfigReader& r, std::uint64_t seed) {
  LearnSettings l;
  if (const Json* t = r.raw("targets")) {
    if (!t->is_array() || t->empty()) throw ConfigError("'learn.targets' must be a non-empty array");
    l.targets.clear();
    for (const auto& v : *t) {
      if (!v.is_string()) throw ConfigError("'learn.targets' entries must be strings");
      const auto target = parse_wellness_target(v.get<std::string>());
      if (std::find(l.targets.begin(), l.targets.end(), target) != l.targets.end()) {
        throw ConfigError("duplicate target '" + v.get<std::string>() + "'");
      }
      l.targets.push_back(target);
    }
  }
  if (const Json* s = r.raw("split_modes")) {
    if (!s->is_array() || s->empty()) throw ConfigError("'learn.split_modes' must be a non-empty array");
    l.split_modes.clear();
    for (const auto& v : *s) {
      if (!v.is_string()) throw ConfigError("'learn.split_modes' entries must be strings");
      const auto mode = learn::parse_split_mode(v.get<std::string>());
      if (std::find(l.split_modes.begin(), l.split_modes.end(), mode) != l.split_modes.end()) {
        throw ConfigError("duplicate split mode '" + v.get<std::string>() + "'");
      }
      l.split_modes.push_back(mode);
    }
  }
  if (const Json* a = r.raw("ablations")) {
    if (!a->is_array() || a->size() < 2) throw ConfigError("'learn.ablations' must list at least two ablations");
    l.ablations.clear();
    for (std::size_t i = 0; i < a->size(); ++i) {
      ConfigReader ar((*a)[i], "learn.ablations[" + std::to_string(i) + "]");
      learn::Ablation ab;
      ab.name = ar.require<std::string>("name");
      ab.groups = parse_feature_groups(ar.require<std::vector<std::string>>("groups"));
      ar.finish();
      l.ablations.push_back(ab);
    }
  }
  auto& e = l.experiment;
  e.seed = seed;
  e.train_fraction = r.get("train_fraction", e.train_fraction);
  e.folds = r.get("folds", e.folds);
  if (const Json* b = r.raw("base")) {
    if (!b->is_array()) throw ConfigError("'learn.base' must be an array of classifier names");
    e.base.clear();
    for (const auto& v : *b) {
      if (!v.is_string()) throw ConfigError("'learn.base' entries must be strings");
      e.base.push_back(learn::parse_classifier_kind(v.get<std::string>()));
    }
  }
  if (auto d = r.child("defaults")) e.defaults = read_hyperparams(*d);
  if (auto g = r.child("grid")) e.grid = read_grid(*g);
  if (auto en = r.child("ensemble")) {
    e.search.step = en->get("step", e.search.step);
    e.search.mode = learn::parse_search_mode(en->get<std::string>("mode", std::string(learn::to_string(e.search.mode))));
    e.search.budget = en->get("budget", e.search.budget);
    e.search.max_sweeps = en->get("max_sweeps", e.search.max_sweeps);
    en->finish();
    if (!(e.search.budget > 0)) throw ConfigError("ensemble budget must be positive");
    if (e.search.max_sweeps < 1) throw ConfigError("ensemble max_sweeps must be at least 1");
  }
  r.finish();
  e.validate();
  for (auto k : e.base) e.grid.expand(k, e.defaults);
  return l;
}

}  // namespace detail

/// Parses and validates a configuration document. Relative paths resolve against `base_dir`.
inline RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir, const ConfigOverrides& ov = {}) {
  RunConfig cfg;
  cfg.source = doc;
  cfg.overrides = ov;
  cfg.base_dir = base_dir;
  detail::ConfigReader root(doc, "");
  cfg.seed = ov.seed.value_or(root.get<std::uint64_t>("seed", cfg.seed));
  auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : base_dir / p; };
  cfg.out_dir = resolve(root.get<std::string>("output", "out"));
  if (ov.out) cfg.out_dir = *ov.out;
  cfg.threads = ov.threads ? *ov.threads : 1;
  if (cfg.threads == 0) throw ConfigError("--threads must be at least 1");

  if (auto s = root.child("synth")) cfg.synth = detail::read_synth(*s, cfg.seed);

  auto& in = cfg.ingest;
  {
    auto r = root.child("ingest");
    if (!r && !cfg.synth) throw ConfigError("config needs an 'ingest' section (or a 'synth' section)");
    Json empty = Json::object();
    detail::ConfigReader rr = r ? *r : detail::ConfigReader(empty, "ingest");
    const bool any_path = rr.has("comm") || rr.has("wearable") || rr.has("survey");
    if (any_path || !cfg.synth) {
      in.comm = resolve(rr.require<std::string>("comm"));
      in.wearable = resolve(rr.require<std::string>("wearable"));
      in.survey = resolve(rr.require<std::string>("survey"));
    } else {
      in.inputs_from_synth = true;
      in.comm = cfg.out_dir / "synth" / "comm.csv";
      in.wearable = cfg.out_dir / "synth" / "wearable.csv";
      in.survey = cfg.out_dir / "synth" / "survey.csv";
    }
    if (rr.has("study_start") || !cfg.synth) {
      in.study_start = detail::config_date(rr.require<std::string>("study_start"), "ingest.study_start");
      in.study_end = detail::config_date(rr.require<std::string>("study_end"), "ingest.study_end");
    } else {
      in.study_start = cfg.synth->start;
      in.study_end = detail::config_date(rr.get<std::string>("study_end", format_date(cfg.synth->end())),
                                         "ingest.study_end");
    }
    if (in.study_end <= in.study_start) throw ConfigError("'ingest.study_end' must be after 'ingest.study_start'");
    in.compliance_threshold = rr.get("compliance_threshold", in.compliance_threshold);
    check_threshold(in.compliance_threshold);
    in.parse.max_malformed_fraction = rr.get("max_malformed_fraction", in.parse.max_malformed_fraction);
    if (!(in.parse.max_malformed_fraction >= 0 && in.parse.max_malformed_fraction <= 1)) {
      throw ConfigError("'ingest.max_malformed_fraction' must lie in [0, 1]");
    }
    const char delim = detail::parse_delimiter(rr.get<std::string>("delimiter", ","));
    if (auto c = rr.child("columns")) detail::read_columns(*c, in);
    in.comm_columns.delimiter = delim;
    in.wearable_columns.delimiter = delim;
    in.survey_columns.delimiter = delim;
    rr.finish();
  }

  if (auto g = root.child("graph")) {
    const auto f = g->get<std::int64_t>("min_frequency", 3);
    if (f < 1) throw ConfigError("'graph.min_frequency' must be at least 1");
    cfg.min_frequency = static_cast<std::size_t>(f);
    g->finish();
  }

  if (auto a = root.child("analysis")) {
    cfg.analysis.threshold = a->get("threshold", cfg.analysis.threshold);
    cfg.analysis.aggregator = parse_aggregator(a->get<std::string>("aggregator", "mean"));
    cfg.analysis.alpha = a->get("alpha", cfg.analysis.alpha);
    a->finish();
  }
  if (ov.threshold) cfg.analysis.threshold = *ov.threshold;
  if (!(cfg.analysis.threshold > 0 && cfg.analysis.threshold <= 1)) {
    throw ConfigError("correlation threshold must lie in (0, 1]");
  }
  if (!(cfg.analysis.alpha > 0 && cfg.analysis.alpha < 1)) throw ConfigError("'analysis.alpha' must lie in (0, 1)");

  if (auto l = root.child("learn")) {
    cfg.learn = detail::read_learn(*l, cfg.seed);
  } else {
    cfg.learn.experiment.seed = cfg.seed;
  }
  cfg.learn.experiment.threads = cfg.threads;

  if (auto rep = root.child("report")) {
    cfg.include_timings = rep->get("include_timings", false);
    rep->finish();
  }
  root.finish();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& ov = {}) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  Json doc;
  try {
    doc = Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path(), ov);
}

}  // namespace netcare
