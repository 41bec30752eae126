#pragma once

// Synthetic study generator: participants with friend lists (including outsiders), a weekly
// latent activity series per person that drives contact volume, wearable minutes whose daily
// active time can be tied to the same latent series, and survey labels binned from a chosen
// person-level signal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcare/core.hpp"
#include "netcare/ingest.hpp"

namespace netcare {

enum class LabelSignal : std::uint8_t { none, structural, behavioral, mixed };

inline std::string_view to_string(LabelSignal s) {
  switch (s) {
    case LabelSignal::none: return "none";
    case LabelSignal::structural: return "structural";
    case LabelSignal::behavioral: return "behavioral";
    case LabelSignal::mixed: return "mixed";
  }
  return "none";
}

inline LabelSignal parse_label_signal(std::string_view s) {
  if (s == "none") return LabelSignal::none;
  if (s == "structural") return LabelSignal::structural;
  if (s == "behavioral") return LabelSignal::behavioral;
  if (s == "mixed") return LabelSignal::mixed;
  throw ConfigError("unknown label signal '" + std::string(s) + "' (expected none, structural, behavioral or mixed)");
}

struct SynthConfig {
  int n_participants = 100;
  int n_outsiders = 60;
  int n_weeks = 22;
  double coupling_rho = 0.0;
  double coupled_fraction = 0.0;
  LabelSignal label_signal = LabelSignal::none;
  double label_noise = 0.0;
  std::uint64_t seed = 7;
  Date start = Date{std::chrono::year{2016} / 8 / 29};

  // daily active minutes: weekly level sd and day-to-day sd
  double active_week_sd = 30.0;
  double active_day_sd = 20.0;

  /// Largest |coupling_rho| reachable given the day-to-day noise in weekly means.
  double achievable_rho() const {
    return 1.0 / std::sqrt(1.0 + active_day_sd * active_day_sd / (7.0 * active_week_sd * active_week_sd));
  }

  void validate() const {
    if (n_participants < 2) throw ConfigError("synth needs at least 2 participants");
    if (n_outsiders < 0) throw ConfigError("synth outsider count must be non-negative");
    if (n_weeks < 3) throw ConfigError("synth needs at least 3 weeks");
    if (!(coupling_rho >= -1 && coupling_rho <= 1)) throw ConfigError("coupling_rho must lie in [-1, 1]");
    if (!(coupled_fraction >= 0 && coupled_fraction <= 1)) throw ConfigError("coupled_fraction must lie in [0, 1]");
    if (!(label_noise >= 0 && label_noise <= 1)) throw ConfigError("label_noise must lie in [0, 1]");
    if (!(active_week_sd > 0) || !(active_day_sd >= 0)) throw ConfigError("activity noise levels must be positive");
    if (std::abs(coupling_rho) > achievable_rho()) {
      throw ConfigError("coupling_rho " + format_double(coupling_rho) + " is not achievable; the bound under the " +
                        "configured day-to-day noise is " + format_double(achievable_rho()));
    }
  }

  Date end() const { return start + std::chrono::days{7 * n_weeks}; }
};

struct SynthPerson {
  PersonId id;
  bool coupled = false;
  Gender gender = Gender::male;
  double sociability = 0.0;  // drives friend count and contact volume
  double activity = 0.0;     // drives daily active minutes
  double hr_base = 68.0;
  std::vector<std::size_t> friends;  // indices into participants (< n) or outsiders (>= n)
};

class SynthGenerator {
 public:
  explicit SynthGenerator(SynthConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    weeks_ = make_weeks(cfg_.start, cfg_.end());
    beta_ = cfg_.coupling_rho / cfg_.achievable_rho();
    make_persons();
    make_latents();
    make_events();
    make_surveys();
  }

  const SynthConfig& config() const { return cfg_; }
  const std::vector<WeekIndex>& weeks() const { return weeks_; }
  const std::vector<SynthPerson>& persons() const { return persons_; }
  const std::vector<CommEvent>& events() const { return events_; }
  const std::vector<SurveyRecord>& surveys() const { return surveys_; }

  std::set<PersonId> roster() const {
    std::set<PersonId> r;
    for (const auto& p : persons_) r.insert(p.id);
    return r;
  }

  /// Planted weekly latent value for participant p.
  double latent(std::size_t p, std::size_t w) const { return latent_[p * weeks_.size() + w]; }

  /// Minute records for one participant-week, sorted by timestamp; regenerated on each call.
  std::vector<MinuteRecord> minutes(std::size_t p, std::size_t w) const {
    const auto& person = persons_[p];
    Rng rng(derive_seed(cfg_.seed, 0x3a11, p, w));
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    const bool low_wear = unif(rng) < kLowWearWeekRate;
    const double wear_mean = low_wear ? 0.5 : kWearRate;
    const double mu = 150.0 + 30.0 * person.activity;
    const double level = person.coupled ? beta_ * latent(p, w) + std::sqrt(1.0 - beta_ * beta_) * gauss(rng) : gauss(rng);

    std::vector<MinuteRecord> out;
    out.reserve(static_cast<std::size_t>(kMinutesPerWeek));
    const Timestamp week_start = weeks_[w].start_ts();
    std::array<std::uint8_t, kMinutesPerDay> state{};  // 0 off, 1 sedentary, 2 light, 3 fair, 4 very
    for (int d = 0; d < 7; ++d) {
      const double wear = std::clamp(wear_mean + 0.04 * gauss(rng), 0.0, 1.0);
      const auto off = static_cast<int>(std::lround((1.0 - wear) * kMinutesPerDay));
      const int off_start = off <= kNightEnd ? static_cast<int>(unif(rng) * (kNightEnd - off + 1)) : 0;
      state.fill(1);
      for (int m = off_start; m < std::min<int>(off_start + off, kMinutesPerDay); ++m) state[static_cast<std::size_t>(m)] = 0;

      const double active = mu + cfg_.active_week_sd * level + cfg_.active_day_sd * gauss(rng);
      int need = std::clamp(static_cast<int>(std::lround(active)), 0, kDayEnd - kNightEnd);
      int avail = 0;
      for (int m = kNightEnd; m < kDayEnd; ++m) avail += state[static_cast<std::size_t>(m)] != 0 ? 1 : 0;
      need = std::min(need, avail);
      // selection sampling over worn daytime minutes
      for (int m = kNightEnd; m < kDayEnd && need > 0; ++m) {
        auto& s = state[static_cast<std::size_t>(m)];
        if (s == 0) continue;
        if (unif(rng) * avail < need) {
          const double u = unif(rng);
          s = u < kVeryShare ? 4 : (u < kVeryShare + kFairShare ? 3 : 2);
          --need;
        }
        --avail;
      }

      for (int m = 0; m < kMinutesPerDay; ++m) {
        MinuteRecord r;
        r.person = person.id;
        r.timestamp = week_start + (d * kMinutesPerDay + m) * 60;
        const auto s = state[static_cast<std::size_t>(m)];
        if (s != 0) {
          const auto st = static_cast<ActivityState>(s - 1);
          r.activity_state = st;
          const double hr = std::clamp(std::round(person.hr_base + kHrLift[s - 1] + 4.0 * gauss(rng)), 40.0, 200.0);
          r.heart_rate = hr;
          r.hr_zone = hr < 94 ? HrZone::out_of_range : (hr < 131 ? HrZone::fat_burn : (hr < 159 ? HrZone::cardio : HrZone::peak));
          if (kStepRate[s - 1] > 0) r.steps = std::poisson_distribution<std::int64_t>(kStepRate[s - 1])(rng);
        }
        out.push_back(std::move(r));
      }
    }
    return out;
  }

  /// Batch source for behavior_from_batches: every participant-week in (person, week) order.
  template <class Visit>
  void visit_minutes(Visit&& visit) const {
    for (std::size_t p = 0; p < persons_.size(); ++p) {
      for (std::size_t w = 0; w < weeks_.size(); ++w) {
        const auto recs = minutes(p, w);
        visit(persons_[p].id, w, std::span<const MinuteRecord>(recs));
      }
    }
  }

  nlohmann::ordered_json ground_truth() const {
    nlohmann::ordered_json j;
    j["seed"] = cfg_.seed;
    j["n_participants"] = cfg_.n_participants;
    j["n_outsiders"] = cfg_.n_outsiders;
    j["n_weeks"] = cfg_.n_weeks;
    j["study_start"] = format_date(cfg_.start);
    j["study_end"] = format_date(cfg_.end());
    j["coupling_rho"] = cfg_.coupling_rho;
    j["coupled_fraction"] = cfg_.coupled_fraction;
    j["achievable_rho"] = cfg_.achievable_rho();
    j["label_signal"] = to_string(cfg_.label_signal);
    j["label_noise"] = cfg_.label_noise;
    auto& ps = j["persons"] = nlohmann::ordered_json::array();
    for (const auto& p : persons_) {
      ps.push_back({{"id", p.id.value},
                    {"coupled", p.coupled},
                    {"sociability", p.sociability},
                    {"activity", p.activity},
                    {"friends", p.friends.size()}});
    }
    return j;
  }

  /// Writes comm.csv, wearable.csv, survey.csv and ground_truth.json into `dir`.
  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
      std::ofstream f(dir / name, std::ios::binary);
      if (!f) throw IoError("cannot write " + (dir / name).string());
      return f;
    };
    {
      auto f = open("comm.csv");
      write_comm_log(f, events_);
    }
    {
      auto f = open("wearable.csv");
      write_wearable_header(f);
      visit_minutes([&](const PersonId&, std::size_t, std::span<const MinuteRecord> recs) {
        for (const auto& r : recs) write_minute_row(f, r, ',');
      });
    }
    {
      auto f = open("survey.csv");
      write_survey(f, surveys_);
    }
    {
      auto f = open("ground_truth.json");
      f << ground_truth().dump(2) << '\n';
    }
  }

 private:
  using Rng = std::mt19937_64;

  static constexpr double kFriendBase = 10.0;
  static constexpr double kFriendSlope = 5.0;
  static constexpr int kMaxFriends = 26;
  static constexpr double kOutsiderShare = 0.3;
  static constexpr double kContactBase = 0.45;   // share of friends contacted in an average week
  static constexpr double kContactSlope = 0.30;  // change in that share per unit of weekly latent
  static constexpr double kWearRate = 0.93;
  static constexpr double kLowWearWeekRate = 0.06;
  static constexpr int kNightEnd = 420;   // 07:00
  static constexpr int kDayEnd = 1380;    // 23:00
  static constexpr double kVeryShare = 0.15;
  static constexpr double kFairShare = 0.20;
  static constexpr std::array<double, 4> kHrLift{0.0, 12.0, 25.0, 45.0};
  static constexpr std::array<double, 4> kStepRate{0.0, 35.0, 85.0, 125.0};

  void make_persons() {
    Rng rng(derive_seed(cfg_.seed, 0x9e7));
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    const auto n = static_cast<std::size_t>(cfg_.n_participants);
    const auto k_coupled = static_cast<std::size_t>(std::llround(cfg_.coupled_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    std::vector<bool> coupled(n, false);
    for (std::size_t i = 0; i < k_coupled; ++i) coupled[order[i]] = true;

    persons_.resize(n);
    std::vector<int> target(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& p = persons_[i];
      p.id = PersonId(id_for('P', i));
      p.coupled = coupled[i];
      p.gender = unif(rng) < 0.5 ? Gender::female : Gender::male;
      p.sociability = gauss(rng);
      p.activity = gauss(rng);
      p.hr_base = 68.0 + 6.0 * gauss(rng);
      target[i] = std::clamp(static_cast<int>(std::lround(kFriendBase + kFriendSlope * p.sociability)), 2, kMaxFriends);
    }
    // Participant friends are drawn with probability proportional to the candidate's own
    // friend count (weighted sampling without replacement), so sociable people are also
    // contacted more often.
    std::vector<std::pair<double, std::size_t>> keys;
    for (std::size_t i = 0; i < n; ++i) {
      auto& p = persons_[i];
      const int f = target[i];
      const int f_out = std::min(cfg_.n_outsiders > 0 ? static_cast<int>(std::lround(kOutsiderShare * f)) : 0, cfg_.n_outsiders);
      const int f_in = std::min<int>(f - f_out, static_cast<int>(n) - 1);
      keys.clear();
      for (std::size_t c = 0; c < n; ++c) {
        if (c == i) continue;
        keys.emplace_back(std::log(1.0 - unif(rng)) / static_cast<double>(target[c]), c);
      }
      std::partial_sort(keys.begin(), keys.begin() + f_in, keys.end(), std::greater<>());
      for (int k = 0; k < f_in; ++k) p.friends.push_back(keys[static_cast<std::size_t>(k)].second);
      std::vector<std::size_t> cand(static_cast<std::size_t>(cfg_.n_outsiders));
      std::iota(cand.begin(), cand.end(), n);
      for (int k = 0; k < f_out; ++k) {
        const auto j = static_cast<std::size_t>(k) + static_cast<std::size_t>(rng() % (cand.size() - static_cast<std::size_t>(k)));
        std::swap(cand[static_cast<std::size_t>(k)], cand[j]);
        p.friends.push_back(cand[static_cast<std::size_t>(k)]);
      }
    }
  }

  void make_latents() {
    Rng rng(derive_seed(cfg_.seed, 0x1a7));
    std::normal_distribution<double> gauss;
    const std::size_t w = weeks_.size();
    std::vector<double> common(w);
    for (auto& c : common) c = gauss(rng);
    latent_.resize(persons_.size() * w);
    for (std::size_t p = 0; p < persons_.size(); ++p) {
      for (std::size_t k = 0; k < w; ++k) latent_[p * w + k] = std::sqrt(0.5) * common[k] + std::sqrt(0.5) * gauss(rng);
    }
  }

  PersonId node_id(std::size_t idx) const {
    const auto n = persons_.size();
    return idx < n ? persons_[idx].id : PersonId(id_for('X', idx - n));
  }

  void make_events() {
    const std::size_t n = persons_.size();
    for (std::size_t p = 0; p < n; ++p) {
      const auto& person = persons_[p];
      const auto f = static_cast<int>(person.friends.size());
      for (std::size_t w = 0; w < weeks_.size(); ++w) {
        Rng rng(derive_seed(cfg_.seed, 0xc0, p, w));
        std::uniform_real_distribution<double> unif;
        std::poisson_distribution<int> extra(0.8);
        std::exponential_distribution<double> call_len(1.0 / 90.0);
        const int k = std::clamp(static_cast<int>(std::lround(f * (kContactBase + kContactSlope * latent(p, w)))), 0, f);
        auto friends = person.friends;
        for (int a = 0; a < k; ++a) {
          const std::size_t j = static_cast<std::size_t>(a) + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(f - a));
          std::swap(friends[static_cast<std::size_t>(a)], friends[j]);
          const int count = 1 + extra(rng);
          for (int e = 0; e < count; ++e) add_event(rng, unif, call_len, w, person.id, node_id(friends[static_cast<std::size_t>(a)]));
        }
        // occasional one-off texts to strangers; these rarely survive the frequency filter
        if (cfg_.n_outsiders > 0 && unif(rng) < 0.3) {
          const auto stranger = n + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(cfg_.n_outsiders));
          add_event(rng, unif, call_len, w, person.id, node_id(stranger));
        }
      }
    }
    std::sort(events_.begin(), events_.end(), [](const CommEvent& a, const CommEvent& b) {
      return std::tie(a.timestamp, a.src, a.dst) < std::tie(b.timestamp, b.src, b.dst);
    });
  }

  void add_event(Rng& rng, std::uniform_real_distribution<double>& unif, std::exponential_distribution<double>& call_len,
                 std::size_t w, const PersonId& a, const PersonId& b) {
    CommEvent e;
    e.timestamp = weeks_[w].start_ts() + static_cast<Timestamp>(unif(rng) * 7 * kSecondsPerDay);
    const bool swap = unif(rng) < 0.5;
    e.src = swap ? b : a;
    e.dst = swap ? a : b;
    if (unif(rng) < 0.35) {
      e.kind = CommKind::call;
      e.answered = unif(rng) < 0.85;
      e.duration_s = e.answered ? std::max<std::int64_t>(1, std::llround(call_len(rng))) : 0;
    }
    events_.push_back(std::move(e));
  }

  void make_surveys() {
    Rng rng(derive_seed(cfg_.seed, 0x5e));
    std::uniform_real_distribution<double> unif;
    const std::size_t n = persons_.size();
    std::vector<double> signal(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = persons_[i];
      switch (cfg_.label_signal) {
        case LabelSignal::none: signal[i] = 0.0; break;
        case LabelSignal::structural: signal[i] = p.sociability; break;
        case LabelSignal::behavioral: signal[i] = p.activity; break;
        case LabelSignal::mixed: signal[i] = (p.sociability + p.activity) / std::sqrt(2.0); break;
      }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return signal[a] < signal[b]; });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

    surveys_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = surveys_[i];
      s.person = persons_[i].id;
      s.gender = persons_[i].gender;
      for (auto t : {WellnessTarget::stress, WellnessTarget::happiness, WellnessTarget::positive_attitude,
                     WellnessTarget::self_health}) {
        const int levels = level_count(t);
        int lvl = 1 + static_cast<int>(rank[i] * static_cast<std::size_t>(levels) / n);
        if (cfg_.label_signal == LabelSignal::none || unif(rng) < cfg_.label_noise) {
          lvl = 1 + static_cast<int>(unif(rng) * levels);
        }
        level_ref(s, t) = std::min(lvl, levels);
      }
    }
  }

  static std::optional<int>& level_ref(SurveyRecord& s, WellnessTarget t) {
    switch (t) {
      case WellnessTarget::stress: return s.stress;
      case WellnessTarget::happiness: return s.happiness;
      case WellnessTarget::positive_attitude: return s.positive_attitude;
      case WellnessTarget::self_health: return s.self_health;
    }
    return s.stress;
  }

  static std::string id_for(char prefix, std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i + 1);
    return buf;
  }

  SynthConfig cfg_;
  std::vector<WeekIndex> weeks_;
  double beta_ = 0.0;
  std::vector<SynthPerson> persons_;
  std::vector<double> latent_;
  std::vector<CommEvent> events_;
  std::vector<SurveyRecord> surveys_;
};

}  // namespace netcare
