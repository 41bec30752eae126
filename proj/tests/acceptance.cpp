#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <catch_amalgamated.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "netcare/features.hpp"
#include "netcare/learn/experiment.hpp"
#include "netcare/pipeline.hpp"
#include "netcare/report.hpp"
#include "netcare/stats.hpp"
#include "netcare/synth.hpp"
#include "oracles.hpp"

using namespace netcare;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void verdict(int n, bool pass, const std::string& detail) {
  std::cout << "criterion " << n << ": " << (pass ? "PASS" : "FAIL") << " (" << detail << ")" << std::endl;
}

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

struct SynthPanel {
  std::vector<PersonPanel> panel;
  std::size_t weeks = 0;
};

SynthPanel synth_panel(const SynthConfig& c) {
  const SynthGenerator g(c);
  const auto beh = behavior_from_batches([&](auto&& v) { g.visit_minutes(v); }, g.weeks(), 0.8);
  const auto st = compute_structure(g.events(), g.weeks(), g.roster(), 3, 1);
  return {build_panel(beh.table, st.table, g.weeks()), g.weeks().size()};
}

double relative_error(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300}); }

}  // namespace

TEST_CASE("criterion 1: graph metrics equal brute-force oracles", "[c1]") {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  const double probs[] = {0.2, 0.5, 0.8};
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial) % 8;
    const auto a = oracle::random_adjacency(n, probs[trial % 3], rng);
    const auto g = oracle::to_graph(a);
    const auto want = oracle::brute_force(a);
    const auto local = degree_and_triangles(g);
    const auto bc = betweenness(g, 1);
    const auto cl = closeness(g);
    for (std::size_t v = 0; v < n; ++v) {
      worst = std::max({worst, std::fabs(static_cast<double>(local[v].degree) - want.degree[v]),
                        std::fabs(static_cast<double>(local[v].triangles) - want.triangles[v]),
                        std::fabs(local[v].clustering - want.clustering[v]), std::fabs(bc[v] - want.betweenness[v]),
                        std::fabs(cl[v].scaled - want.closeness[v])});
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-9 && secs < 10.0;
  verdict(1, pass, "200 graphs, max abs error " + num(worst) + ", " + num(secs) + " s");
  CHECK(pass);
}

TEST_CASE("criterion 2: exact betweenness at n=10000, m=50000 single-threaded", "[c2]") {
  std::mt19937_64 rng(2);
  const NodeIndex n = 10000;
  std::uniform_int_distribution<NodeIndex> pick(0, n - 1);
  std::set<std::pair<NodeIndex, NodeIndex>> edges;
  while (edges.size() < 50000) {
    auto u = pick(rng), v = pick(rng);
    if (u == v) continue;
    edges.emplace(std::min(u, v), std::max(u, v));
  }
  const std::vector<std::pair<NodeIndex, NodeIndex>> list(edges.begin(), edges.end());
  const Graph g(n, list);
  const auto t0 = Clock::now();
  const auto bc = betweenness(g, 1);
  const double secs = seconds_since(t0);
  double sum = 0;
  for (double b : bc) sum += b;
  const bool pass = secs < 10.0 && std::isfinite(sum) && sum > 0;
  verdict(2, pass, "n=" + std::to_string(g.node_count()) + " m=" + std::to_string(g.edge_count()) + ", " + num(secs) + " s");
  CHECK(pass);
}

TEST_CASE("criterion 3: statistics match independent oracles", "[c3]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> len(3, 40);

  double ncc_err = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = len(rng);
    WeeklySeries x, y;
    std::vector<double> xs, ys;
    const double mix = gauss(rng);
    for (int t = 0; t < n; ++t) {
      xs.push_back(10 * gauss(rng) + 3);
      ys.push_back(mix * xs.back() + gauss(rng));
      x.emplace_back(xs.back());
      y.emplace_back(ys.back());
    }
    const auto r = ncc(x, y);
    ncc_err = std::max(ncc_err, r ? std::fabs(*r - oracle::pearson(xs, ys)) : 1.0);
  }

  double test_err = 0;
  double ft2_err = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a, b;
    const int na = len(rng), nb = len(rng);
    const double shift = 0.5 * gauss(rng), scale = 1 + std::fabs(gauss(rng));
    for (int k = 0; k < na; ++k) a.push_back(gauss(rng));
    for (int k = 0; k < nb; ++k) b.push_back(shift + scale * gauss(rng));

    auto moments = [](const std::vector<double>& v) {
      long double m = 0;
      for (double x : v) m += x;
      m /= v.size();
      long double ss = 0;
      for (double x : v) ss += (x - m) * (x - m);
      return std::pair<double, double>{static_cast<double>(m), static_cast<double>(ss / (v.size() - 1))};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double qa = va / na, qb = vb / nb;
    const double t = (ma - mb) / std::sqrt(qa + qb);
    const double df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1) + qb * qb / (nb - 1));
    const double p = 2 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::fabs(t)));
    const auto w = welch_t_test(a, b);
    test_err = std::max({test_err, relative_error(w.statistic, t), relative_error(w.df1, df), std::fabs(w.p_value - p)});

    const int k = 2 + i % 4;
    std::vector<std::vector<double>> groups(static_cast<std::size_t>(k));
    for (int gi = 0; gi < k; ++gi) {
      const int n = len(rng);
      const double mu = 0.4 * gauss(rng);
      for (int j = 0; j < n; ++j) groups[static_cast<std::size_t>(gi)].push_back(mu + gauss(rng));
    }
    long double grand = 0;
    std::size_t total = 0;
    for (const auto& g : groups) {
      for (double x : g) grand += x;
      total += g.size();
    }
    grand /= total;
    long double ssb = 0, ssw = 0;
    for (const auto& g : groups) {
      const auto [m, v] = moments(g);
      ssb += g.size() * (m - grand) * (m - grand);
      ssw += v * (g.size() - 1);
    }
    const double d1 = k - 1.0, d2 = static_cast<double>(total) - k;
    const double f = static_cast<double>((ssb / d1) / (ssw / d2));
    const double pf = boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), f));
    const auto an = one_way_anova(groups);
    test_err = std::max({test_err, relative_error(an.statistic, f), std::fabs(an.p_value - pf)});

    std::vector<std::vector<double>> two{a, b};
    const auto an2 = one_way_anova(two);
    const double sp2 = (va * (na - 1) + vb * (nb - 1)) / (na + nb - 2);
    const double tp = (ma - mb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
    ft2_err = std::max(ft2_err, relative_error(an2.statistic, tp * tp));
  }
  const bool pass = ncc_err <= 1e-12 && test_err <= 1e-6 && ft2_err <= 1e-9;
  verdict(3, pass, "ncc max error " + num(ncc_err) + ", Welch/ANOVA max error " + num(test_err) +
                       ", |F - t^2| relative " + num(ft2_err));
  CHECK(pass);
}

TEST_CASE("criterion 4: uncoupled data rarely crosses the correlation threshold", "[c4]") {
  SynthConfig c;
  c.n_participants = 1000;
  c.n_outsiders = 500;
  c.n_weeks = 22;
  c.coupling_rho = 0.0;
  c.seed = 4;
  const auto sp = synth_panel(c);
  const auto census = person_census(std::span<const PersonPanel>(sp.panel), 0.5);
  double worst = 0;
  std::string where;
  for (std::size_t s = 0; s < kStructuralSeries; ++s) {
    for (std::size_t b = 0; b < kBehavioralSeries; ++b) {
      const double f = static_cast<double>(census.pair_counts[s][b]) / static_cast<double>(census.total_persons);
      if (f > worst) {
        worst = f;
        where = structural_series_name(s) + "/" + std::string(kBehaviorSeriesNames[b]);
      }
    }
  }
  const bool pass = census.total_persons == 1000 && worst <= 0.10;
  verdict(4, pass, std::to_string(census.total_persons) + " persons, largest pair fraction " + num(worst) + " (" +
                       where + ")");
  CHECK(pass);
}

TEST_CASE("criterion 5: planted degree-steps coupling is recovered", "[c5]") {
  SynthConfig c;
  c.n_participants = 300;
  c.n_outsiders = 150;
  c.n_weeks = 22;
  c.coupling_rho = 0.9;
  c.coupled_fraction = 0.6;
  c.seed = 7;
  const auto sp = synth_panel(c);
  const auto per_person = person_correlations(sp.panel);
  const std::size_t steps = 1, p_degree = 0, w_degree = 5;
  std::size_t either = 0, participant = 0, whole = 0;
  auto hit = [](const std::optional<double>& r) { return r && std::fabs(*r) >= 0.5; };
  for (const auto& t : per_person) {
    const bool p = hit(t.r[p_degree][steps]);
    const bool w = hit(t.r[w_degree][steps]);
    participant += p ? 1 : 0;
    whole += w ? 1 : 0;
    either += (p || w) ? 1 : 0;
  }
  const double n = static_cast<double>(per_person.size());
  const auto pop = population_table(sp.panel, sp.weeks);
  const double pop_p = pop.table.r[p_degree][steps].value_or(0.0);
  const double pop_w = pop.table.r[w_degree][steps].value_or(0.0);
  const double flagged = either / n;
  const bool pass = flagged >= 0.5 && std::min(pop_p, pop_w) >= 0.7;
  verdict(5, pass, "degree/steps flagged " + num(flagged) + " of " + std::to_string(per_person.size()) +
                       " persons (participant " + num(participant / n) + ", whole " + num(whole / n) +
                       "), population r participant " + num(pop_p) + ", whole " + num(pop_w));
  CHECK(pass);
}

TEST_CASE("criterion 6: structure lifts prediction under a structural label signal", "[c6]") {
  double uplift_sum = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig c;
    c.n_participants = 240;
    c.n_outsiders = 120;
    c.n_weeks = 6;
    c.label_signal = LabelSignal::structural;
    c.label_noise = 0.2;
    c.seed = seed;
    const SynthGenerator g(c);
    const auto beh = behavior_from_batches([&](auto&& v) { g.visit_minutes(v); }, g.weeks(), 0.8);
    const auto st = compute_structure(g.events(), g.weeks(), g.roster(), 3, 1);
    const auto m = assemble_matrix(beh.table, st.table, g.surveys(), WellnessTarget::stress,
                                   {FeatureGroup::gender, FeatureGroup::behavior, FeatureGroup::structure});
    learn::ExperimentConfig ec;
    ec.seed = seed;
    ec.split = learn::SplitMode::person;
    const auto r = learn::run_experiment(m, ec);
    const double base = r.ablations.front().report.macro_f1;
    const double combined = r.ablations.back().report.macro_f1;
    uplift_sum += combined - base;
    per_seed += (seed > 1 ? ", " : "") + num(base) + "->" + num(combined);
  }
  const double mean = uplift_sum / 5;
  const bool pass = mean >= 0.10;
  verdict(6, pass, "mean macro-F1 uplift " + num(mean) + " over 5 seeds, person split [" + per_seed + "]");
  CHECK(pass);
}

TEST_CASE("criterion 7: exhaustive ensemble search is grid-optimal", "[c7]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int problems = 0, mismatches = 0;
  for (std::size_t j = 2; j <= 3; ++j) {
    for (std::size_t m = 1; m <= 2; ++m) {
      for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 10 + static_cast<std::size_t>(trial) * 3;
        std::vector<learn::Matrix> p(m, learn::Matrix(n, j));
        for (auto& pm : p) {
          for (std::size_t r = 0; r < n; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < j; ++c) s += pm(r, c) = u(rng);
            for (std::size_t c = 0; c < j; ++c) pm(r, c) /= s;
          }
        }
        std::vector<int> y(n);
        for (auto& v : y) v = static_cast<int>(rng() % j);
        learn::SearchOptions so;
        so.step = 0.5;
        so.mode = learn::SearchMode::exhaustive;
        const auto w = learn::ensemble_weight_search(p, y, so);

        // every row of weights in {0, 0.5, 1} summing to one, for every classifier
        std::vector<std::vector<double>> rows;
        for (std::size_t a = 0; a < j; ++a) {
          for (std::size_t b = a; b < j; ++b) {
            std::vector<double> row(j, 0.0);
            row[a] += 0.5;
            row[b] += 0.5;
            rows.push_back(row);
          }
        }
        double best = -1;
        std::vector<std::size_t> idx(m, 0);
        while (true) {
          std::vector<int> pred(n);
          for (std::size_t r = 0; r < n; ++r) {
            std::vector<double> score(j, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t c = 0; c < j; ++c) score[c] += rows[idx[i]][c] * p[i](r, c);
            }
            pred[r] = static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
          }
          std::vector<double> tp(j, 0), pc(j, 0), ac(j, 0);
          for (std::size_t r = 0; r < n; ++r) {
            pc[static_cast<std::size_t>(pred[r])] += 1;
            ac[static_cast<std::size_t>(y[r])] += 1;
            if (pred[r] == y[r]) tp[static_cast<std::size_t>(y[r])] += 1;
          }
          double f1 = 0;
          int present = 0;
          for (std::size_t c = 0; c < j; ++c) {
            if (ac[c] == 0) continue;
            ++present;
            const double prec = pc[c] > 0 ? tp[c] / pc[c] : 0, rec = tp[c] / ac[c];
            f1 += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
          }
          best = std::max(best, f1 / present);
          std::size_t k = m;
          while (k > 0 && ++idx[k - 1] == rows.size()) idx[--k] = 0;
          if (k == 0) break;
        }
        ++problems;
        if (w.validation_score != best) ++mismatches;
      }
    }
  }
  const bool pass = mismatches == 0;
  verdict(7, pass, std::to_string(problems) + " problems with J in {2,3}, M in {1,2}, step 0.5; " +
                       std::to_string(mismatches) + " mismatches");
  CHECK(pass);
}

TEST_CASE("criterion 8: weighted-vote arithmetic", "[c8]") {
  const std::vector<double> p1{0.6, 0.4}, p2{0.3, 0.7}, p3{0.4, 0.6};
  const std::vector<std::span<const double>> ps{p1, p2, p3};
  const std::vector<double> uniform(6, 1.0 / 3.0);
  const int hand = learn::ensemble_vote(uniform, ps) + 1;
  const std::vector<double> q1{0.5, 0.5}, q2{0.2, 0.8}, q3{0.8, 0.2};
  const std::vector<std::span<const double>> tie{q1, q2, q3};
  const int tied = learn::ensemble_vote(uniform, tie) + 1;
  const bool pass = hand == 2 && tied == 1;
  verdict(8, pass, "hand example -> class " + std::to_string(hand) + ", tie -> class " + std::to_string(tied));
  CHECK(pass);
}

TEST_CASE("criterion 9: improvement row matches reference percentages", "[c9]") {
  struct Reference {
    const char* target;
    std::vector<double> base, combined;
    std::vector<int> printed;
  };
  const std::vector<Reference> tables{
      {"stress", {0.42, 0.18, 0.53, 0.64, 0.34}, {0.58, 0.46, 0.63, 0.70, 0.55}, {38, 155, 19, 9, 62}},
      {"happiness", {0.31, 0.06, 0.31, 0.62, 0.24}, {0.51, 0.43, 0.52, 0.67, 0.44}, {65, 617, 68, 8, 83}},
      {"positive_attitude",
       {0.31, 0.20, 0.13, 0.22, 0.71, 0.30},
       {0.48, 0.36, 0.37, 0.44, 0.74, 0.47},
       {55, 80, 185, 100, 4, 57}},
      {"self_health", {0.35, 0.29, 0.13, 0.77, 0.20}, {0.54, 0.6, 0.39, 0.79, 0.37}, {54, 107, 200, 3, 85}},
  };
  int pairs = 0, within = 0, worst = 0;
  for (const auto& t : tables) {
    PredictionTable pt;
    pt.target = t.target;
    pt.levels = static_cast<int>(t.base.size()) - 1;
    PredictionRow b{"gender+behavior", t.base[0], {}}, c{"gender+behavior+structure", t.combined[0], {}};
    for (std::size_t l = 1; l < t.base.size(); ++l) {
      b.levels.emplace_back(t.base[l]);
      c.levels.emplace_back(t.combined[l]);
    }
    pt.rows = {b, c};
    const auto text = render_prediction_table(pt);
    const auto line = text.substr(text.find("improvement,") + 12);
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',') && k < t.printed.size()) {
      const int got = std::stoi(cell);
      const int diff = std::abs(got - t.printed[k]);
      worst = std::max(worst, diff);
      within += diff <= 1 ? 1 : 0;
      ++pairs;
      ++k;
    }
  }
  const bool pass = pairs == 21 && within == pairs;
  verdict(9, pass, std::to_string(within) + "/" + std::to_string(pairs) + " pairs within 1 point, largest difference " +
                       std::to_string(worst));
  CHECK(pass);
}

TEST_CASE("criterion 10: byte-identical reruns and logistic gradient check", "[c10]") {
  const auto root = fs::temp_directory_path() / "netcare_acceptance_c10";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "config.json");
    cfg << R"({
  "seed": 10,
  "synth": {"n_participants": 16, "n_outsiders": 8, "n_weeks": 4, "coupling_rho": 0.6, "coupled_fraction": 0.5,
            "label_signal": "structural", "label_noise": 0.2},
  "learn": {"targets": ["stress", "positive_attitude"], "split_modes": ["row", "person"], "folds": 3,
            "ensemble": {"step": 0.25}}
})";
  }
  const std::string cli = NETCARE_CLI;
  int status = 0;
  for (const char* run : {"run_a", "run_b"}) {
    const std::string cmd = "\"" + cli + "\" all --config \"" + (root / "config.json").string() + "\" --out \"" +
                            (root / run).string() + "\" > /dev/null 2>&1";
    status |= std::system(cmd.c_str());
  }
  std::size_t files = 0, differing = 0;
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  std::set<std::string> names_a, names_b;
  if (status == 0) {
    for (const auto& e : fs::recursive_directory_iterator(root / "run_a")) names_a.insert(fs::relative(e.path(), root / "run_a").string());
    for (const auto& e : fs::recursive_directory_iterator(root / "run_b")) names_b.insert(fs::relative(e.path(), root / "run_b").string());
    for (const auto& rel : names_a) {
      if (!fs::is_regular_file(root / "run_a" / rel)) continue;
      ++files;
      if (slurp(root / "run_a" / rel) != slurp(root / "run_b" / rel)) ++differing;
    }
  }
  const bool identical = status == 0 && files > 0 && names_a == names_b && differing == 0;

  std::mt19937_64 rng(10);
  std::normal_distribution<double> gauss;
  double worst = 0;
  for (int problem = 0; problem < 20; ++problem) {
    learn::Dataset d;
    d.num_classes = 2 + problem % 4;
    const std::size_t n = 6 + static_cast<std::size_t>(problem) % 7, p = 1 + static_cast<std::size_t>(problem) % 5;
    d.x = learn::Matrix(n, p);
    for (auto& v : d.x.data) v = gauss(rng);
    for (std::size_t i = 0; i < n; ++i) d.y.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(d.num_classes)));
    std::vector<double> w(learn::LogisticRegression::param_count(p, d.num_classes));
    for (auto& v : w) v = 0.5 * gauss(rng);
    const double l2 = 0.01 * (problem % 3);
    std::vector<double> grad;
    learn::LogisticRegression::loss_and_gradient(w, d, l2, &grad);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::fabs(w[k]));
      auto up = w, dn = w;
      up[k] += h;
      dn[k] -= h;
      const double fd = (learn::LogisticRegression::loss_and_gradient(up, d, l2, nullptr) -
                         learn::LogisticRegression::loss_and_gradient(dn, d, l2, nullptr)) / (2 * h);
      worst = std::max(worst, std::fabs(grad[k] - fd) / std::max({std::fabs(grad[k]), std::fabs(fd), 1e-3}));
    }
  }
  const bool pass = identical && worst <= 1e-5;
  verdict(10, pass, std::to_string(files) + " files compared, " + std::to_string(differing) + " differ" +
                        (status != 0 ? ", a run failed" : "") + "; gradient max relative error " + num(worst));
  fs::remove_all(root);
  CHECK(pass);
}
