#pragma once

// Weekly undirected, unweighted contact graphs and the five per-node
// structural metrics: degree, triangles, local clustering, normalized
// betweenness and reachable-fraction closeness.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "netcare/core.hpp"
#include "netcare/ingest.hpp"

namespace netcare {

// ---------------------------------------------------------------------------
// Compact simple graph (CSR)
// ---------------------------------------------------------------------------

using NodeIndex = std::uint32_t;

/// Simple undirected graph over nodes 0..n-1. Self-loops and duplicate edges are dropped.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t n, std::span<const std::pair<NodeIndex, NodeIndex>> edges) : offsets_(n + 1, 0) {
    std::vector<std::pair<NodeIndex, NodeIndex>> arcs;
    arcs.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
      if (u == v) continue;
      arcs.emplace_back(u, v);
      arcs.emplace_back(v, u);
    }
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
    targets_.reserve(arcs.size());
    for (auto [u, v] : arcs) {
      ++offsets_[u + 1];
      targets_.push_back(v);
    }
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
  }

  std::size_t node_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }

  /// Sorted neighbor list.
  std::span<const NodeIndex> neighbors(NodeIndex v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeIndex v) const { return offsets_[v + 1] - offsets_[v]; }

  bool has_edge(NodeIndex u, NodeIndex v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeIndex> targets_;
};

// ---------------------------------------------------------------------------
// Study-wide edge filter
// ---------------------------------------------------------------------------

using PersonPair = std::pair<PersonId, PersonId>;  // ordered: first < second

inline PersonPair make_pair_key(const PersonId& a, const PersonId& b) {
  return a < b ? PersonPair{a, b} : PersonPair{b, a};
}

struct EdgeSet {
  std::map<PersonPair, std::size_t> contact_count;  // retained pairs only
  std::size_t min_frequency = 3;

  bool contains(const PersonId& a, const PersonId& b) const { return contact_count.contains(make_pair_key(a, b)); }
  std::size_t size() const { return contact_count.size(); }
};

/// Counts calls and texts in both directions per unordered pair over the whole study and keeps
/// pairs with at least `min_frequency` contacts.
inline EdgeSet build_edge_set(std::span<const CommEvent> events, std::size_t min_frequency = 3) {
  std::map<PersonPair, std::size_t> counts;
  for (const auto& e : events) {
    if (e.src == e.dst) continue;
    ++counts[make_pair_key(e.src, e.dst)];
  }
  EdgeSet out;
  out.min_frequency = min_frequency;
  for (auto& [pair, n] : counts) {
    if (n >= min_frequency) out.contact_count.emplace(pair, n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weekly snapshots
// ---------------------------------------------------------------------------

enum class Scope : std::uint8_t { participant, whole };

inline constexpr std::array<Scope, 2> kScopes = {Scope::participant, Scope::whole};

inline std::string_view to_string(Scope s) { return s == Scope::participant ? "participant" : "whole"; }

struct WeeklySnapshot {
  WeekIndex week;
  Scope scope = Scope::whole;
  std::vector<PersonId> nodes;  // sorted
  Graph graph;

  std::optional<NodeIndex> index_of(const PersonId& p) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), p);
    if (it == nodes.end() || *it != p) return std::nullopt;
    return static_cast<NodeIndex>(it - nodes.begin());
  }
};

/// An edge is present iff the pair survived the study-wide filter and at least one event between
/// the pair falls inside `week`. Every roster member is a node (isolated when silent); the
/// participant scope drops edges with a non-roster endpoint. `events` must be sorted by timestamp.
inline WeeklySnapshot build_snapshot(const EdgeSet& edge_set, std::span<const CommEvent> events,
                                     std::span<const WeekIndex> study_weeks, const WeekIndex& week, Scope scope,
                                     const std::set<PersonId>& roster) {
  if (std::find(study_weeks.begin(), study_weeks.end(), week) == study_weeks.end()) {
    throw DataError("week " + std::to_string(week.index) + " (" + format_date(week.start) +
                    ") is outside the study range");
  }
  const Timestamp begin = week.start_ts();
  const Timestamp end = week.end_ts();
  auto first = std::lower_bound(events.begin(), events.end(), begin,
                                [](const CommEvent& e, Timestamp t) { return e.timestamp < t; });

  std::set<PersonPair> pairs;
  for (auto it = first; it != events.end() && it->timestamp < end; ++it) {
    if (it->src == it->dst) continue;
    auto key = make_pair_key(it->src, it->dst);
    if (!edge_set.contact_count.contains(key)) continue;
    if (scope == Scope::participant && (!roster.contains(key.first) || !roster.contains(key.second))) continue;
    pairs.insert(std::move(key));
  }

  WeeklySnapshot snap;
  snap.week = week;
  snap.scope = scope;
  std::set<PersonId> nodes(roster.begin(), roster.end());
  for (const auto& [a, b] : pairs) {
    nodes.insert(a);
    nodes.insert(b);
  }
  snap.nodes.assign(nodes.begin(), nodes.end());
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) edges.emplace_back(*snap.index_of(a), *snap.index_of(b));
  snap.graph = Graph(snap.nodes.size(), edges);
  return snap;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct LocalStructure {
  std::size_t degree = 0;
  std::size_t triangles = 0;
  double clustering = 0.0;
};

/// Degree, triangle count and Watts-Strogatz local clustering for every node.
inline std::vector<LocalStructure> degree_and_triangles(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<LocalStructure> out(n);
  for (NodeIndex v = 0; v < n; ++v) {
    auto nb = g.neighbors(v);
    std::size_t tri = 0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      auto nu = g.neighbors(nb[i]);
      // count common neighbors w > nb[i] so each triangle through v is counted once
      auto it_a = nb.begin() + static_cast<std::ptrdiff_t>(i) + 1;
      auto it_b = std::upper_bound(nu.begin(), nu.end(), nb[i]);
      while (it_a != nb.end() && it_b != nu.end()) {
        if (*it_a < *it_b) {
          ++it_a;
        } else if (*it_b < *it_a) {
          ++it_b;
        } else {
          ++tri;
          ++it_a;
          ++it_b;
        }
      }
    }
    const std::size_t d = nb.size();
    out[v].degree = d;
    out[v].triangles = tri;
    out[v].clustering = d < 2 ? 0.0 : 2.0 * static_cast<double>(tri) / (static_cast<double>(d) * (d - 1));
  }
  return out;
}

namespace detail {

/// Single-source dependency accumulation (Brandes). Writes delta into `delta` (size n);
/// entries of nodes unreachable from the source are left at zero.
struct BrandesWorkspace {
  std::vector<std::int32_t> dist;
  std::vector<double> sigma;
  std::vector<double> coeff;
  std::vector<NodeIndex> order;
  std::vector<NodeIndex> succ;         // shortest-path successors, grouped by position in `order`
  std::vector<std::size_t> succ_end;

  explicit BrandesWorkspace(std::size_t n) : dist(n, -1), sigma(n, 0.0), coeff(n, 0.0) {
    order.reserve(n);
    succ_end.reserve(n);
  }

  template <class Sink>
  void run(const Graph& g, NodeIndex s, Sink&& sink) {
    for (NodeIndex v : order) {
      dist[v] = -1;
      sigma[v] = 0.0;
      coeff[v] = 0.0;
    }
    order.clear();
    succ.clear();
    succ_end.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    order.push_back(s);
    for (std::size_t head = 0; head < order.size(); ++head) {
      const NodeIndex v = order[head];
      const std::int32_t next = dist[v] + 1;
      const double sv = sigma[v];
      for (NodeIndex w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = next;
          order.push_back(w);
        }
        if (dist[w] == next) {
          sigma[w] += sv;
          succ.push_back(w);
        }
      }
      succ_end.push_back(succ.size());
    }
    for (std::size_t k = order.size(); k-- > 1;) {
      const NodeIndex v = order[k];
      double acc = 0.0;
      for (std::size_t i = succ_end[k - 1]; i < succ_end[k]; ++i) acc += coeff[succ[i]];
      const double delta = sigma[v] * acc;
      coeff[v] = (1.0 + delta) / sigma[v];
      sink(v, delta);
    }
  }

  void run(const Graph& g, NodeIndex s, std::span<double> delta) {
    std::fill(delta.begin(), delta.end(), 0.0);
    run(g, s, [&](NodeIndex v, double d) { delta[v] = d; });
  }
};

}  // namespace detail

/// Exact shortest-path betweenness via single-source dependency accumulation, O(V*E).
/// Each unordered pair is counted once and the result is normalized by (n-1)(n-2)/2
/// (all zeros for n < 3). With threads > 1, sources are processed in parallel batches and
/// summed in source order, so the output is bit-identical to the sequential run.
inline std::vector<double> betweenness(const Graph& g, unsigned threads = 1) {
  const std::size_t n = g.node_count();
  std::vector<double> bc(n, 0.0);
  if (n < 3) return bc;

  if (threads <= 1) {
    detail::BrandesWorkspace ws(n);
    for (NodeIndex s = 0; s < n; ++s) ws.run(g, s, [&](NodeIndex v, double d) { bc[v] += d; });
  } else {
    const std::size_t batch = std::max<std::size_t>(threads, std::min<std::size_t>(n, (1u << 22) / n + threads));
    std::vector<double> deltas(batch * n);
    for (std::size_t base = 0; base < n; base += batch) {
      const std::size_t count = std::min(batch, n - base);
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          detail::BrandesWorkspace ws(n);
          for (std::size_t k = t; k < count; k += threads) {
            ws.run(g, static_cast<NodeIndex>(base + k), std::span<double>(deltas.data() + k * n, n));
          }
        });
      }
      for (auto& th : pool) th.join();
      for (std::size_t k = 0; k < count; ++k) {
        const double* d = deltas.data() + k * n;
        for (std::size_t v = 0; v < n; ++v) bc[v] += d[v];
      }
    }
  }
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));  // pairs counted twice
  for (auto& x : bc) x *= scale;
  return bc;
}

struct ClosenessValues {
  double scaled = 0.0;     // (r / (n-1)) * (r / D)
  double component = 0.0;  // r / D, closeness within the reachable component
};

/// Closeness for possibly disconnected graphs: a node reaching r others at total distance D
/// scores (r/(n-1)) * (r/D); isolated nodes score 0.
inline std::vector<ClosenessValues> closeness(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<ClosenessValues> out(n);
  if (n < 2) return out;
  std::vector<std::int64_t> dist(n, -1);
  std::vector<NodeIndex> queue;
  queue.reserve(n);
  for (NodeIndex s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    queue.clear();
    queue.push_back(s);
    dist[s] = 0;
    std::int64_t total = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const NodeIndex v = queue[head];
      for (NodeIndex w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          total += dist[w];
          queue.push_back(w);
        }
      }
    }
    const double r = static_cast<double>(queue.size() - 1);
    if (r > 0) {
      out[s].component = r / static_cast<double>(total);
      out[s].scaled = (r / static_cast<double>(n - 1)) * out[s].component;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundled per-node metrics
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kMetricNames = {"degree", "triangles", "clustering", "betweenness",
                                                                 "closeness"};

struct NodeMetricRow {
  PersonId person;
  std::size_t degree = 0;
  std::size_t triangles = 0;
  double clustering = 0.0;
  double betweenness = 0.0;
  double closeness = 0.0;
  double closeness_component = 0.0;

  std::array<double, 5> values() const {
    return {static_cast<double>(degree), static_cast<double>(triangles), clustering, betweenness, closeness};
  }
};

struct NodeMetrics {
  WeekIndex week;
  Scope scope = Scope::whole;
  std::vector<NodeMetricRow> rows;  // ordered by PersonId
};

inline NodeMetrics compute_metrics(const WeeklySnapshot& snap, unsigned threads = 1) {
  const auto local = degree_and_triangles(snap.graph);
  const auto bc = betweenness(snap.graph, threads);
  const auto cl = closeness(snap.graph);
  NodeMetrics m;
  m.week = snap.week;
  m.scope = snap.scope;
  m.rows.resize(snap.nodes.size());
  for (std::size_t v = 0; v < snap.nodes.size(); ++v) {
    auto& r = m.rows[v];
    r.person = snap.nodes[v];
    r.degree = local[v].degree;
    r.triangles = local[v].triangles;
    r.clustering = local[v].clustering;
    r.betweenness = bc[v];
    r.closeness = cl[v].scaled;
    r.closeness_component = cl[v].component;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Per (person, week) structural feature table across both scopes
// ---------------------------------------------------------------------------

using PersonWeek = std::pair<PersonId, int>;

/// 5 metrics for the participant scope followed by the same 5 for the whole scope.
using StructuralFeatures = std::array<double, 10>;
using StructureTable = std::map<PersonWeek, StructuralFeatures>;

/// Structural features for roster members only: outsiders appear in whole-scope graphs but have
/// no behavior or survey data.
inline void add_metrics_to_table(StructureTable& table, const NodeMetrics& m, const std::set<PersonId>& roster) {
  const std::size_t offset = m.scope == Scope::participant ? 0 : 5;
  for (const auto& row : m.rows) {
    if (!roster.contains(row.person)) continue;
    auto& f = table[{row.person, m.week.index}];
    const auto v = row.values();
    std::copy(v.begin(), v.end(), f.begin() + static_cast<std::ptrdiff_t>(offset));
  }
}

struct StructureResult {
  EdgeSet edges;
  std::vector<NodeMetrics> metrics;  // week-major, participant scope first
  StructureTable table;
};

/// Runs the whole graph stage: study-wide filter, then every (week, scope) snapshot and its metrics.
inline StructureResult compute_structure(std::span<const CommEvent> events, std::span<const WeekIndex> weeks,
                                         const std::set<PersonId>& roster, std::size_t min_frequency = 3,
                                         unsigned threads = 1) {
  std::vector<CommEvent> in_range;
  for (const auto& e : events) {
    if (week_of(e.timestamp, weeks)) in_range.push_back(e);
  }
  std::stable_sort(in_range.begin(), in_range.end(),
                   [](const CommEvent& a, const CommEvent& b) { return a.timestamp < b.timestamp; });
  StructureResult out;
  out.edges = build_edge_set(in_range, min_frequency);
  for (const auto& w : weeks) {
    for (Scope scope : kScopes) {
      auto snap = build_snapshot(out.edges, in_range, weeks, w, scope, roster);
      out.metrics.push_back(compute_metrics(snap, threads));
      add_metrics_to_table(out.table, out.metrics.back(), roster);
    }
  }
  return out;
}

}  // namespace netcare
