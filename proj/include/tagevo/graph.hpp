#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagevo/error.hpp"
#include "tagevo/random.hpp"

namespace tagevo {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Simple undirected graph: no self-loops, no parallel edges.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t nodes, std::vector<Edge> edges) : nodes_(nodes) {
    for (auto& [a, b] : edges) {
      if (a >= nodes || b >= nodes) throw ContractViolation("edge endpoint out of range");
      if (a > b) std::swap(a, b);
    }
    std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    offsets_.assign(nodes + 1, 0);
    for (const auto& [a, b] : edges_) {
      ++offsets_[a + 1];
      ++offsets_[b + 1];
    }
    for (std::size_t v = 0; v < nodes; ++v) offsets_[v + 1] += offsets_[v];
    adjacency_.resize(2 * edges_.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [a, b] : edges_) {
      adjacency_[cursor[a]++] = b;
      adjacency_[cursor[b]++] = a;
    }
  }

  std::size_t node_count() const { return nodes_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

 private:
  std::size_t nodes_ = 0;
  std::vector<Edge> edges_;  // (a, b) with a < b, sorted
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
};

// Newman-Girvan modularity Q = sum_c [ e_c / m - (d_c / 2m)^2 ].
inline double modularity(const Graph& g, std::span<const std::uint32_t> labels) {
  if (labels.size() != g.node_count()) throw ContractViolation("one label per node required");
  const std::size_t m = g.edge_count();
  if (m == 0) throw InsufficientData("modularity is undefined without edges");
  std::unordered_map<std::uint32_t, std::pair<double, double>> per;  // label -> (e_c, d_c)
  for (const auto& [a, b] : g.edges()) {
    if (labels[a] == labels[b]) per[labels[a]].first += 1.0;
  }
  for (NodeId v = 0; v < g.node_count(); ++v) per[labels[v]].second += static_cast<double>(g.degree(v));
  // Sum in label order so the result does not depend on hash iteration.
  std::vector<std::pair<std::uint32_t, std::pair<double, double>>> sorted(per.begin(), per.end());
  std::sort(sorted.begin(), sorted.end());
  const double md = static_cast<double>(m);
  double q = 0.0;
  for (const auto& [label, ed] : sorted) {
    const double frac = ed.second / (2.0 * md);
    q += ed.first / md - frac * frac;
  }
  return q;
}

struct Partition {
  std::vector<std::uint32_t> labels;  // community of each node, numbered by first appearance
  std::size_t communities = 0;
  double modularity = 0.0;
};

struct CommunityOptions {
  std::uint64_t seed = 0;  // tie-breaking and refinement order
  bool refine = true;
  std::size_t max_refine_passes = 100;
};

namespace detail {

inline std::vector<std::uint32_t> canonical_labels(std::span<const std::uint32_t> raw, std::size_t& count) {
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  std::vector<std::uint32_t> out(raw.size());
  for (std::size_t v = 0; v < raw.size(); ++v) {
    auto [it, inserted] = remap.try_emplace(raw[v], static_cast<std::uint32_t>(remap.size()));
    out[v] = it->second;
  }
  count = remap.size();
  return out;
}

// Greedy agglomeration: repeatedly merge the adjacent pair of communities
// with the largest modularity gain while that gain is positive. Stale heap
// entries are skipped using per-community version stamps.
inline std::vector<std::uint32_t> greedy_merge(const Graph& g, std::span<const std::uint64_t> rank) {
  const std::size_t n = g.node_count();
  const double m = static_cast<double>(g.edge_count());
  std::vector<double> degree(n);
  std::vector<std::unordered_map<std::uint32_t, double>> links(n);  // community -> edges between
  for (NodeId v = 0; v < n; ++v) degree[v] = static_cast<double>(g.degree(v));
  for (const auto& [a, b] : g.edges()) {
    links[a][b] += 1.0;
    links[b][a] += 1.0;
  }
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  std::vector<std::uint32_t> version(n, 0);
  std::vector<bool> alive(n, true);

  struct Candidate {
    double gain;
    std::uint64_t rank_lo, rank_hi;
    std::uint32_t a, b;
    std::uint32_t va, vb;
  };
  auto worse = [](const Candidate& x, const Candidate& y) {
    if (x.gain != y.gain) return x.gain < y.gain;
    if (x.rank_lo != y.rank_lo) return x.rank_lo > y.rank_lo;
    return x.rank_hi > y.rank_hi;
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);
  auto push = [&](std::uint32_t a, std::uint32_t b, double e) {
    const double gain = e / m - degree[a] * degree[b] / (2.0 * m * m);
    heap.push({gain, std::min(rank[a], rank[b]), std::max(rank[a], rank[b]), a, b, version[a], version[b]});
  };
  for (const auto& [a, b] : g.edges()) push(a, b, 1.0);

  while (!heap.empty()) {
    const Candidate c = heap.top();
    heap.pop();
    if (!alive[c.a] || !alive[c.b] || version[c.a] != c.va || version[c.b] != c.vb) continue;
    if (!(c.gain > 1e-12)) break;

    // Keep the community with more links; absorb the other.
    std::uint32_t keep = c.a, gone = c.b;
    if (links[keep].size() < links[gone].size()) std::swap(keep, gone);
    alive[gone] = false;
    parent[gone] = keep;
    degree[keep] += degree[gone];
    ++version[keep];
    links[keep].erase(gone);
    for (const auto& [other, e] : links[gone]) {
      if (other == keep) continue;
      links[keep][other] += e;
      auto& back = links[other];
      back.erase(gone);
      back[keep] += e;
    }
    links[gone].clear();
    // Deterministic order for pushes; equal gains are resolved by rank anyway.
    std::vector<std::pair<std::uint32_t, double>> around(links[keep].begin(), links[keep].end());
    std::sort(around.begin(), around.end());
    for (const auto& [other, e] : around) push(keep, other, e);
  }

  std::vector<std::uint32_t> label(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    std::uint32_t r = v;
    while (parent[r] != r) r = parent[r];
    label[v] = r;
  }
  return label;
}

// Single-node moves that raise modularity, until a pass makes no move.
inline void refine_moves(const Graph& g, std::vector<std::uint32_t>& label, Rng& rng, std::size_t max_passes) {
  const std::size_t n = g.node_count();
  const double m = static_cast<double>(g.edge_count());
  std::unordered_map<std::uint32_t, double> total;  // community -> degree sum
  for (NodeId v = 0; v < n; ++v) total[label[v]] += static_cast<double>(g.degree(v));
  std::uint32_t fresh = 0;
  for (auto l : label) fresh = std::max(fresh, l + 1);

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::vector<std::pair<std::uint32_t, double>> counts;
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (NodeId v : order) {
      const double kv = static_cast<double>(g.degree(v));
      if (kv == 0.0) continue;
      const std::uint32_t own = label[v];
      counts.clear();
      for (NodeId u : g.neighbors(v)) {
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& p) { return p.first == label[u]; });
        if (it == counts.end()) {
          counts.emplace_back(label[u], 1.0);
        } else {
          it->second += 1.0;
        }
      }
      std::sort(counts.begin(), counts.end());
      double k_own = 0.0;
      for (const auto& [c, k] : counts) {
        if (c == own) k_own = k;
      }
      const double d_own = total[own] - kv;
      auto gain = [&](double k_to, double d_to) {
        return (k_to - k_own) / m - kv * (d_to - d_own) / (2.0 * m * m);
      };
      double best = 1e-12;
      std::uint32_t target = own;
      for (const auto& [c, k] : counts) {
        if (c == own) continue;
        const double dq = gain(k, total[c]);
        if (dq > best) {
          best = dq;
          target = c;
        }
      }
      if (const double alone = gain(0.0, 0.0); alone > best) {
        best = alone;
        target = fresh++;
      }
      if (target != own) {
        total[own] -= kv;
        total[target] += kv;
        label[v] = target;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

}  // namespace detail

// Greedy agglomerative modularity maximization followed by local-move
// refinement. Deterministic for a given seed; nodes without edges end up as
// singleton communities.
inline Partition detect_communities(const Graph& g, const CommunityOptions& opt = {}) {
  if (g.edge_count() == 0) throw InsufficientData("community detection needs at least one edge");
  const std::size_t n = g.node_count();
  Rng rng(opt.seed);
  std::vector<std::uint64_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::uint64_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(rank[i - 1], rank[uniform_index(rng, i)]);

  auto raw = detail::greedy_merge(g, rank);
  if (opt.refine) detail::refine_moves(g, raw, rng, opt.max_refine_passes);

  Partition p;
  p.labels = detail::canonical_labels(raw, p.communities);
  p.modularity = modularity(g, p.labels);

  // Never report less than the trivial one-community partition (Q = 0)
  // among the nodes that carry edges.
  if (p.modularity < 0.0) {
    std::vector<std::uint32_t> one(n);
    std::uint32_t next = 1;
    for (NodeId v = 0; v < n; ++v) one[v] = g.degree(v) > 0 ? 0 : next++;
    p.labels = detail::canonical_labels(one, p.communities);
    p.modularity = modularity(g, p.labels);
  }
  return p;
}

// k-core number of every node (Batagelj-Zaversnik bucket algorithm).
inline std::vector<std::uint32_t> core_numbers(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::uint32_t> deg(n), pos(n), vert(n);
  std::size_t max_deg = 0;
  for (NodeId v = 0; v < n; ++v) {
    deg[v] = static_cast<std::uint32_t>(g.degree(v));
    max_deg = std::max<std::size_t>(max_deg, deg[v]);
  }
  std::vector<std::uint32_t> bin(max_deg + 2, 0);
  for (NodeId v = 0; v < n; ++v) ++bin[deg[v]];
  std::uint32_t start = 0;
  for (auto& b : bin) {
    const std::uint32_t count = b;
    b = start;
    start += count;
  }
  for (NodeId v = 0; v < n; ++v) {
    pos[v] = bin[deg[v]]++;
    vert[pos[v]] = v;
  }
  for (std::size_t d = bin.size() - 1; d > 0; --d) bin[d] = bin[d - 1];
  bin[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId v = vert[i];
    for (NodeId u : g.neighbors(v)) {
      if (deg[u] > deg[v]) {
        const std::uint32_t du = deg[u];
        const std::uint32_t pu = pos[u];
        const std::uint32_t pw = bin[du];
        const NodeId w = vert[pw];
        if (u != w) {
          pos[u] = pw;
          vert[pu] = w;
          pos[w] = pu;
          vert[pw] = u;
        }
        ++bin[du];
        --deg[u];
      }
    }
  }
  return deg;
}

// Average ranks (1-based); ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

// Spearman rank correlation; 0 when either side has no variation.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractViolation("spearman needs equal-length inputs");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace tagevo
