#pragma once

// Test-only helpers: small corpus builders, constructed streams with known
// structure, and brute-force oracles that share no code with the library
// routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tagevo/tagevo.hpp"

namespace fixtures {

using namespace tagevo;

struct PostSpec {
  std::int64_t time;
  std::string user;
  std::vector<std::string> tags;
};

inline Corpus make_corpus(const std::vector<PostSpec>& posts, std::int64_t width = kSecondsPerWeek) {
  CorpusBuilder b(width);
  std::size_t n = 0;
  for (const auto& p : posts) {
    std::vector<std::string_view> views(p.tags.begin(), p.tags.end());
    b.add_post(p.time, b.user(p.user), b.item("item-" + std::to_string(n++)), views);
  }
  return std::move(b).finish();
}

inline Corpus set_ys_corpus(double alpha, std::uint64_t steps, std::size_t size, std::uint64_t seed,
                            std::int64_t width = 1) {
  YSConfig c;
  c.alpha = alpha;
  c.steps = steps;
  c.set_size = SetSizeDistribution::constant(size);
  c.seed = seed;
  ToCorpusOptions o;
  o.bucket_width = width;
  return to_corpus(generate_set_sequence(c), o);
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

// First-time pair events by re-scanning every earlier post for each pair.
inline std::vector<PairEvent> rescan_pair_events(const Corpus& c) {
  std::vector<PairEvent> out;
  auto has = [&](std::size_t post, TagId t) {
    const auto tags = c.post_tags(post);
    return std::find(tags.begin(), tags.end(), t) != tags.end();
  };
  for (std::size_t i = 0; i < c.post_count(); ++i) {
    const auto tags = c.post_tags(i);
    for (std::size_t x = 0; x < tags.size(); ++x) {
      for (std::size_t y = x + 1; y < tags.size(); ++y) {
        bool earlier = false;
        for (std::size_t j = 0; j < i && !earlier; ++j) earlier = has(j, tags[x]) && has(j, tags[y]);
        if (!earlier) out.push_back({i, std::min(tags[x], tags[y]), std::max(tags[x], tags[y])});
      }
    }
  }
  return out;
}

// Modularity from the adjacency-matrix definition
// Q = 1/(2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j).
inline double modularity_by_matrix(std::size_t n, const std::vector<Edge>& edges,
                                   const std::vector<std::uint32_t>& labels) {
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (auto [u, v] : edges) a[u][v] = a[v][u] = 1;
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i] += a[i][j];
    two_m += k[i];
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[i] == labels[j]) q += a[i][j] - k[i] * k[j] / two_m;
    }
  }
  return q / two_m;
}

// Best modularity over every set partition (restricted growth strings).
inline double brute_force_best_modularity(std::size_t n, const std::vector<Edge>& edges,
                                          std::vector<std::uint32_t>* best_labels = nullptr) {
  std::vector<std::uint32_t> labels(n, 0);
  double best = -1.0;
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t used) {
    if (i == n) {
      const double q = modularity_by_matrix(n, edges, labels);
      if (q > best) {
        best = q;
        if (best_labels != nullptr) *best_labels = labels;
      }
      return;
    }
    for (std::uint32_t l = 0; l <= used && l < n; ++l) {
      labels[i] = l;
      rec(i + 1, std::max(used, l + 1));
    }
  };
  labels[0] = 0;
  rec(1, 1);
  return best;
}

// ---------------------------------------------------------------------------
// Graph families
// ---------------------------------------------------------------------------

inline std::vector<Edge> two_triangles_with_bridge() {
  return {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}};
}

inline std::vector<Edge> two_cliques_with_bridge(std::uint32_t k) {
  std::vector<Edge> e;
  for (std::uint32_t base : {0u, k}) {
    for (std::uint32_t i = 0; i < k; ++i) {
      for (std::uint32_t j = i + 1; j < k; ++j) e.emplace_back(base + i, base + j);
    }
  }
  e.emplace_back(k - 1, k);
  return e;
}

inline bool connected(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::uint32_t> parent(n);
  for (std::uint32_t i = 0; i < n; ++i) parent[i] = i;
  std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (auto [a, b] : edges) parent[find(a)] = find(b);
  for (std::uint32_t i = 1; i < n; ++i) {
    if (find(i) != find(0)) return false;
  }
  return true;
}

struct SmallGraph {
  std::size_t n;
  std::vector<Edge> edges;
};

// Fixed family of random connected graphs with 4..max_n nodes.
inline std::vector<SmallGraph> random_connected_family(std::size_t count, std::size_t max_n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SmallGraph> out;
  while (out.size() < count) {
    const std::size_t n = 4 + uniform_index(rng, max_n - 3);
    const double p = 0.25 + 0.5 * uniform01(rng);
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        if (uniform01(rng) < p) edges.emplace_back(i, j);
      }
    }
    if (connected(n, edges)) out.push_back({n, std::move(edges)});
  }
  return out;
}

// Dense core (nodes 0..core-1) plus periphery nodes hanging off one core node
// each. Periphery nodes get high novelty rates, core nodes low ones.
struct PlantedCorePeriphery {
  Graph graph;
  std::vector<double> rates;
  std::size_t core;
};

inline PlantedCorePeriphery planted_core_periphery(std::size_t core, std::size_t periphery, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i < core; ++i) {
    for (std::uint32_t j = i + 1; j < core; ++j) {
      if (uniform01(rng) < 0.9) edges.emplace_back(i, j);
    }
  }
  std::vector<double> rates(core + periphery);
  for (std::size_t i = 0; i < core; ++i) rates[i] = static_cast<double>(uniform_index(rng, 2));
  for (std::size_t p = 0; p < periphery; ++p) {
    const auto node = static_cast<std::uint32_t>(core + p);
    edges.emplace_back(static_cast<std::uint32_t>(uniform_index(rng, core)), node);
    rates[node] = 3.0 + static_cast<double>(uniform_index(rng, 5));
  }
  return {Graph(core + periphery, std::move(edges)), std::move(rates), core};
}

// ---------------------------------------------------------------------------
// Constructed drift streams for one focal tag "k"
// ---------------------------------------------------------------------------

// Each post holds "k" plus two distinct co-tags drawn from `profile`.
inline void add_week(std::vector<PostSpec>& posts, std::int64_t week, const std::vector<std::string>& vocab,
                     const std::vector<double>& weights, std::size_t count, Rng& rng) {
  const SetSizeDistribution pick = SetSizeDistribution::histogram(weights);
  for (std::size_t i = 0; i < count; ++i) {
    PostSpec p{week * kSecondsPerWeek + static_cast<std::int64_t>(i), "u" + std::to_string(i % 7), {"k"}};
    const std::size_t a = pick.sample(rng) - 1;
    std::size_t b = a;
    while (b == a) b = pick.sample(rng) - 1;
    p.tags.push_back(vocab[a]);
    p.tags.push_back(vocab[b]);
    posts.push_back(std::move(p));
  }
}

// Weeks before `settle` use a fresh vocabulary each week; from `settle` on the
// profile is fixed.
inline Corpus converging_stream(std::int64_t weeks, std::int64_t settle, std::size_t posts_per_week,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PostSpec> posts;
  const std::vector<double> weights{0.4, 0.25, 0.15, 0.1, 0.1};
  for (std::int64_t w = 0; w < weeks; ++w) {
    std::vector<std::string> vocab;
    for (char c : std::string("abcde")) {
      vocab.push_back(w < settle ? "w" + std::to_string(w) + "-" + c : std::string("stable-") + c);
    }
    add_week(posts, w, vocab, weights, posts_per_week, rng);
  }
  return make_corpus(posts);
}

// Alternates between two disjoint profiles every `period` weeks.
inline Corpus regime_switching_stream(std::int64_t weeks, std::int64_t period, std::size_t posts_per_week,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PostSpec> posts;
  const std::vector<double> weights{0.4, 0.3, 0.2, 0.1};
  const std::vector<std::string> a{"a1", "a2", "a3", "a4"};
  const std::vector<std::string> b{"b1", "b2", "b3", "b4"};
  for (std::int64_t w = 0; w < weeks; ++w) {
    add_week(posts, w, (w / period) % 2 == 0 ? a : b, weights, posts_per_week, rng);
  }
  return make_corpus(posts);
}

}  // namespace fixtures
