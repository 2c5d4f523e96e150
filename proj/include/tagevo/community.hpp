#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagevo/corpus.hpp"
#include "tagevo/distribution.hpp"
#include "tagevo/error.hpp"
#include "tagevo/graph.hpp"

namespace tagevo {

struct ActiveUser {
  UserId user;
  std::uint64_t posts;
};

// Users with at least `min_posts` posts, in user-id order.
inline std::vector<ActiveUser> filter_active_users(const Corpus& corpus, std::uint64_t min_posts = 100) {
  std::vector<std::uint64_t> posts(corpus.users().size(), 0);
  for (std::size_t i = 0; i < corpus.post_count(); ++i) ++posts[corpus.post_user(i)];
  std::vector<ActiveUser> out;
  for (UserId u = 0; u < posts.size(); ++u) {
    if (posts[u] > 0 && posts[u] >= min_posts) out.push_back({u, posts[u]});
  }
  return out;
}

// Number of distinct users other than the creator who used each tag. The
// creator is the user of the tag's first post.
inline std::vector<std::uint64_t> tag_adopter_counts(const Corpus& corpus) {
  std::vector<std::uint64_t> keys;
  keys.reserve(corpus.annotation_count());
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    for (TagId t : corpus.post_tags(i)) {
      keys.push_back((static_cast<std::uint64_t>(t) << 32) | corpus.post_user(i));
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::uint64_t> adopters(corpus.tags().size(), 0);
  for (std::uint64_t key : keys) {
    const auto tag = static_cast<TagId>(key >> 32);
    const auto user = static_cast<UserId>(key & 0xffffffffu);
    if (user != corpus.post_user(corpus.tags().birth_post(tag))) ++adopters[tag];
  }
  return adopters;
}

// Per-user count of tags the user created (corpus-first use, ties resolved by
// post order) that more than `adoption_threshold` other users went on to use.
inline std::vector<std::uint64_t> user_novelty_rates(const Corpus& corpus, std::uint64_t adoption_threshold = 100) {
  const auto adopters = tag_adopter_counts(corpus);
  std::vector<std::uint64_t> rates(corpus.users().size(), 0);
  for (TagId t = 0; t < adopters.size(); ++t) {
    if (adopters[t] > adoption_threshold) ++rates[corpus.post_user(corpus.tags().birth_post(t))];
  }
  return rates;
}

inline std::uint64_t user_novelty_rate(const Corpus& corpus, UserId user, std::uint64_t adoption_threshold = 100) {
  if (user >= corpus.users().size()) throw ContractViolation("unknown user id");
  return user_novelty_rates(corpus, adoption_threshold)[user];
}

struct UserProfile {
  UserId user;
  std::uint64_t posts;
  WeightedDistribution tags;  // share of the user's annotations per tag
  std::uint64_t novelty_rate;
};

inline std::vector<UserProfile> build_user_profiles(const Corpus& corpus, std::span<const ActiveUser> users,
                                                    std::uint64_t adoption_threshold = 100) {
  std::vector<std::int64_t> slot(corpus.users().size(), -1);
  for (std::size_t i = 0; i < users.size(); ++i) slot[users[i].user] = static_cast<std::int64_t>(i);
  std::vector<std::vector<WeightedDistribution::Entry>> weights(users.size());
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    const std::int64_t s = slot[corpus.post_user(i)];
    if (s < 0) continue;
    for (TagId t : corpus.post_tags(i)) weights[static_cast<std::size_t>(s)].emplace_back(t, 1.0);
  }
  const auto rates = user_novelty_rates(corpus, adoption_threshold);
  std::vector<UserProfile> out;
  out.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    out.push_back({users[i].user, users[i].posts, WeightedDistribution::from_weights(std::move(weights[i])),
                   rates[users[i].user]});
  }
  return out;
}

// Condensed upper triangle of all-pairs user JSD.
class PairwiseJsd {
 public:
  explicit PairwiseJsd(std::span<const UserProfile> profiles) : n_(profiles.size()) {
    values_.resize(n_ * (n_ - (n_ > 0 ? 1 : 0)) / 2);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) values_[k++] = jsd(profiles[i].tags, profiles[j].tags);
    }
  }

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return values_[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
  }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

// Users as nodes (indices into `users`), an edge wherever JSD <= threshold.
struct SimilarityNetwork {
  double threshold = 0.0;
  std::vector<UserId> users;
  std::vector<double> edge_jsd;  // parallel to graph.edges()
  Graph graph;
};

inline SimilarityNetwork user_similarity_network(std::span<const UserProfile> profiles, const PairwiseJsd& dist,
                                                 double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("similarity threshold must be in (0, 1]");
  if (dist.size() != profiles.size()) throw ContractViolation("distance table does not match profiles");
  SimilarityNetwork net;
  net.threshold = threshold;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    net.users.push_back(profiles[i].user);
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      if (dist.at(i, j) <= threshold) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }
  }
  net.graph = Graph(profiles.size(), std::move(edges));
  for (const auto& [a, b] : net.graph.edges()) net.edge_jsd.push_back(dist.at(a, b));
  return net;
}

inline SimilarityNetwork user_similarity_network(std::span<const UserProfile> profiles, double threshold) {
  if (profiles.size() < 2) throw InsufficientData("a similarity network needs at least two users");
  return user_similarity_network(profiles, PairwiseJsd(profiles), threshold);
}

// One network per threshold, sharing a single all-pairs JSD computation.
inline std::vector<SimilarityNetwork> similarity_sweep(std::span<const UserProfile> profiles,
                                                       std::span<const double> thresholds) {
  if (profiles.size() < 2) throw InsufficientData("a similarity network needs at least two users");
  const PairwiseJsd dist(profiles);
  std::vector<SimilarityNetwork> out;
  for (double t : thresholds) out.push_back(user_similarity_network(profiles, dist, t));
  return out;
}

struct CorePeripheryRow {
  NodeId node;
  std::size_t degree;
  std::uint32_t core;
  std::uint32_t community;
  double novelty_rate;
};

struct CorePeripheryReport {
  std::vector<CorePeripheryRow> rows;
  // Spearman correlation between centrality and novelty rate. Centrality
  // ranks nodes by core number, ties broken by degree.
  double coreness_correlation = 0.0;
  double degree_correlation = 0.0;
};

inline CorePeripheryReport core_periphery_report(const Graph& g, std::span<const std::uint32_t> communities,
                                                 std::span<const double> rates) {
  const std::size_t n = g.node_count();
  if (n == 0) throw InsufficientData("empty network");
  if (communities.size() != n || rates.size() != n) throw ContractViolation("one value per node required");
  const auto core = core_numbers(g);
  CorePeripheryReport r;
  std::vector<double> centrality(n), degree(n);
  const double scale = static_cast<double>(n) + 1.0;  // degree < n, so it only breaks core ties
  for (NodeId v = 0; v < n; ++v) {
    r.rows.push_back({v, g.degree(v), core[v], communities[v], rates[v]});
    degree[v] = static_cast<double>(g.degree(v));
    centrality[v] = static_cast<double>(core[v]) * scale + degree[v];
  }
  r.coreness_correlation = spearman(centrality, rates);
  r.degree_correlation = spearman(degree, rates);
  return r;
}

}  // namespace tagevo
