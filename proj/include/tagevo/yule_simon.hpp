#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagevo/corpus.hpp"
#include "tagevo/error.hpp"
#include "tagevo/random.hpp"

namespace tagevo {

// Distribution of the number of tags per generated post.
class SetSizeDistribution {
 public:
  static SetSizeDistribution constant(std::size_t k) {
    if (k == 0) throw ConfigError("set size must be at least 1");
    SetSizeDistribution d;
    d.constant_ = k;
    return d;
  }

  // weights[i] is the relative weight of size i + 1.
  static SetSizeDistribution histogram(std::span<const double> weights) {
    SetSizeDistribution d;
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("set size weights must be non-negative");
      total += w;
      d.cumulative_.push_back(total);
    }
    if (!(total > 0.0)) throw ConfigError("set size histogram has no mass");
    for (double& c : d.cumulative_) c /= total;
    d.cumulative_.back() = 1.0;
    return d;
  }

  bool is_constant() const { return constant_ != 0; }
  std::size_t max_size() const { return is_constant() ? constant_ : cumulative_.size(); }

  // Constant sizes consume no randomness.
  std::size_t sample(Rng& rng) const {
    if (is_constant()) return constant_;
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<std::size_t>(it - cumulative_.begin()) + 1;
  }

 private:
  std::size_t constant_ = 0;
  std::vector<double> cumulative_;
};

// Empirical tags-per-post histogram of a corpus.
inline SetSizeDistribution set_size_histogram(const Corpus& corpus) {
  std::vector<double> weights;
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    const std::size_t n = corpus.post_tags(i).size();
    if (weights.size() < n) weights.resize(n, 0.0);
    weights[n - 1] += 1.0;
  }
  if (weights.empty()) throw ConfigError("cannot derive set sizes from an empty corpus");
  return SetSizeDistribution::histogram(weights);
}

struct YSConfig {
  double alpha = 0.1;  // innovation probability per slot
  std::uint64_t steps = 1000;
  SetSizeDistribution set_size = SetSizeDistribution::constant(3);
  std::uint64_t seed = 0;
  bool distinct_within_set = true;
  std::uint32_t max_retries = 64;  // redraws for a colliding slot before it is dropped
  std::uint64_t initial_tags = 0;  // tags pre-seeded into the pool with one token each

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
    if (steps < 1) throw ConfigError("steps must be at least 1");
  }
};

// Multiset of every token emitted so far. Drawing a uniformly random past
// token selects a tag with probability proportional to its count.
class OccurrencePool {
 public:
  void add(std::uint64_t tag) {
    tokens_.push_back(tag);
    if (counts_.size() <= tag) counts_.resize(tag + 1, 0);
    ++counts_[tag];
  }

  std::uint64_t total() const { return tokens_.size(); }
  std::uint64_t count(std::uint64_t tag) const { return tag < counts_.size() ? counts_[tag] : 0; }
  // Number of tag ids with a non-zero count.
  std::uint64_t distinct() const {
    return static_cast<std::uint64_t>(
        std::count_if(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c > 0; }));
  }

  std::uint64_t draw(Rng& rng) const {
    if (tokens_.empty()) throw ContractViolation("preferential draw from an empty pool");
    return tokens_[uniform_index(rng, tokens_.size())];
  }

  void reserve(std::size_t n) { tokens_.reserve(n); }

 private:
  std::vector<std::uint64_t> tokens_;
  std::vector<std::uint64_t> counts_;
};

inline std::uint64_t preferential_draw(const OccurrencePool& pool, Rng& rng) {
  return pool.draw(rng);
}

// Posts as tag-index sets, stored flat. Tag index n is named "ys-tag-<n>".
struct TagSetSequence {
  std::vector<std::uint64_t> offsets{0};
  std::vector<std::uint64_t> tokens;
  std::uint64_t innovations = 0;
  std::uint64_t truncated_posts = 0;  // posts that lost slots to collisions
  std::uint64_t dropped_slots = 0;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const std::uint64_t> post(std::size_t i) const {
    return {tokens.data() + offsets[i], tokens.data() + offsets[i + 1]};
  }
};

namespace detail {

class YuleSimonGenerator {
 public:
  explicit YuleSimonGenerator(const YSConfig& config) : config_(config), rng_(config.seed) {
    config.validate();
    for (std::uint64_t t = 0; t < config.initial_tags; ++t) pool_.add(next_tag_++);
  }

  // One slot: innovate with probability alpha (always when the pool is empty,
  // consuming no randomness), otherwise copy a past token.
  std::uint64_t slot(bool& innovated) {
    innovated = pool_.total() == 0 || bernoulli(rng_, config_.alpha);
    return innovated ? next_tag_++ : pool_.draw(rng_);
  }

  std::uint64_t redraw() { return pool_.draw(rng_); }
  std::size_t post_size() { return config_.set_size.sample(rng_); }
  OccurrencePool& pool() { return pool_; }

 private:
  const YSConfig& config_;
  Rng rng_;
  OccurrencePool pool_;
  std::uint64_t next_tag_ = 0;
};

}  // namespace detail

// Original process: one token per step; set_size is ignored.
inline std::vector<std::uint64_t> generate_sequence(const YSConfig& config) {
  detail::YuleSimonGenerator gen(config);
  std::vector<std::uint64_t> out;
  out.reserve(config.steps);
  gen.pool().reserve(config.steps + config.initial_tags);
  for (std::uint64_t t = 0; t < config.steps; ++t) {
    bool innovated = false;
    const std::uint64_t tag = gen.slot(innovated);
    out.push_back(tag);
    gen.pool().add(tag);
  }
  return out;
}

// Set-based process: each post draws its size, then fills every slot
// independently. The post's tokens join the pool only after the post is
// complete.
inline TagSetSequence generate_set_sequence(const YSConfig& config) {
  detail::YuleSimonGenerator gen(config);
  TagSetSequence seq;
  seq.offsets.reserve(config.steps + 1);
  for (std::uint64_t step = 0; step < config.steps; ++step) {
    const std::size_t begin = seq.tokens.size();
    const std::size_t size = gen.post_size();
    bool truncated = false;
    for (std::size_t s = 0; s < size; ++s) {
      bool innovated = false;
      std::uint64_t tag = gen.slot(innovated);
      if (innovated) {
        ++seq.innovations;
      } else if (config.distinct_within_set) {
        auto in_post = [&](std::uint64_t t) {
          return std::find(seq.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                           seq.tokens.end(), t) != seq.tokens.end();
        };
        std::uint32_t tries = 0;
        while (in_post(tag) && tries < config.max_retries) {
          tag = gen.redraw();
          ++tries;
        }
        if (in_post(tag)) {
          ++seq.dropped_slots;
          truncated = true;
          continue;
        }
      }
      seq.tokens.push_back(tag);
    }
    if (truncated) ++seq.truncated_posts;
    for (std::size_t k = begin; k < seq.tokens.size(); ++k) gen.pool().add(seq.tokens[k]);
    seq.offsets.push_back(seq.tokens.size());
  }
  return seq;
}

inline std::string ys_tag_name(std::uint64_t tag) { return "ys-tag-" + std::to_string(tag); }

enum class UserAssignment { kSingle, kRoundRobin, kUniform };

struct ToCorpusOptions {
  std::int64_t tick = 1;  // seconds between consecutive posts
  std::int64_t bucket_width = 1;
  UserAssignment users = UserAssignment::kSingle;
  std::uint32_t user_count = 1;
  std::uint64_t seed = 0;  // for kUniform
};

// Wraps a generated sequence as a Corpus: post i at time i * tick, item
// "ys-item-<i>", users per `opt.users`. Posts emptied by collisions are
// skipped.
inline Corpus to_corpus(const TagSetSequence& seq, const ToCorpusOptions& opt = {}) {
  if (opt.tick <= 0) throw ConfigError("tick must be positive");
  if (opt.user_count == 0) throw ConfigError("user count must be positive");
  CorpusBuilder builder(opt.bucket_width);
  builder.set_epoch(0);
  builder.reserve(seq.size(), seq.tokens.size());
  Rng rng(opt.seed);
  std::vector<UserId> users;
  for (std::uint32_t u = 0; u < opt.user_count; ++u) {
    users.push_back(builder.user("ys-user-" + std::to_string(u)));
  }

  std::vector<std::string> names;
  std::vector<std::string_view> views;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto post = seq.post(i);
    if (post.empty()) continue;
    names.clear();
    for (std::uint64_t t : post) names.push_back(ys_tag_name(t));
    views.assign(names.begin(), names.end());
    UserId user = users[0];
    if (opt.users == UserAssignment::kRoundRobin) user = users[i % users.size()];
    if (opt.users == UserAssignment::kUniform) user = users[uniform_index(rng, users.size())];
    const ItemId item = builder.item("ys-item-" + std::to_string(i));
    builder.add_post(static_cast<std::int64_t>(i) * opt.tick, user, item, views);
  }
  return std::move(builder).finish();
}

inline Corpus to_corpus(std::span<const std::uint64_t> tokens, const ToCorpusOptions& opt = {}) {
  TagSetSequence seq;
  seq.tokens.assign(tokens.begin(), tokens.end());
  seq.offsets.resize(tokens.size() + 1);
  std::iota(seq.offsets.begin(), seq.offsets.end(), std::uint64_t{0});
  return to_corpus(seq, opt);
}

}  // namespace tagevo
