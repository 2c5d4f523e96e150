#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "tagevo/corpus.hpp"
#include "tagevo/error.hpp"

namespace tagevo {

// Per-bucket single-tag novelty. A tag is new only in the post where it first
// occurs; "first" inside a bucket follows corpus post order.
struct NoveltySeries {
  std::int64_t bucket_width = 0;
  std::vector<std::uint64_t> posts;
  std::vector<std::uint64_t> novel_posts;  // posts with at least one new tag
  std::vector<std::uint64_t> new_tags;
  std::vector<double> proportion;          // novel_posts / posts, 0 for empty buckets
};

inline NoveltySeries single_novelty_series(const Corpus& corpus, std::int64_t width) {
  if (width <= 0) throw ConfigError("bucket width must be positive");
  NoveltySeries s;
  s.bucket_width = width;
  const std::size_t buckets = corpus.bucket_count(width);
  s.posts.assign(buckets, 0);
  s.novel_posts.assign(buckets, 0);
  s.new_tags.assign(buckets, 0);
  s.proportion.assign(buckets, 0.0);

  const TagTable& tags = corpus.tags();
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    const auto b = static_cast<std::size_t>(corpus.bucket(i, width));
    ++s.posts[b];
    std::uint64_t fresh = 0;
    for (TagId t : corpus.post_tags(i)) fresh += tags.birth_post(t) == i ? 1 : 0;
    s.new_tags[b] += fresh;
    s.novel_posts[b] += fresh > 0 ? 1 : 0;
  }
  for (std::size_t b = 0; b < buckets; ++b) {
    if (s.posts[b] > 0) {
      s.proportion[b] = static_cast<double>(s.novel_posts[b]) / static_cast<double>(s.posts[b]);
    }
  }
  return s;
}

inline NoveltySeries single_novelty_series(const Corpus& corpus) {
  return single_novelty_series(corpus, corpus.bucket_width());
}

// First-ever co-occurrence of an unordered tag pair (first < second).
struct PairEvent {
  std::uint64_t post;
  TagId first;
  TagId second;

  friend bool operator==(const PairEvent&, const PairEvent&) = default;
  friend auto operator<=>(const PairEvent&, const PairEvent&) = default;
};

inline std::uint64_t pair_key(TagId a, TagId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Visits every post in order and reports each pair the first time it is seen.
// `visit(post, a, b, is_new)` is called for every unordered pair in every post.
template <class Visitor>
void for_each_pair(const Corpus& corpus, Visitor&& visit) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(corpus.annotation_count());
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    const auto tags = corpus.post_tags(i);
    for (std::size_t x = 0; x < tags.size(); ++x) {
      for (std::size_t y = x + 1; y < tags.size(); ++y) {
        const bool fresh = seen.insert(pair_key(tags[x], tags[y])).second;
        visit(i, tags[x], tags[y], fresh);
      }
    }
  }
}

inline std::vector<PairEvent> first_pair_events(const Corpus& corpus) {
  std::vector<PairEvent> events;
  for_each_pair(corpus, [&](std::uint64_t post, TagId a, TagId b, bool fresh) {
    if (fresh) events.push_back({post, std::min(a, b), std::max(a, b)});
  });
  return events;
}

struct PairNoveltySeries {
  std::int64_t bucket_width = 0;
  std::vector<std::uint64_t> pairs;        // n(n-1)/2 summed over posts
  std::vector<std::uint64_t> novel_pairs;  // first-ever co-occurrences
  std::vector<double> proportion;          // novel_pairs / pairs, 0 when no pairs
};

inline PairNoveltySeries pairwise_novelty_series(const Corpus& corpus, std::int64_t width) {
  if (width <= 0) throw ConfigError("bucket width must be positive");
  PairNoveltySeries s;
  s.bucket_width = width;
  const std::size_t buckets = corpus.bucket_count(width);
  s.pairs.assign(buckets, 0);
  s.novel_pairs.assign(buckets, 0);
  s.proportion.assign(buckets, 0.0);
  for_each_pair(corpus, [&](std::uint64_t post, TagId, TagId, bool fresh) {
    const auto b = static_cast<std::size_t>(corpus.bucket(post, width));
    ++s.pairs[b];
    if (fresh) ++s.novel_pairs[b];
  });
  for (std::size_t b = 0; b < buckets; ++b) {
    if (s.pairs[b] > 0) {
      s.proportion[b] = static_cast<double>(s.novel_pairs[b]) / static_cast<double>(s.pairs[b]);
    }
  }
  return s;
}

inline PairNoveltySeries pairwise_novelty_series(const Corpus& corpus) {
  return pairwise_novelty_series(corpus, corpus.bucket_width());
}

enum class BirthMatrixNormalization {
  kWindow,  // every cell divided by all pair co-usages inside the window
  kPerRow,  // each birth-bucket row rescaled to sum to 1
};

struct PairBirthMatrixOptions {
  std::int64_t birth_width = kSecondsPerWeek;
  // Observation window in buckets of birth_width, inclusive. Unset = all.
  std::optional<std::int64_t> window_begin;
  std::optional<std::int64_t> window_end;
  BirthMatrixNormalization normalization = BirthMatrixNormalization::kWindow;
  std::size_t max_dimension = 8192;
};

// Dense symmetric matrix over birth buckets. A first-time pair whose tags
// were born in buckets (y, x) adds 1 to the diagonal cell when y == x and 1/2
// to each of (y, x) and (x, y) otherwise, so under kWindow normalization the
// matrix sums to the fraction of co-usages in the window that were novel.
struct PairBirthMatrix {
  std::size_t dimension = 0;
  std::int64_t birth_width = 0;
  std::uint64_t novel_pairs = 0;  // first-time pairs in the window
  std::uint64_t co_usages = 0;    // all pairs in the window
  std::vector<double> cells;      // row-major, dimension x dimension

  double at(std::size_t row, std::size_t col) const { return cells[row * dimension + col]; }
  double sum() const {
    double s = 0.0;
    for (double v : cells) s += v;
    return s;
  }
};

inline PairBirthMatrix pair_birth_matrix(const Corpus& corpus, const PairBirthMatrixOptions& opt = {}) {
  if (opt.birth_width <= 0) throw ConfigError("birth bucket width must be positive");
  PairBirthMatrix m;
  m.birth_width = opt.birth_width;
  m.dimension = corpus.bucket_count(opt.birth_width);
  if (m.dimension > opt.max_dimension) {
    throw ConfigError("birth matrix would have " + std::to_string(m.dimension) +
                      " rows; use a wider birth bucket");
  }
  m.cells.assign(m.dimension * m.dimension, 0.0);

  const std::int64_t lo = opt.window_begin.value_or(0);
  const std::int64_t hi = opt.window_end.value_or(INT64_MAX);
  for_each_pair(corpus, [&](std::uint64_t post, TagId a, TagId b, bool fresh) {
    const std::int64_t obs = corpus.bucket(post, opt.birth_width);
    if (obs < lo || obs > hi) return;
    ++m.co_usages;
    if (!fresh) return;
    ++m.novel_pairs;
    const auto ya = static_cast<std::size_t>(corpus.tag_birth_bucket(a, opt.birth_width));
    const auto yb = static_cast<std::size_t>(corpus.tag_birth_bucket(b, opt.birth_width));
    if (ya == yb) {
      m.cells[ya * m.dimension + ya] += 1.0;
    } else {
      m.cells[ya * m.dimension + yb] += 0.5;
      m.cells[yb * m.dimension + ya] += 0.5;
    }
  });

  if (opt.normalization == BirthMatrixNormalization::kWindow) {
    if (m.co_usages > 0) {
      for (double& v : m.cells) v /= static_cast<double>(m.co_usages);
    }
  } else {
    for (std::size_t r = 0; r < m.dimension; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < m.dimension; ++c) row += m.at(r, c);
      if (row > 0.0) {
        for (std::size_t c = 0; c < m.dimension; ++c) m.cells[r * m.dimension + c] /= row;
      }
    }
  }
  return m;
}

}  // namespace tagevo
