#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tagevo/error.hpp"

namespace tagevo {

inline constexpr std::int64_t kSecondsPerDay = 86'400;
inline constexpr std::int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

using TagId = std::uint32_t;
using UserId = std::uint32_t;
using ItemId = std::uint32_t;

// How annotation rows are grouped into posts.
//   kItemUserWindow: same (item, user) and within `group_window` seconds of
//                    the first row of the post (window 0 = exact timestamp).
//   kPostId:         rows sharing an explicit post-id column.
enum class GroupingMode : std::uint8_t { kItemUserWindow = 0, kPostId = 1 };

namespace detail {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

}  // namespace detail

// Dense interning of opaque strings (user and item identifiers).
class StringTable {
 public:
  std::uint32_t intern(std::string_view s) {
    if (auto it = index_.find(s); it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(s);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view s) const {
    if (auto it = index_.find(s); it != index_.end()) return it->second;
    return std::nullopt;
  }

  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  void reserve(std::size_t n) {
    names_.reserve(n);
    index_.reserve(n);
  }

  friend bool operator==(const StringTable& a, const StringTable& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t, detail::StringHash, std::equal_to<>> index_;
};

// Canonical tag string <-> dense id. Ids follow first-occurrence order, and
// each id remembers the post (and relative time) where it was born.
class TagTable {
 public:
  std::optional<TagId> find(std::string_view s) const { return strings_.find(s); }
  const std::string& name(TagId id) const { return strings_.name(id); }
  std::size_t size() const { return strings_.size(); }
  const std::vector<std::string>& names() const { return strings_.names(); }

  std::int64_t birth_time(TagId id) const { return birth_time_.at(id); }
  std::uint64_t birth_post(TagId id) const { return birth_post_.at(id); }

  friend bool operator==(const TagTable&, const TagTable&) = default;

 private:
  friend class CorpusBuilder;
  friend class CorpusCodec;

  TagId intern(std::string_view s, std::int64_t time, std::uint64_t post) {
    const std::size_t before = strings_.size();
    const TagId id = strings_.intern(s);
    if (strings_.size() != before) {
      birth_time_.push_back(time);
      birth_post_.push_back(post);
    }
    return id;
  }

  StringTable strings_;
  std::vector<std::int64_t> birth_time_;
  std::vector<std::uint64_t> birth_post_;
};

struct PostView {
  std::int64_t time;  // seconds since the corpus epoch
  UserId user;
  ItemId item;
  std::span<const TagId> tags;
};

// Immutable, time-ordered collection of posts. Tag sets are stored in one
// flat array indexed by per-post offsets.
class Corpus {
 public:
  Corpus() = default;

  std::int64_t epoch() const { return epoch_; }
  std::int64_t bucket_width() const { return bucket_width_; }
  GroupingMode grouping() const { return grouping_; }
  std::int64_t group_window() const { return group_window_; }

  const TagTable& tags() const { return tags_; }
  const StringTable& users() const { return users_; }
  const StringTable& items() const { return items_; }

  bool empty() const { return post_time_.empty(); }
  std::size_t post_count() const { return post_time_.size(); }
  std::size_t annotation_count() const { return post_tags_.size(); }

  PostView post(std::size_t i) const {
    return {post_time_[i], post_user_[i], post_item_[i], post_tags(i)};
  }
  std::int64_t post_time(std::size_t i) const { return post_time_[i]; }
  UserId post_user(std::size_t i) const { return post_user_[i]; }
  ItemId post_item(std::size_t i) const { return post_item_[i]; }
  std::span<const TagId> post_tags(std::size_t i) const {
    return {post_tags_.data() + post_offset_[i], post_tags_.data() + post_offset_[i + 1]};
  }

  static std::int64_t bucket_of_time(std::int64_t relative_time, std::int64_t width) {
    return relative_time / width;
  }
  std::int64_t bucket(std::size_t post) const { return bucket(post, bucket_width_); }
  std::int64_t bucket(std::size_t post, std::int64_t width) const {
    return bucket_of_time(post_time_[post], width);
  }
  // Number of buckets spanned by the corpus (last bucket + 1); 0 when empty.
  std::size_t bucket_count(std::int64_t width) const {
    return empty() ? 0 : static_cast<std::size_t>(bucket(post_count() - 1, width)) + 1;
  }
  std::size_t bucket_count() const { return bucket_count(bucket_width_); }

  std::int64_t tag_birth_bucket(TagId id) const { return tag_birth_bucket(id, bucket_width_); }
  std::int64_t tag_birth_bucket(TagId id, std::int64_t width) const {
    return bucket_of_time(tags_.birth_time(id), width);
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  friend class CorpusBuilder;
  friend class CorpusCodec;

  std::int64_t epoch_ = 0;
  std::int64_t bucket_width_ = kSecondsPerWeek;
  GroupingMode grouping_ = GroupingMode::kItemUserWindow;
  std::int64_t group_window_ = 0;

  TagTable tags_;
  StringTable users_;
  StringTable items_;

  std::vector<std::int64_t> post_time_;
  std::vector<UserId> post_user_;
  std::vector<ItemId> post_item_;
  std::vector<std::uint64_t> post_offset_{0};
  std::vector<TagId> post_tags_;
};

// Assembles a Corpus post by post. Posts must arrive in non-decreasing time
// order; tags are interned in arrival order, which fixes the first-occurrence
// id assignment.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::int64_t bucket_width = kSecondsPerWeek,
                         GroupingMode grouping = GroupingMode::kItemUserWindow,
                         std::int64_t group_window = 0) {
    if (bucket_width <= 0) throw ConfigError("bucket width must be positive");
    corpus_.bucket_width_ = bucket_width;
    corpus_.grouping_ = grouping;
    corpus_.group_window_ = group_window;
  }

  // Fixes the epoch explicitly; otherwise the first post's time is used.
  void set_epoch(std::int64_t epoch) {
    if (!corpus_.empty()) throw ContractViolation("epoch must be set before the first post");
    epoch_ = epoch;
  }

  UserId user(std::string_view name) { return corpus_.users_.intern(name); }
  ItemId item(std::string_view name) { return corpus_.items_.intern(name); }

  void reserve(std::size_t posts, std::size_t annotations) {
    corpus_.post_time_.reserve(posts);
    corpus_.post_user_.reserve(posts);
    corpus_.post_item_.reserve(posts);
    corpus_.post_offset_.reserve(posts + 1);
    corpus_.post_tags_.reserve(annotations);
  }

  // Appends a post whose tags are canonical strings. Repeated tags inside the
  // post are dropped; the number dropped is returned.
  std::size_t add_post(std::int64_t absolute_time, UserId user, ItemId item,
                       std::span<const std::string_view> tags) {
    if (tags.empty()) throw ContractViolation("a post needs at least one tag");
    if (!epoch_) epoch_ = absolute_time;
    const std::int64_t rel = absolute_time - *epoch_;
    if (rel < 0 || (!corpus_.empty() && rel < corpus_.post_time_.back())) {
      throw ContractViolation("posts must be added in non-decreasing time order");
    }
    if (corpus_.empty()) corpus_.epoch_ = *epoch_;

    const std::uint64_t index = corpus_.post_count();
    const std::size_t begin = corpus_.post_tags_.size();
    std::size_t dropped = 0;
    for (std::string_view name : tags) {
      const TagId id = corpus_.tags_.intern(name, rel, index);
      const auto first = corpus_.post_tags_.begin() + static_cast<std::ptrdiff_t>(begin);
      if (std::find(first, corpus_.post_tags_.end(), id) != corpus_.post_tags_.end()) {
        ++dropped;
        continue;
      }
      corpus_.post_tags_.push_back(id);
    }
    corpus_.post_time_.push_back(rel);
    corpus_.post_user_.push_back(user);
    corpus_.post_item_.push_back(item);
    corpus_.post_offset_.push_back(corpus_.post_tags_.size());
    return dropped;
  }

  Corpus finish() && {
    if (epoch_) corpus_.epoch_ = *epoch_;
    return std::move(corpus_);
  }

 private:
  Corpus corpus_;
  std::optional<std::int64_t> epoch_;
};

struct BucketSeries {
  std::vector<std::uint64_t> counts;
  std::vector<std::uint64_t> cumulative;
};

// Posts per bucket and the running total.
inline BucketSeries bucket_series(const Corpus& corpus, std::int64_t width) {
  BucketSeries out;
  out.counts.assign(corpus.bucket_count(width), 0);
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    ++out.counts[static_cast<std::size_t>(corpus.bucket(i, width))];
  }
  out.cumulative.resize(out.counts.size());
  std::uint64_t running = 0;
  for (std::size_t b = 0; b < out.counts.size(); ++b) {
    running += out.counts[b];
    out.cumulative[b] = running;
  }
  return out;
}

inline BucketSeries bucket_series(const Corpus& corpus) {
  return bucket_series(corpus, corpus.bucket_width());
}

// Annotation count per tag id.
inline std::vector<std::uint64_t> tag_frequencies(const Corpus& corpus) {
  std::vector<std::uint64_t> freq(corpus.tags().size(), 0);
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    for (TagId t : corpus.post_tags(i)) ++freq[t];
  }
  return freq;
}

// Tag ids ordered by decreasing frequency (ties by id).
inline std::vector<TagId> top_tags(const Corpus& corpus, std::size_t n) {
  const auto freq = tag_frequencies(corpus);
  std::vector<TagId> ids(freq.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TagId>(i);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](TagId a, TagId b) { return freq[a] > freq[b]; });
  if (ids.size() > n) ids.resize(n);
  return ids;
}

}  // namespace tagevo
