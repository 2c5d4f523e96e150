#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "tagevo/corpus.hpp"
#include "tagevo/error.hpp"
#include "tagevo/log_reader.hpp"

namespace tagevo {

// Columnar binary cache layout (all integers little-endian):
//
//   "TAGEVOC\0"  u32 version
//   i64 epoch, i64 bucket_width, u8 grouping, i64 group_window
//   strings tags, u64[] tag birth posts, i64[] tag birth times
//   strings users, strings items
//   i64[] post times, u32[] post users, u32[] post items,
//   u64[] post offsets (posts + 1), u32[] post tags
//
// where T[] is a u64 element count followed by the raw elements, and
// "strings" is a u64 count followed by (u32 length, bytes) records.
inline constexpr std::string_view kCacheMagic{"TAGEVOC\0", 8};
inline constexpr std::uint32_t kCacheVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "the corpus cache is written with native little-endian layout");

class CorpusCodec {
 public:
  static void encode(const Corpus& c, std::ostream& out) {
    out.write(kCacheMagic.data(), static_cast<std::streamsize>(kCacheMagic.size()));
    put(out, kCacheVersion);
    put(out, c.epoch_);
    put(out, c.bucket_width_);
    put(out, static_cast<std::uint8_t>(c.grouping_));
    put(out, c.group_window_);
    put_strings(out, c.tags_.strings_.names());
    put_array(out, std::span(c.tags_.birth_post_));
    put_array(out, std::span(c.tags_.birth_time_));
    put_strings(out, c.users_.names());
    put_strings(out, c.items_.names());
    put_array(out, std::span(c.post_time_));
    put_array(out, std::span(c.post_user_));
    put_array(out, std::span(c.post_item_));
    put_array(out, std::span(c.post_offset_));
    put_array(out, std::span(c.post_tags_));
    if (!out) throw Error("failed to write corpus cache");
  }

  static Corpus decode(std::string_view data) {
    Reader in{data};
    if (in.take(kCacheMagic.size()) != kCacheMagic) throw InputError("not a corpus cache");
    if (const auto version = in.get<std::uint32_t>(); version != kCacheVersion) {
      throw InputError("unsupported corpus cache version " + std::to_string(version));
    }
    Corpus c;
    c.epoch_ = in.get<std::int64_t>();
    c.bucket_width_ = in.get<std::int64_t>();
    const auto grouping = in.get<std::uint8_t>();
    if (grouping > 1) throw InputError("corrupt corpus cache: grouping mode");
    c.grouping_ = static_cast<GroupingMode>(grouping);
    c.group_window_ = in.get<std::int64_t>();
    in.get_strings(c.tags_.strings_);
    c.tags_.birth_post_ = in.get_array<std::uint64_t>();
    c.tags_.birth_time_ = in.get_array<std::int64_t>();
    in.get_strings(c.users_);
    in.get_strings(c.items_);
    c.post_time_ = in.get_array<std::int64_t>();
    c.post_user_ = in.get_array<UserId>();
    c.post_item_ = in.get_array<ItemId>();
    c.post_offset_ = in.get_array<std::uint64_t>();
    c.post_tags_ = in.get_array<TagId>();
    if (!in.done()) throw InputError("corrupt corpus cache: trailing bytes");
    validate(c);
    return c;
  }

 private:
  template <class T>
  static void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
  }

  template <class T>
  static void put_array(std::ostream& out, std::span<const T> values) {
    put(out, static_cast<std::uint64_t>(values.size()));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  }

  static void put_strings(std::ostream& out, const std::vector<std::string>& names) {
    put(out, static_cast<std::uint64_t>(names.size()));
    for (const auto& s : names) {
      put(out, static_cast<std::uint32_t>(s.size()));
      out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
  }

  struct Reader {
    std::string_view data;
    std::size_t pos = 0;

    std::string_view take(std::size_t n) {
      if (data.size() - pos < n) throw InputError("corrupt corpus cache: truncated");
      auto s = data.substr(pos, n);
      pos += n;
      return s;
    }

    template <class T>
    T get() {
      T value;
      std::memcpy(&value, take(sizeof value).data(), sizeof value);
      return value;
    }

    template <class T>
    std::vector<T> get_array() {
      const auto n = get<std::uint64_t>();
      if (n > (data.size() - pos) / sizeof(T)) throw InputError("corrupt corpus cache: truncated");
      std::vector<T> out(n);
      std::memcpy(out.data(), take(n * sizeof(T)).data(), n * sizeof(T));
      return out;
    }

    void get_strings(StringTable& table) {
      const auto n = get<std::uint64_t>();
      if (n > data.size() - pos) throw InputError("corrupt corpus cache: truncated");
      table.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto len = get<std::uint32_t>();
        if (table.intern(take(len)) != i) throw InputError("corrupt corpus cache: duplicate string");
      }
    }

    bool done() const { return pos == data.size(); }
  };

  static void validate(const Corpus& c) {
    auto fail = [](const char* what) { throw InputError(std::string("corrupt corpus cache: ") + what); };
    if (c.bucket_width_ <= 0) fail("bucket width");
    const std::size_t n = c.post_time_.size();
    if (c.post_user_.size() != n || c.post_item_.size() != n || c.post_offset_.size() != n + 1) {
      fail("post column lengths");
    }
    if (c.post_offset_.front() != 0 || c.post_offset_.back() != c.post_tags_.size()) fail("offsets");
    for (std::size_t i = 0; i < n; ++i) {
      if (c.post_offset_[i + 1] <= c.post_offset_[i]) fail("empty post");
      if (c.post_time_[i] < 0 || (i > 0 && c.post_time_[i] < c.post_time_[i - 1])) fail("post order");
      if (c.post_user_[i] >= c.users_.size() || c.post_item_[i] >= c.items_.size()) fail("ids");
    }
    const std::size_t tags = c.tags_.size();
    if (c.tags_.birth_post_.size() != tags || c.tags_.birth_time_.size() != tags) fail("tag births");
    for (TagId t : c.post_tags_) {
      if (t >= tags) fail("tag id");
    }
  }
};

inline void save_corpus(const Corpus& corpus, std::ostream& out) { CorpusCodec::encode(corpus, out); }

inline Corpus decode_corpus(std::string_view bytes) { return CorpusCodec::decode(bytes); }

// Reads either a binary cache or a (possibly gzipped) annotation log,
// chosen by the leading magic bytes.
inline IngestResult load_corpus(ByteSource& source, const IngestOptions& opt = {}) {
  if (source.peek(kCacheMagic.size()) == kCacheMagic) {
    IngestResult r;
    r.corpus = decode_corpus(source.read_all());
    r.stats.rows_read = r.stats.rows_kept = r.corpus.annotation_count();
    return r;
  }
  return parse_annotation_log(source, opt);
}

inline const char* grouping_name(GroupingMode g) {
  return g == GroupingMode::kPostId ? "post-id" : "item-user-window";
}

// JSON sidecar describing a cached corpus.
inline nlohmann::ordered_json corpus_metadata(const Corpus& c, const ParseStats& stats) {
  nlohmann::ordered_json j;
  j["format_version"] = kCacheVersion;
  j["epoch"] = c.epoch();
  j["bucket_width"] = c.bucket_width();
  j["grouping"] = grouping_name(c.grouping());
  j["group_window"] = c.group_window();
  j["posts"] = c.post_count();
  j["annotations"] = c.annotation_count();
  j["distinct_tags"] = c.tags().size();
  j["users"] = c.users().size();
  j["items"] = c.items().size();
  j["buckets"] = c.bucket_count();
  auto& rows = j["rows"];
  rows["read"] = stats.rows_read;
  rows["kept"] = stats.rows_kept;
  rows["skipped_malformed"] = stats.skipped_malformed;
  rows["skipped_bad_time"] = stats.skipped_bad_time;
  rows["skipped_bad_encoding"] = stats.skipped_bad_encoding;
  rows["skipped_empty_tag"] = stats.skipped_empty_tag;
  rows["duplicate_tags"] = stats.duplicate_tags;
  auto& issues = j["issues"] = nlohmann::ordered_json::array();
  for (const auto& issue : stats.issues) {
    issues.push_back({{"line", issue.line}, {"reason", issue.reason}});
  }
  return j;
}

}  // namespace tagevo
