#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <unistd.h>
#include <zlib.h>

#include "tagevo/corpus.hpp"
#include "tagevo/error.hpp"
#include "tagevo/tag_normalize.hpp"

namespace tagevo {

// ---------------------------------------------------------------------------
// Byte sources
// ---------------------------------------------------------------------------

// Sequential byte stream with a small look-ahead. Gzip input is decoded
// transparently; plain input passes through unchanged.
class ByteSource {
 public:
  virtual ~ByteSource() = default;

  // Reads up to `n` bytes; returns 0 at end of stream.
  std::size_t read(char* out, std::size_t n) {
    std::size_t done = 0;
    if (pos_ < peeked_.size()) {
      done = std::min(n, peeked_.size() - pos_);
      std::copy_n(peeked_.data() + pos_, done, out);
      pos_ += done;
    }
    if (done < n) {
      const std::size_t got = read_raw(out + done, n - done);
      if (tap_ && got > 0) tap_(std::string_view(out + done, got));
      done += got;
    }
    return done;
  }

  // Returns up to `n` leading bytes without consuming them. Only valid before
  // the first read().
  std::string_view peek(std::size_t n) {
    while (peeked_.size() < n) {
      char buf[256];
      const std::size_t got = read_raw(buf, std::min(sizeof buf, n - peeked_.size()));
      if (got == 0) break;
      if (tap_) tap_(std::string_view(buf, got));
      peeked_.append(buf, got);
    }
    return std::string_view(peeked_).substr(0, std::min(n, peeked_.size()));
  }

  std::string read_all() {
    std::string out;
    char buf[1 << 16];
    while (std::size_t got = read(buf, sizeof buf)) out.append(buf, got);
    return out;
  }

  // Observer for every decoded byte (used for input digests).
  void set_tap(std::function<void(std::string_view)> tap) { tap_ = std::move(tap); }

 protected:
  virtual std::size_t read_raw(char* out, std::size_t n) = 0;

 private:
  std::string peeked_;
  std::size_t pos_ = 0;
  std::function<void(std::string_view)> tap_;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(std::string data) : data_(std::move(data)) {}

 protected:
  std::size_t read_raw(char* out, std::size_t n) override {
    const std::size_t k = std::min(n, data_.size() - offset_);
    std::copy_n(data_.data() + offset_, k, out);
    offset_ += k;
    return k;
  }

 private:
  std::string data_;
  std::size_t offset_ = 0;
};

// File or stdin through zlib's gz reader. "-" means standard input.
class GzSource final : public ByteSource {
 public:
  explicit GzSource(const std::string& path) : path_(path) {
    file_ = path == "-" ? gzdopen(dup(fileno(stdin)), "rb") : gzopen(path.c_str(), "rb");
    if (file_ == nullptr) throw InputError("cannot open input: " + path);
    gzbuffer(file_, 1 << 17);
  }
  ~GzSource() override {
    if (file_ != nullptr) gzclose(file_);
  }
  GzSource(const GzSource&) = delete;
  GzSource& operator=(const GzSource&) = delete;

 protected:
  std::size_t read_raw(char* out, std::size_t n) override {
    const int got = gzread(file_, out, static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30)));
    if (got < 0) {
      int errnum = 0;
      throw InputError("read error in " + path_ + ": " + gzerror(file_, &errnum));
    }
    return static_cast<std::size_t>(got);
  }

 private:
  std::string path_;
  gzFile file_ = nullptr;
};

// Splits a ByteSource into lines (without the terminator). A trailing '\r'
// is removed.
class LineReader {
 public:
  explicit LineReader(ByteSource& source) : source_(source) { buffer_.resize(1 << 16); }

  std::optional<std::string_view> next() {
    for (;;) {
      const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(start_);
      const auto end = buffer_.begin() + static_cast<std::ptrdiff_t>(filled_);
      const auto nl = std::find(begin, end, '\n');
      if (nl != end) {
        std::string_view line(buffer_.data() + start_, static_cast<std::size_t>(nl - begin));
        start_ = static_cast<std::size_t>(nl - buffer_.begin()) + 1;
        return strip_cr(line);
      }
      if (eof_) {
        if (start_ == filled_) return std::nullopt;
        std::string_view line(buffer_.data() + start_, filled_ - start_);
        start_ = filled_;
        return strip_cr(line);
      }
      refill();
    }
  }

 private:
  static std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
  }

  void refill() {
    if (start_ > 0) {
      std::copy(buffer_.begin() + static_cast<std::ptrdiff_t>(start_),
                buffer_.begin() + static_cast<std::ptrdiff_t>(filled_), buffer_.begin());
      filled_ -= start_;
      start_ = 0;
    }
    if (filled_ == buffer_.size()) buffer_.resize(buffer_.size() * 2);
    const std::size_t got = source_.read(buffer_.data() + filled_, buffer_.size() - filled_);
    if (got == 0) eof_ = true;
    filled_ += got;
  }

  ByteSource& source_;
  std::vector<char> buffer_;
  std::size_t start_ = 0;
  std::size_t filled_ = 0;
  bool eof_ = false;
};

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t digits, int& out) {
  if (s.size() < digits) return false;
  int v = 0;
  for (std::size_t i = 0; i < digits; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// Integer epoch seconds, or ISO-8601 "YYYY-MM-DD[(T| )hh:mm[:ss[.fff]]][Z|+hh[:]mm]".
// Fractional seconds are truncated.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;

  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec == std::errc() && ptr == s.data() + s.size()) return value;

  using namespace std::chrono;
  int y = 0, mo = 0, d = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!detail::parse_fixed_int(s, 4, y) || !detail::parse_fixed_int(s.substr(5), 2, mo) ||
      !detail::parse_fixed_int(s.substr(8), 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t secs = sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;
  s.remove_prefix(10);
  if (s.empty()) return secs;

  if (s[0] != 'T' && s[0] != ' ') return std::nullopt;
  s.remove_prefix(1);
  int hh = 0, mm = 0, ss = 0;
  if (s.size() < 5 || s[2] != ':' || !detail::parse_fixed_int(s, 2, hh) ||
      !detail::parse_fixed_int(s.substr(3), 2, mm)) {
    return std::nullopt;
  }
  s.remove_prefix(5);
  if (!s.empty() && s[0] == ':') {
    if (!detail::parse_fixed_int(s.substr(1), 2, ss)) return std::nullopt;
    s.remove_prefix(3);
    if (!s.empty() && (s[0] == '.' || s[0] == ',')) {
      s.remove_prefix(1);
      while (!s.empty() && s[0] >= '0' && s[0] <= '9') s.remove_prefix(1);
    }
  }
  if (hh > 24 || mm > 59 || ss > 60) return std::nullopt;
  secs += hh * 3600 + mm * 60 + ss;

  if (s.empty() || s == "Z") return secs;
  if (s[0] != '+' && s[0] != '-') return std::nullopt;
  const int sign = s[0] == '+' ? 1 : -1;
  s.remove_prefix(1);
  int oh = 0, om = 0;
  if (!detail::parse_fixed_int(s, 2, oh)) return std::nullopt;
  s.remove_prefix(2);
  if (!s.empty() && s[0] == ':') s.remove_prefix(1);
  if (!s.empty()) {
    if (s.size() != 2 || !detail::parse_fixed_int(s, 2, om)) return std::nullopt;
  }
  return secs - sign * (oh * 3600 + om * 60);
}

// ---------------------------------------------------------------------------
// Annotation log parsing
// ---------------------------------------------------------------------------

struct ColumnConfig {
  char delimiter = '\t';
  int time = 0;
  int item = 1;
  int user = 2;
  int tag = 3;
  int post_id = -1;  // required when grouping by post id
  bool header = false;
};

struct IngestOptions {
  ColumnConfig columns;
  NormalizeOptions normalize;
  std::int64_t bucket_width = kSecondsPerWeek;
  GroupingMode grouping = GroupingMode::kItemUserWindow;
  std::int64_t group_window = 0;
};

struct ParseIssue {
  std::uint64_t line;
  std::string reason;
};

struct ParseStats {
  std::uint64_t rows_read = 0;  // non-empty data lines
  std::uint64_t rows_kept = 0;  // annotations stored in the corpus
  std::uint64_t skipped_malformed = 0;
  std::uint64_t skipped_bad_time = 0;
  std::uint64_t skipped_bad_encoding = 0;
  std::uint64_t skipped_empty_tag = 0;
  std::uint64_t duplicate_tags = 0;  // repeated tag within one post
  std::vector<ParseIssue> issues;    // first kMaxIssues problems, by line

  static constexpr std::size_t kMaxIssues = 100;

  std::uint64_t skipped() const {
    return skipped_malformed + skipped_bad_time + skipped_bad_encoding + skipped_empty_tag;
  }
};

struct IngestResult {
  Corpus corpus;
  ParseStats stats;
};

namespace detail {

struct RawRow {
  std::int64_t time;
  std::uint32_t item;
  std::uint32_t user;
  std::uint32_t post_key;
  std::uint32_t tag;  // index into the canonical tag list
};

inline void note_issue(ParseStats& stats, std::uint64_t line, std::string reason) {
  if (stats.issues.size() < ParseStats::kMaxIssues) {
    stats.issues.push_back({line, std::move(reason)});
  }
}

// Splits `line` on `delim`; returns false if fewer than `needed` fields.
inline bool split_fields(std::string_view line, char delim, std::size_t needed,
                         std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields.size() >= needed;
}

}  // namespace detail

// Parses delimiter-separated annotation rows (time, item, user, tag; one tag
// per row) into a Corpus. Malformed rows are skipped and counted; input order
// does not need to be chronological.
inline IngestResult parse_annotation_log(ByteSource& source, const IngestOptions& opt = {}) {
  const ColumnConfig& cols = opt.columns;
  if (opt.bucket_width <= 0) throw ConfigError("bucket width must be positive");
  if (opt.group_window < 0) throw ConfigError("group window must be non-negative");
  if (opt.grouping == GroupingMode::kPostId && cols.post_id < 0) {
    throw ConfigError("grouping by post id needs a post-id column");
  }
  for (int c : {cols.time, cols.item, cols.user, cols.tag}) {
    if (c < 0) throw ConfigError("column indices must be non-negative");
  }
  const std::size_t needed =
      static_cast<std::size_t>(std::max({cols.time, cols.item, cols.user, cols.tag, cols.post_id})) + 1;

  IngestResult result;
  ParseStats& stats = result.stats;

  StringTable raw_items, raw_users, raw_posts;
  // Raw tag bytes -> canonical index, or a negative marker for skips.
  constexpr std::int64_t kEmpty = -1;
  constexpr std::int64_t kInvalid = -2;
  std::unordered_map<std::string, std::int64_t, detail::StringHash, std::equal_to<>> raw_tags;
  std::unordered_map<std::string, std::uint32_t, detail::StringHash, std::equal_to<>> canonical_index;
  std::vector<std::string> canonical;

  std::vector<detail::RawRow> rows;
  std::vector<std::string_view> fields;
  LineReader reader(source);
  std::uint64_t line_no = 0;
  bool header_pending = cols.header;

  while (auto line = reader.next()) {
    ++line_no;
    if (line->empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    ++stats.rows_read;
    if (!detail::split_fields(*line, cols.delimiter, needed, fields)) {
      ++stats.skipped_malformed;
      detail::note_issue(stats, line_no, "too few columns");
      continue;
    }
    const auto time = parse_timestamp(fields[static_cast<std::size_t>(cols.time)]);
    if (!time) {
      ++stats.skipped_bad_time;
      detail::note_issue(stats, line_no, "unparseable timestamp");
      continue;
    }

    const std::string_view raw_tag = fields[static_cast<std::size_t>(cols.tag)];
    auto it = raw_tags.find(raw_tag);
    if (it == raw_tags.end()) {
      std::int64_t code;
      try {
        if (auto norm = normalize_tag(raw_tag, opt.normalize)) {
          auto [cit, inserted] =
              canonical_index.try_emplace(*norm, static_cast<std::uint32_t>(canonical.size()));
          if (inserted) canonical.push_back(*norm);
          code = cit->second;
        } else {
          code = kEmpty;
        }
      } catch (const InputError&) {
        code = kInvalid;
      }
      it = raw_tags.emplace(std::string(raw_tag), code).first;
    }
    if (it->second == kEmpty) {
      ++stats.skipped_empty_tag;
      detail::note_issue(stats, line_no, "empty tag");
      continue;
    }
    if (it->second == kInvalid) {
      ++stats.skipped_bad_encoding;
      detail::note_issue(stats, line_no, "invalid UTF-8 in tag");
      continue;
    }

    detail::RawRow row{};
    row.time = *time;
    row.item = raw_items.intern(fields[static_cast<std::size_t>(cols.item)]);
    row.user = raw_users.intern(fields[static_cast<std::size_t>(cols.user)]);
    row.post_key = cols.post_id >= 0 && opt.grouping == GroupingMode::kPostId
                       ? raw_posts.intern(fields[static_cast<std::size_t>(cols.post_id)])
                       : 0;
    row.tag = static_cast<std::uint32_t>(it->second);
    rows.push_back(row);
  }
  raw_tags = {};
  canonical_index = {};

  std::stable_sort(rows.begin(), rows.end(),
                   [](const detail::RawRow& a, const detail::RawRow& b) { return a.time < b.time; });

  // Assign every row to a post. Posts are numbered in creation order, which
  // is chronological by their first row.
  struct OpenPost {
    std::uint32_t index;
    std::int64_t start;
  };
  struct PostMeta {
    std::int64_t time;
    std::uint32_t item;
    std::uint32_t user;
  };
  std::vector<PostMeta> posts;
  std::vector<std::uint32_t> post_of_row(rows.size());
  std::unordered_map<std::uint64_t, OpenPost> open;
  const bool by_post_id = opt.grouping == GroupingMode::kPostId;
  std::size_t purge_at = 1u << 16;
  std::int64_t current_time = rows.empty() ? 0 : rows.front().time;

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (!by_post_id && row.time != current_time) {
      current_time = row.time;
      if (opt.group_window == 0) {
        open.clear();
      } else if (open.size() > purge_at) {
        std::erase_if(open, [&](const auto& kv) {
          return current_time - kv.second.start > opt.group_window;
        });
        purge_at = std::max<std::size_t>(1u << 16, 2 * open.size());
      }
    }
    const std::uint64_t key = by_post_id ? row.post_key
                                         : (static_cast<std::uint64_t>(row.item) << 32) | row.user;
    auto found = open.find(key);
    if (found != open.end() &&
        (by_post_id || row.time - found->second.start <= opt.group_window)) {
      post_of_row[r] = found->second.index;
      continue;
    }
    const auto index = static_cast<std::uint32_t>(posts.size());
    posts.push_back({row.time, row.item, row.user});
    open.insert_or_assign(key, OpenPost{index, row.time});
    post_of_row[r] = index;
  }
  open = {};

  // Stable counting sort of rows by post.
  std::vector<std::uint64_t> start(posts.size() + 1, 0);
  for (std::uint32_t p : post_of_row) ++start[p + 1];
  for (std::size_t p = 0; p < posts.size(); ++p) start[p + 1] += start[p];
  std::vector<std::uint32_t> order(rows.size());
  {
    std::vector<std::uint64_t> cursor(start.begin(), start.end() - 1);
    for (std::size_t r = 0; r < rows.size(); ++r) order[cursor[post_of_row[r]]++] = static_cast<std::uint32_t>(r);
  }

  CorpusBuilder builder(opt.bucket_width, opt.grouping, opt.group_window);
  builder.reserve(posts.size(), rows.size());
  std::vector<std::string_view> tags;
  for (std::size_t p = 0; p < posts.size(); ++p) {
    tags.clear();
    for (std::uint64_t k = start[p]; k < start[p + 1]; ++k) {
      tags.push_back(canonical[rows[order[k]].tag]);
    }
    const UserId user = builder.user(raw_users.name(posts[p].user));
    const ItemId item = builder.item(raw_items.name(posts[p].item));
    stats.duplicate_tags += builder.add_post(posts[p].time, user, item, tags);
  }
  result.corpus = std::move(builder).finish();
  stats.rows_kept = result.corpus.annotation_count();
  return result;
}

inline IngestResult parse_annotation_log(std::string_view text, const IngestOptions& opt = {}) {
  MemorySource source{std::string(text)};
  return parse_annotation_log(source, opt);
}

inline IngestResult parse_annotation_file(const std::string& path, const IngestOptions& opt = {}) {
  GzSource source(path);
  return parse_annotation_log(source, opt);
}

// Emits the corpus as ingest-format TSV (absolute time, item, user, tag), one
// row per annotation in post order.
inline void write_tsv(const Corpus& corpus, std::ostream& out) {
  std::string line;
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    const PostView p = corpus.post(i);
    const std::string prefix = std::to_string(p.time + corpus.epoch()) + '\t' +
                               corpus.items().name(p.item) + '\t' + corpus.users().name(p.user) +
                               '\t';
    for (TagId t : p.tags) {
      line.assign(prefix);
      line += corpus.tags().name(t);
      line += '\n';
      out.write(line.data(), static_cast<std::streamsize>(line.size()));
    }
  }
}

}  // namespace tagevo
