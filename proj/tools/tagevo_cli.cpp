// tagevo: simulate tag streams and run the tag-evolution analyses to CSV/JSON.

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tagevo/tagevo.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tagevo;

namespace {

enum ExitCode { kOk = 0, kConfigExit = 2, kInputExit = 3, kInvariantExit = 4 };

// A nested run (replay) that already reported its own error.
struct NestedExit {
  int code;
};

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
std::string num(T v)
  requires std::is_integral_v<T>
{
  return std::to_string(v);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// File-name-safe rendering of a threshold or tag.
std::string file_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.substr(0, 48);
}

// ---------------------------------------------------------------------------
// Digests
// ---------------------------------------------------------------------------

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error("cannot initialize SHA-256");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view s) { EVP_DigestUpdate(ctx_, s.data(), s.size()); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kDigits[md[i] >> 4];
      out += kDigits[md[i] & 15];
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string sha256_of(std::string_view s) {
  Sha256 h;
  h.update(s);
  return h.hex();
}

// ---------------------------------------------------------------------------
// Output staging: everything is written to temporary files first and renamed
// into place only when the whole run succeeded.
// ---------------------------------------------------------------------------

class Artifacts {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  void commit(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    const std::string suffix = ".tmp-" + std::to_string(::getpid());
    std::vector<fs::path> temps, placed;
    auto cleanup = [&] {
      for (const auto& p : temps) fs::remove(p, ec);
      for (const auto& p : placed) fs::remove(p, ec);
    };
    try {
      for (const auto& [name, content] : files_) {
        const fs::path tmp = dir / ("." + name + suffix);
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw InputError("cannot write " + tmp.string());
      }
      for (std::size_t i = 0; i < files_.size(); ++i) {
        const fs::path target = dir / files_[i].first;
        fs::rename(temps[i], target);
        placed.push_back(target);
      }
    } catch (...) {
      cleanup();
      throw;
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

// ---------------------------------------------------------------------------
// Shared options
// ---------------------------------------------------------------------------

std::int64_t parse_width(const std::string& s) {
  if (s == "day") return kSecondsPerDay;
  if (s == "week") return kSecondsPerWeek;
  std::int64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || v <= 0) {
    throw ConfigError("bucket width must be 'day', 'week' or a positive number of seconds: " + s);
  }
  return v;
}

struct InputOptions {
  std::string path = "-";
  std::string bucket_width;  // empty: corpus default (week for text input)
  std::string delimiter = "tab";
  bool header = false;
  int time_col = 0, item_col = 1, user_col = 2, tag_col = 3, post_id_col = -1;
  std::string group_by = "item-user";
  std::int64_t group_window = 0;
  bool keep_case = false;

  NormalizeOptions normalize() const {
    NormalizeOptions n;
    n.case_fold = !keep_case;
    return n;
  }

  IngestOptions ingest() const {
    IngestOptions o;
    if (delimiter == "tab" || delimiter == "\\t") {
      o.columns.delimiter = '\t';
    } else if (delimiter.size() == 1) {
      o.columns.delimiter = delimiter[0];
    } else {
      throw ConfigError("delimiter must be a single character or 'tab'");
    }
    o.columns.header = header;
    o.columns.time = time_col;
    o.columns.item = item_col;
    o.columns.user = user_col;
    o.columns.tag = tag_col;
    o.columns.post_id = post_id_col;
    o.normalize = normalize();
    if (!bucket_width.empty()) o.bucket_width = parse_width(bucket_width);
    if (group_by == "item-user") {
      o.grouping = GroupingMode::kItemUserWindow;
    } else if (group_by == "post-id") {
      o.grouping = GroupingMode::kPostId;
    } else {
      throw ConfigError("group-by must be 'item-user' or 'post-id'");
    }
    o.group_window = group_window;
    return o;
  }

  std::int64_t width_for(const Corpus& c) const {
    return bucket_width.empty() ? c.bucket_width() : parse_width(bucket_width);
  }
};

void add_input_options(CLI::App* sub, InputOptions& o) {
  sub->add_option("input,-i,--input", o.path, "annotation log (TSV, optionally gzipped) or corpus cache; - for stdin");
  sub->add_option("--bucket-width", o.bucket_width, "day, week or seconds (default: week, or the cache's width)");
  sub->add_option("--delimiter", o.delimiter, "field delimiter: tab or a single character");
  sub->add_flag("--header", o.header, "first line is a header");
  sub->add_option("--time-col", o.time_col, "time column");
  sub->add_option("--item-col", o.item_col, "item column");
  sub->add_option("--user-col", o.user_col, "user column");
  sub->add_option("--tag-col", o.tag_col, "tag column");
  sub->add_option("--post-id-col", o.post_id_col, "post-id column (-1: none)");
  sub->add_option("--group-by", o.group_by, "post grouping: item-user or post-id");
  sub->add_option("--group-window", o.group_window, "seconds within which item-user rows form one post");
  sub->add_flag("--keep-case", o.keep_case, "do not case-fold tags");
}

struct InputRecord {
  std::string path;
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct Loaded {
  IngestResult result;
  InputRecord record;
};

Loaded load_input(const std::string& path, const IngestOptions& opt) {
  GzSource source(path);
  Sha256 digest;
  std::uint64_t bytes = 0;
  source.set_tap([&](std::string_view s) {
    digest.update(s);
    bytes += s.size();
  });
  Loaded l;
  l.result = load_corpus(source, opt);
  l.record = {path, digest.hex(), bytes};
  return l;
}

// ---------------------------------------------------------------------------
// Run context
// ---------------------------------------------------------------------------

struct Run {
  CLI::App* sub = nullptr;
  std::string output_dir;
  std::vector<InputRecord> inputs;
  Artifacts artifacts;
};

json config_echo(CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "output-dir") continue;
    if (opt->get_expected_min() == 0) {
      cfg[name] = opt->count() > 0 ? "true" : "false";
      continue;
    }
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
      std::erase_if(value, [](char c) { return c == '[' || c == ']' || c == '{' || c == '}' || c == ' '; });
    }
    cfg[name] = value;
  }
  return cfg;
}

// Writes artifacts plus manifest.json into the output directory.
void finish(Run& run, const std::string& command) {
  json manifest;
  manifest["tool"] = "tagevo";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config"] = config_echo(run.sub);
  auto& inputs = manifest["inputs"] = json::array();
  for (const auto& in : run.inputs) {
    inputs.push_back({{"path", in.path}, {"sha256", in.sha256}, {"bytes", in.bytes}});
  }
  auto& outputs = manifest["outputs"] = json::array();
  for (const auto& [name, content] : run.artifacts.files()) {
    outputs.push_back({{"file", name}, {"sha256", sha256_of(content)}, {"bytes", content.size()}});
  }
  run.artifacts.add("manifest.json", dump(manifest));
  run.artifacts.commit(run.output_dir);
}

void require_output_dir(const Run& run) {
  if (run.output_dir.empty()) throw ConfigError("--output-dir is required");
}

void write_stdout(const std::string& s) {
  std::cout.write(s.data(), static_cast<std::streamsize>(s.size()));
  std::cout.flush();
  if (!std::cout) throw InputError("cannot write to standard output");
}

std::int64_t bucket_start(const Corpus& c, std::size_t b, std::int64_t width) {
  return c.epoch() + static_cast<std::int64_t>(b) * width;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  double alpha = 0.1;
  std::uint64_t steps = 1000;
  std::size_t set_size = 3;
  std::string set_size_from;
  std::uint64_t seed = 0;
  std::uint32_t users = 1;
  std::string assignment = "round-robin";
  std::uint64_t initial_tags = 0;
  bool allow_repeats = false;
  std::uint32_t max_retries = 64;
  std::int64_t tick = 1;
};

void run_simulate(Run& run, const SimulateOptions& o) {
  YSConfig cfg;
  cfg.alpha = o.alpha;
  cfg.steps = o.steps;
  cfg.seed = o.seed;
  cfg.initial_tags = o.initial_tags;
  cfg.distinct_within_set = !o.allow_repeats;
  cfg.max_retries = o.max_retries;
  cfg.set_size = SetSizeDistribution::constant(o.set_size);
  if (!o.set_size_from.empty()) {
    auto loaded = load_input(o.set_size_from, IngestOptions{});
    cfg.set_size = set_size_histogram(loaded.result.corpus);
    run.inputs.push_back(loaded.record);
  }
  ToCorpusOptions to;
  to.tick = o.tick;
  to.user_count = o.users;
  to.seed = o.seed;
  if (o.assignment == "round-robin") {
    to.users = UserAssignment::kRoundRobin;
  } else if (o.assignment == "uniform") {
    to.users = UserAssignment::kUniform;
  } else {
    throw ConfigError("user-assignment must be 'round-robin' or 'uniform'");
  }
  const Corpus corpus = to_corpus(generate_set_sequence(cfg), to);
  std::ostringstream out;
  write_tsv(corpus, out);
  if (run.output_dir.empty()) {
    write_stdout(out.str());
    return;
  }
  run.artifacts.add("stream.tsv", out.str());
  finish(run, "simulate");
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

void run_ingest(Run& run, const InputOptions& in) {
  auto loaded = load_input(in.path, in.ingest());
  std::ostringstream cache;
  save_corpus(loaded.result.corpus, cache);
  if (run.output_dir.empty()) {
    write_stdout(cache.str());
    return;
  }
  run.inputs.push_back(loaded.record);
  run.artifacts.add("corpus.cache", cache.str());
  run.artifacts.add("corpus.json", dump(corpus_metadata(loaded.result.corpus, loaded.result.stats)));
  finish(run, "ingest");
}

Loaded load_for_analysis(Run& run, const InputOptions& in) {
  require_output_dir(run);
  auto loaded = load_input(in.path, in.ingest());
  run.inputs.push_back(loaded.record);
  return loaded;
}

// ---------------------------------------------------------------------------
// posts / novelty / pairs / birthmatrix
// ---------------------------------------------------------------------------

void run_posts(Run& run, const InputOptions& in) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const std::int64_t width = in.width_for(c);
  const auto s = bucket_series(c, width);
  std::string csv = "bucket,start,posts,cumulative\n";
  for (std::size_t b = 0; b < s.counts.size(); ++b) {
    csv += num(b) + "," + num(bucket_start(c, b, width)) + "," + num(s.counts[b]) + "," + num(s.cumulative[b]) + "\n";
  }
  run.artifacts.add("posts.csv", csv);
  finish(run, "posts");
}

struct NoveltyOptions {
  std::uint64_t zipf_fmin = 10;
  double heaps_skip = 0.01;
};

json fit_or_error(const std::function<json()>& fit) {
  try {
    return fit();
  } catch (const InsufficientData& e) {
    return json{{"error", e.what()}};
  }
}

void run_novelty(Run& run, const InputOptions& in, const NoveltyOptions& o) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const std::int64_t width = in.width_for(c);
  const auto s = single_novelty_series(c, width);
  std::string csv = "bucket,start,posts,novel_posts,new_tags,proportion\n";
  for (std::size_t b = 0; b < s.posts.size(); ++b) {
    csv += num(b) + "," + num(bucket_start(c, b, width)) + "," + num(s.posts[b]) + "," + num(s.novel_posts[b]) +
           "," + num(s.new_tags[b]) + "," + num(s.proportion[b]) + "\n";
  }
  run.artifacts.add("novelty.csv", csv);

  ZipfOptions zo;
  zo.f_min = o.zipf_fmin;
  const ZipfFit zipf = zipf_fit(c, zo);
  std::string ranks = "rank,frequency\n";
  for (const auto& r : zipf.table) ranks += num(r.rank) + "," + num(r.frequency) + "\n";
  run.artifacts.add("zipf.csv", ranks);

  json summary;
  summary["bucket_width"] = width;
  summary["posts"] = c.post_count();
  summary["annotations"] = c.annotation_count();
  summary["distinct_tags"] = c.tags().size();
  summary["heaps"] = fit_or_error([&] {
    HeapsOptions ho;
    ho.skip_fraction = o.heaps_skip;
    const HeapsFit h = heaps_fit(c, ho);
    return json{{"beta", h.beta},         {"intercept", h.intercept}, {"range_begin", h.range_begin},
                {"range_end", h.range_end}, {"residual", h.residual},   {"points", h.points},
                {"low_confidence", h.low_confidence}};
  });
  const bool fitted = zipf.exponent > 0.0;
  auto or_null = [&](double v) { return fitted ? json(v) : json(nullptr); };
  summary["zipf"] = {{"exponent", or_null(zipf.exponent)},
                     {"exponent_stderr", or_null(zipf.exponent_stderr)},
                     {"f_min", zipf.f_min},
                     {"tail_size", zipf.tail_size},
                     {"ks_distance", or_null(zipf.ks_distance)},
                     {"low_confidence", zipf.low_confidence},
                     {"poor_fit", zipf.poor_fit}};
  run.artifacts.add("summary.json", dump(summary));
  finish(run, "novelty");
}

void run_pairs(Run& run, const InputOptions& in) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const std::int64_t width = in.width_for(c);
  const auto s = pairwise_novelty_series(c, width);
  std::string csv = "bucket,start,pairs,novel_pairs,proportion\n";
  for (std::size_t b = 0; b < s.pairs.size(); ++b) {
    csv += num(b) + "," + num(bucket_start(c, b, width)) + "," + num(s.pairs[b]) + "," + num(s.novel_pairs[b]) +
           "," + num(s.proportion[b]) + "\n";
  }
  run.artifacts.add("pairs.csv", csv);
  finish(run, "pairs");
}

struct BirthOptions {
  std::string birth_width = "week";
  std::int64_t window_begin = -1;
  std::int64_t window_end = -1;
  std::string normalize = "window";
  std::size_t max_dimension = 8192;
};

void run_birthmatrix(Run& run, const InputOptions& in, const BirthOptions& o) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  PairBirthMatrixOptions opt;
  opt.birth_width = parse_width(o.birth_width);
  if (o.window_begin >= 0) opt.window_begin = o.window_begin;
  if (o.window_end >= 0) opt.window_end = o.window_end;
  if (o.normalize == "window") {
    opt.normalization = BirthMatrixNormalization::kWindow;
  } else if (o.normalize == "row") {
    opt.normalization = BirthMatrixNormalization::kPerRow;
  } else {
    throw ConfigError("normalize must be 'window' or 'row'");
  }
  opt.max_dimension = o.max_dimension;
  const auto m = pair_birth_matrix(c, opt);
  std::string csv = "birth_bucket";
  for (std::size_t j = 0; j < m.dimension; ++j) csv += "," + num(j);
  csv += "\n";
  for (std::size_t i = 0; i < m.dimension; ++i) {
    csv += num(i);
    for (std::size_t j = 0; j < m.dimension; ++j) csv += "," + num(m.at(i, j));
    csv += "\n";
  }
  run.artifacts.add("birth_matrix.csv", csv);
  json summary{{"dimension", m.dimension}, {"birth_width", m.birth_width}, {"novel_pairs", m.novel_pairs},
               {"co_usages", m.co_usages}, {"normalization", o.normalize}, {"sum", m.sum()}};
  run.artifacts.add("summary.json", dump(summary));
  finish(run, "birthmatrix");
}

// ---------------------------------------------------------------------------
// jsd-matrix / jsd-consec / drift
// ---------------------------------------------------------------------------

struct ShiftOptions {
  std::vector<std::string> tags;
  std::size_t top = 10;
  double min_share = 0.01;
  std::string weighting = "tokens";
  std::size_t window = 8;
  double threshold = 0.3;
};

SemshiftOptions semshift_options(const ShiftOptions& o, std::int64_t width) {
  SemshiftOptions s;
  s.width = width;
  s.min_share = o.min_share;
  if (!(o.min_share >= 0.0 && o.min_share < 1.0)) throw ConfigError("min-share must be in [0, 1)");
  if (o.weighting == "tokens") {
    s.weighting = CoTagWeighting::kTokens;
  } else if (o.weighting == "posts") {
    s.weighting = CoTagWeighting::kPerPost;
  } else {
    throw ConfigError("weighting must be 'tokens' or 'posts'");
  }
  return s;
}

std::vector<TagId> select_tags(const Corpus& c, const ShiftOptions& o, const NormalizeOptions& norm) {
  std::vector<TagId> out;
  if (!o.tags.empty()) {
    for (const auto& raw : o.tags) {
      const auto name = normalize_tag(raw, norm);
      const auto id = name ? c.tags().find(*name) : std::nullopt;
      if (!id) throw InputError("tag not found in corpus: " + raw);
      if (std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
    }
    return out;
  }
  if (o.top == 0) throw ConfigError("top must be positive");
  return top_tags(c, o.top);
}

std::string series_rows(const Corpus& c, TagId t, const std::vector<ConsecutiveJsd>& series) {
  std::string rows;
  for (const auto& s : series) {
    rows += csv_field(c.tags().name(t)) + "," + num(s.from_week) + "," + num(s.to_week) + "," + num(s.value) + "," +
            (s.gap ? "1" : "0") + "\n";
  }
  return rows;
}

void run_jsd_matrix(Run& run, const InputOptions& in, const ShiftOptions& o) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const auto opt = semshift_options(o, in.width_for(c));
  json index = json::array();
  std::size_t i = 0;
  for (TagId t : select_tags(c, o, in.normalize())) {
    json entry{{"index", i}, {"tag", c.tags().name(t)}};
    try {
      const auto m = jsd_matrix(c, t, opt);
      const std::string file = "jsd_matrix_" + num(i) + "_" + file_token(c.tags().name(t)) + ".csv";
      std::string csv = "week";
      for (auto w : m.weeks) csv += "," + num(w);
      csv += "\n";
      for (std::size_t r = 0; r < m.size(); ++r) {
        csv += num(m.weeks[r]);
        for (std::size_t k = 0; k < m.size(); ++k) csv += "," + num(m.at(r, k));
        csv += "\n";
      }
      run.artifacts.add(file, csv);
      entry["status"] = "ok";
      entry["file"] = file;
      entry["weeks"] = m.weeks;
      entry["excluded_weeks"] = m.excluded_weeks;
    } catch (const InsufficientData& e) {
      entry["status"] = "insufficient";
      entry["reason"] = e.what();
    }
    index.push_back(std::move(entry));
    ++i;
  }
  run.artifacts.add("tags.json", dump(index));
  finish(run, "jsd-matrix");
}

void run_jsd_consec(Run& run, const InputOptions& in, const ShiftOptions& o, bool classify) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const auto opt = semshift_options(o, in.width_for(c));
  DriftOptions dopt;
  dopt.window = o.window;
  dopt.threshold = o.threshold;
  std::string csv = "tag,from_week,to_week,jsd,gap\n";
  json summary = json::array();
  for (TagId t : select_tags(c, o, in.normalize())) {
    json entry{{"tag", c.tags().name(t)}};
    try {
      const auto series = consecutive_jsd(c, t, opt);
      csv += series_rows(c, t, series);
      entry["points"] = series.size();
      if (classify) {
        const auto r = classify_drift(values_of(series), dopt);
        entry["class"] = drift_name(r.drift);
        entry["trailing_mean"] = r.trailing_mean;
        entry["spikes"] = r.spikes;
      }
    } catch (const InsufficientData& e) {
      entry["points"] = 0;
      if (classify) entry["class"] = drift_name(Drift::kInsufficient);
      entry["reason"] = e.what();
    }
    summary.push_back(std::move(entry));
  }
  run.artifacts.add("jsd_consec.csv", csv);
  run.artifacts.add(classify ? "drift.json" : "tags.json", dump(summary));
  finish(run, classify ? "drift" : "jsd-consec");
}

// ---------------------------------------------------------------------------
// usernet / communities / novelty-users
// ---------------------------------------------------------------------------

struct NetOptions {
  std::uint64_t min_posts = 100;
  std::uint64_t adoption_threshold = 100;
  std::vector<double> thresholds{0.4, 0.35, 0.3, 0.25};
  std::uint64_t seed = 0;
  bool drop_isolated = false;
  bool no_refine = false;
};

struct NetworkAnalysis {
  double threshold = 0.0;
  std::vector<std::size_t> members;  // indices into the profile list
  Graph graph;
  std::vector<double> edge_jsd;
  std::vector<std::uint32_t> community;
  std::size_t communities = 0;
  std::optional<double> modularity;
  std::optional<CorePeripheryReport> core;
  std::size_t isolated = 0;
};

NetworkAnalysis analyze_network(const SimilarityNetwork& net, const std::vector<UserProfile>& profiles,
                                const NetOptions& o) {
  NetworkAnalysis a;
  a.threshold = net.threshold;
  const Graph& full = net.graph;
  std::vector<std::int64_t> remap(full.node_count(), -1);
  for (NodeId v = 0; v < full.node_count(); ++v) {
    if (full.degree(v) == 0) ++a.isolated;
    if (o.drop_isolated && full.degree(v) == 0) continue;
    remap[v] = static_cast<std::int64_t>(a.members.size());
    a.members.push_back(v);
  }
  std::vector<Edge> edges;
  for (const auto& [u, v] : full.edges()) {
    edges.emplace_back(static_cast<NodeId>(remap[u]), static_cast<NodeId>(remap[v]));
  }
  a.graph = Graph(a.members.size(), std::move(edges));
  a.edge_jsd = net.edge_jsd;
  if (a.graph.edge_count() > 0) {
    CommunityOptions co;
    co.seed = o.seed;
    co.refine = !o.no_refine;
    const Partition p = detect_communities(a.graph, co);
    a.community = p.labels;
    a.communities = p.communities;
    a.modularity = p.modularity;
  } else {
    a.community.resize(a.members.size());
    std::iota(a.community.begin(), a.community.end(), 0u);
    a.communities = a.members.size();
  }
  if (!a.members.empty()) {
    std::vector<double> rates;
    for (auto m : a.members) rates.push_back(static_cast<double>(profiles[m].novelty_rate));
    a.core = core_periphery_report(a.graph, a.community, rates);
  }
  return a;
}

struct NetworkSet {
  std::vector<UserProfile> profiles;
  std::vector<NetworkAnalysis> networks;
};

NetworkSet build_networks(const Corpus& c, const NetOptions& o) {
  if (o.thresholds.empty()) throw ConfigError("at least one threshold is required");
  NetworkSet s;
  const auto active = filter_active_users(c, o.min_posts);
  s.profiles = build_user_profiles(c, active, o.adoption_threshold);
  for (const auto& net : similarity_sweep(s.profiles, o.thresholds)) {
    s.networks.push_back(analyze_network(net, s.profiles, o));
  }
  return s;
}

json network_summary(const NetworkAnalysis& a) {
  json j{{"threshold", a.threshold},
         {"nodes", a.members.size()},
         {"edges", a.graph.edge_count()},
         {"isolated", a.isolated},
         {"communities", a.communities}};
  j["modularity"] = a.modularity ? json(*a.modularity) : json(nullptr);
  if (a.core) {
    j["coreness_correlation"] = a.core->coreness_correlation;
    j["degree_correlation"] = a.core->degree_correlation;
  }
  return j;
}

void run_usernet(Run& run, const InputOptions& in, const NetOptions& o, bool full) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const NetworkSet set = build_networks(c, o);
  json summary{{"min_posts", o.min_posts},
               {"adoption_threshold", o.adoption_threshold},
               {"drop_isolated", o.drop_isolated},
               {"users", set.profiles.size()}};
  auto& nets = summary["networks"] = json::array();
  for (const auto& a : set.networks) {
    const std::string label = file_token(num(a.threshold));
    auto user_name = [&](std::size_t node) { return csv_field(c.users().name(set.profiles[a.members[node]].user)); };
    if (full) {
      std::string edges = "user_a,user_b,d_js\n";
      for (std::size_t e = 0; e < a.graph.edge_count(); ++e) {
        const auto [u, v] = a.graph.edges()[e];
        edges += user_name(u) + "," + user_name(v) + "," + num(a.edge_jsd[e]) + "\n";
      }
      std::string nodes = "user,posts,degree,core,community,novelty_rate\n";
      for (std::size_t v = 0; v < a.members.size(); ++v) {
        const auto& row = a.core->rows[v];
        nodes += user_name(v) + "," + num(set.profiles[a.members[v]].posts) + "," + num(row.degree) + "," +
                 num(row.core) + "," + num(row.community) + "," + num(set.profiles[a.members[v]].novelty_rate) + "\n";
      }
      run.artifacts.add("edges_" + label + ".csv", edges);
      run.artifacts.add("nodes_" + label + ".csv", nodes);
    } else {
      std::string rows = "user,community\n";
      for (std::size_t v = 0; v < a.members.size(); ++v) rows += user_name(v) + "," + num(a.community[v]) + "\n";
      run.artifacts.add("communities_" + label + ".csv", rows);
    }
    json entry = network_summary(a);
    if (!full) {
      std::vector<std::size_t> sizes(a.communities, 0);
      for (auto l : a.community) ++sizes[l];
      entry["community_sizes"] = sizes;
    }
    nets.push_back(std::move(entry));
  }
  run.artifacts.add("summary.json", dump(summary));
  finish(run, full ? "usernet" : "communities");
}

void run_novelty_users(Run& run, const InputOptions& in, const NetOptions& o) {
  const auto loaded = load_for_analysis(run, in);
  const Corpus& c = loaded.result.corpus;
  const auto active = filter_active_users(c, o.min_posts);
  const auto rates = user_novelty_rates(c, o.adoption_threshold);
  std::string csv = "user,posts,novelty_rate\n";
  std::uint64_t total = 0;
  for (const auto& u : active) {
    csv += csv_field(c.users().name(u.user)) + "," + num(u.posts) + "," + num(rates[u.user]) + "\n";
    total += rates[u.user];
  }
  run.artifacts.add("novelty_users.csv", csv);
  json summary{{"min_posts", o.min_posts},
               {"adoption_threshold", o.adoption_threshold},
               {"users", active.size()},
               {"novelty_total", total}};
  run.artifacts.add("summary.json", dump(summary));
  finish(run, "novelty-users");
}

// ---------------------------------------------------------------------------
// Config files and replay
// ---------------------------------------------------------------------------

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// key=value lines; '#' and ';' start comments; values may be quoted.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

bool user_gave(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Turns key/value settings into arguments for `sub`, skipping keys already
// present in `given`.
std::vector<std::string> settings_to_args(CLI::App* sub, const std::vector<std::pair<std::string, std::string>>& kv,
                                          const std::vector<std::string>& given) {
  std::vector<std::string> out;
  for (const auto& [key, value] : kv) {
    if (key == "config" || key == "output-dir") continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw ConfigError("unknown setting '" + key + "' for " + sub->get_name());
    if (user_gave(given, key)) continue;
    if (key == "input" && std::find(given.begin(), given.end(), "-i") != given.end()) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1") {
        out.push_back("--" + key);
      } else if (!(value == "false" || value == "0")) {
        throw ConfigError("setting '" + key + "' expects true or false");
      }
      continue;
    }
    if (value.empty()) continue;
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

// Expands `--config FILE` inside the subcommand arguments.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;
  std::vector<std::string> out{args[0]};
  for (auto& a : settings_to_args(sub, read_config_file(path), rest)) out.push_back(std::move(a));
  // Explicit flags come after the file settings.
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

int run_cli(std::vector<std::string> args);

struct ReplayOptions {
  std::string manifest;
  bool check = false;
};

void run_replay(Run& run, const ReplayOptions& o) {
  require_output_dir(run);
  std::ifstream in(o.manifest);
  if (!in) throw InputError("cannot read manifest: " + o.manifest);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
  if (!m.contains("command") || !m.contains("config")) throw InputError("manifest lacks command or config");
  std::vector<std::string> args{m["command"].get<std::string>()};
  for (const auto& [key, value] : m["config"].items()) {
    const std::string v = value.get<std::string>();
    if (v == "false" || v.empty()) continue;
    args.push_back("--" + key);
    if (v != "true") args.push_back(v);
  }
  args.push_back("--output-dir");
  args.push_back(run.output_dir);
  const int code = run_cli(args);
  if (code != kOk) throw NestedExit{code};
  if (!o.check) return;

  const json fresh = json::parse(std::ifstream(fs::path(run.output_dir) / "manifest.json"));
  if (fresh["inputs"] != m["inputs"]) throw InputError("input digests differ from the manifest");
  if (fresh["outputs"] != m["outputs"]) throw ContractViolation("replayed outputs differ from the manifest");
}

void print_error(const char* kind, int code, std::string_view message) {
  const json j{{"error", {{"kind", kind}, {"exit_code", code}, {"message", std::string(message)}}}};
  std::cerr << j.dump() << "\n";
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Tag-ecosystem simulation and open-ended-evolution analyses", "tagevo"};
  app.set_version_flag("--version", std::string(kVersion));
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  Run run;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-o,--output-dir", run.output_dir, "directory for artifacts and manifest.json");
    sub->add_option("--config")->description("key=value settings file; command-line flags take precedence");
    return sub;
  };

  SimulateOptions sim;
  {
    CLI::App* s = add("simulate", "generate a Yule-Simon tag stream as TSV");
    s->add_option("--alpha", sim.alpha, "innovation probability per slot")->check(CLI::Range(0.0, 1.0));
    s->add_option("--steps", sim.steps, "number of posts");
    s->add_option("--set-size", sim.set_size, "tags per post (1 = single-token process)");
    s->add_option("--set-size-from", sim.set_size_from, "take the post-size histogram from this corpus");
    s->add_option("--seed", sim.seed, "random seed");
    s->add_option("--users", sim.users, "number of synthetic users");
    s->add_option("--user-assignment", sim.assignment, "round-robin or uniform");
    s->add_option("--initial-tags", sim.initial_tags, "tags seeded into the pool before the first post");
    s->add_flag("--allow-repeats", sim.allow_repeats, "allow a tag twice in one post");
    s->add_option("--max-retries", sim.max_retries, "redraws for a colliding slot");
    s->add_option("--tick", sim.tick, "seconds between posts");
  }
  InputOptions in;
  add_input_options(add("ingest", "parse an annotation log into a binary corpus cache"), in);
  add_input_options(add("posts", "posts per bucket and cumulative count"), in);

  NoveltyOptions nov;
  {
    CLI::App* s = add("novelty", "single-tag novelty per bucket with Heaps and Zipf fits");
    add_input_options(s, in);
    s->add_option("--zipf-fmin", nov.zipf_fmin, "lower frequency cutoff for the Zipf fit (0: automatic)");
    s->add_option("--heaps-skip", nov.heaps_skip, "leading share of annotations left out of the Heaps fit");
  }
  add_input_options(add("pairs", "pairwise (combinatorial) novelty per bucket"), in);

  BirthOptions birth;
  {
    CLI::App* s = add("birthmatrix", "first co-occurrences by the birth buckets of both tags");
    add_input_options(s, in);
    s->add_option("--birth-width", birth.birth_width, "birth bucket width: day, week or seconds");
    s->add_option("--window-begin", birth.window_begin, "first observed bucket (-1: start)");
    s->add_option("--window-end", birth.window_end, "last observed bucket (-1: end)");
    s->add_option("--normalize", birth.normalize, "window or row");
    s->add_option("--max-dimension", birth.max_dimension, "largest allowed matrix side");
  }

  ShiftOptions shift;
  auto add_shift = [&](const std::string& name, const std::string& help, bool drift) {
    CLI::App* s = add(name, help);
    add_input_options(s, in);
    s->add_option("--tags", shift.tags, "comma-separated tags")->delimiter(',')->allow_extra_args(false);
    s->add_option("--top", shift.top, "use the N most frequent tags when --tags is absent");
    s->add_option("--min-share", shift.min_share, "drop co-tags below this share of a week");
    s->add_option("--weighting", shift.weighting, "tokens or posts");
    if (drift) {
      s->add_option("--window", shift.window, "trailing window of consecutive values");
      s->add_option("--threshold", shift.threshold, "mean threshold; spikes exceed twice this");
    }
  };
  add_shift("jsd-matrix", "week-by-week JSD matrix of each tag's co-occurrence profile", false);
  add_shift("jsd-consec", "JSD between consecutive active weeks", false);
  add_shift("drift", "classify semantic drift as converging or wandering", true);

  NetOptions net;
  auto add_net = [&](const std::string& name, const std::string& help, bool graph) {
    CLI::App* s = add(name, help);
    add_input_options(s, in);
    s->add_option("--min-posts", net.min_posts, "minimum posts for a user to be included");
    s->add_option("--adoption-threshold", net.adoption_threshold, "other users needed for a tag to count");
    if (graph) {
      s->add_option("--thresholds", net.thresholds, "comma-separated JSD thresholds")->delimiter(',')->allow_extra_args(false);
      s->add_option("--seed", net.seed, "community detection seed");
      s->add_flag("--drop-isolated", net.drop_isolated, "remove users without edges");
      s->add_flag("--no-refine", net.no_refine, "skip local-move refinement");
    }
  };
  add_net("usernet", "user similarity networks with communities and core-periphery statistics", true);
  add_net("communities", "community assignment per threshold", true);
  NetOptions users_opt;
  {
    CLI::App* s = add("novelty-users", "per-user novelty production rate");
    add_input_options(s, in);
    s->add_option("--min-posts", users_opt.min_posts, "minimum posts for a user to be listed")
        ->default_val(1);
    s->add_option("--adoption-threshold", users_opt.adoption_threshold, "other users needed for a tag to count");
  }

  ReplayOptions replay;
  {
    CLI::App* s = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    s->add_option("manifest", replay.manifest, "manifest.json")->required();
    s->add_option("-o,--output-dir", run.output_dir, "directory for the new artifacts")->required();
    s->add_flag("--check", replay.check, "fail unless inputs and outputs match the manifest");
  }

  try {
    args = expand_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    print_error("config", kConfigExit, e.what());
    return kConfigExit;
  } catch (const ConfigError& e) {
    print_error("config", kConfigExit, e.what());
    return kConfigExit;
  }

  run.sub = app.get_subcommands().front();
  const std::string command = run.sub->get_name();
  try {
    if (command == "simulate") run_simulate(run, sim);
    else if (command == "ingest") run_ingest(run, in);
    else if (command == "posts") run_posts(run, in);
    else if (command == "novelty") run_novelty(run, in, nov);
    else if (command == "pairs") run_pairs(run, in);
    else if (command == "birthmatrix") run_birthmatrix(run, in, birth);
    else if (command == "jsd-matrix") run_jsd_matrix(run, in, shift);
    else if (command == "jsd-consec") run_jsd_consec(run, in, shift, false);
    else if (command == "drift") run_jsd_consec(run, in, shift, true);
    else if (command == "usernet") run_usernet(run, in, net, true);
    else if (command == "communities") run_usernet(run, in, net, false);
    else if (command == "novelty-users") run_novelty_users(run, in, users_opt);
    else if (command == "replay") run_replay(run, replay);
    return kOk;
  } catch (const NestedExit& e) {
    return e.code;
  } catch (const ConfigError& e) {
    print_error("config", kConfigExit, e.what());
    return kConfigExit;
  } catch (const InputError& e) {
    print_error("input", kInputExit, e.what());
    return kInputExit;
  } catch (const InsufficientData& e) {
    print_error("input", kInputExit, e.what());
    return kInputExit;
  } catch (const std::exception& e) {
    print_error("invariant", kInvariantExit, e.what());
    return kInvariantExit;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
