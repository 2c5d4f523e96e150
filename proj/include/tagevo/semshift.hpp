#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "tagevo/corpus.hpp"
#include "tagevo/distribution.hpp"
#include "tagevo/error.hpp"

namespace tagevo {

// How a post contributes to a tag's co-occurrence profile.
//   kTokens:  every co-present tag counts 1.
//   kPerPost: each post spreads a total weight of 1 over its co-present tags.
enum class CoTagWeighting { kTokens, kPerPost };

struct SemshiftOptions {
  std::int64_t width = kSecondsPerWeek;
  double min_share = 0.01;  // co-tags below this share of the week's total are dropped
  CoTagWeighting weighting = CoTagWeighting::kTokens;
};

enum class WeekStatus {
  kOk,
  kTagAbsent,  // the tag does not occur in the week
  kNoCoTags,   // it occurs, but never together with another surviving tag
};

struct WeekProfile {
  std::int64_t week = 0;
  WeekStatus status = WeekStatus::kTagAbsent;
  std::uint64_t posts = 0;    // posts containing the tag
  double total_weight = 0.0;  // co-tag weight before the min_share filter
  WeightedDistribution distribution;
};

namespace detail {

// First post index with relative time >= t.
inline std::size_t first_post_at(const Corpus& c, std::int64_t t) {
  std::size_t lo = 0, hi = c.post_count();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (c.post_time(mid) < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

inline void accumulate(std::span<const TagId> tags, TagId k, CoTagWeighting weighting,
                       std::map<TagId, double>& counts) {
  if (tags.size() < 2) return;
  const double w = weighting == CoTagWeighting::kTokens ? 1.0 : 1.0 / static_cast<double>(tags.size() - 1);
  for (TagId t : tags) {
    if (t != k) counts[t] += w;
  }
}

inline WeekProfile finish_profile(std::int64_t week, std::uint64_t posts,
                                  const std::map<TagId, double>& counts, double min_share) {
  WeekProfile p;
  p.week = week;
  p.posts = posts;
  if (posts == 0) return p;
  double total = 0.0;
  for (const auto& [id, c] : counts) total += c;
  p.total_weight = total;
  std::vector<WeightedDistribution::Entry> kept;
  for (const auto& [id, c] : counts) {
    if (c / total >= min_share) kept.emplace_back(id, c);
  }
  p.distribution = WeightedDistribution::from_weights(std::move(kept));
  p.status = p.distribution.empty() ? WeekStatus::kNoCoTags : WeekStatus::kOk;
  return p;
}

}  // namespace detail

// f_k(t): distribution of tags co-occurring with `k` in posts of week `week`.
// The tag itself is excluded; co-tags under min_share are dropped before
// renormalizing.
inline WeekProfile cooccurrence_distribution(const Corpus& corpus, TagId k, std::int64_t week,
                                             const SemshiftOptions& opt = {}) {
  if (opt.width <= 0) throw ConfigError("bucket width must be positive");
  const std::size_t begin = detail::first_post_at(corpus, week * opt.width);
  const std::size_t end = detail::first_post_at(corpus, (week + 1) * opt.width);
  std::map<TagId, double> counts;
  std::uint64_t posts = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto tags = corpus.post_tags(i);
    if (std::find(tags.begin(), tags.end(), k) == tags.end()) continue;
    ++posts;
    detail::accumulate(tags, k, opt.weighting, counts);
  }
  return detail::finish_profile(week, posts, counts, opt.min_share);
}

// Profiles of `k` for every week in which it occurs, in week order.
inline std::vector<WeekProfile> weekly_profiles(const Corpus& corpus, TagId k,
                                                const SemshiftOptions& opt = {}) {
  if (opt.width <= 0) throw ConfigError("bucket width must be positive");
  std::map<std::int64_t, std::pair<std::uint64_t, std::map<TagId, double>>> weeks;
  for (std::size_t i = 0; i < corpus.post_count(); ++i) {
    const auto tags = corpus.post_tags(i);
    if (std::find(tags.begin(), tags.end(), k) == tags.end()) continue;
    auto& [posts, counts] = weeks[corpus.bucket(i, opt.width)];
    ++posts;
    detail::accumulate(tags, k, opt.weighting, counts);
  }
  std::vector<WeekProfile> out;
  out.reserve(weeks.size());
  for (const auto& [week, data] : weeks) {
    out.push_back(detail::finish_profile(week, data.first, data.second, opt.min_share));
  }
  return out;
}

// Pairwise JSD between the weekly profiles of one tag. Weeks whose profile is
// empty are listed in `excluded_weeks` and left out of the matrix.
struct JsdMatrix {
  TagId tag = 0;
  std::vector<std::int64_t> weeks;
  std::vector<std::int64_t> excluded_weeks;
  std::vector<double> values;  // row-major, weeks.size() squared

  std::size_t size() const { return weeks.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * weeks.size() + j]; }
};

inline std::vector<WeekProfile> usable_profiles(const Corpus& corpus, TagId k, const SemshiftOptions& opt,
                                                std::vector<std::int64_t>* excluded = nullptr) {
  auto profiles = weekly_profiles(corpus, k, opt);
  std::vector<WeekProfile> usable;
  for (auto& p : profiles) {
    if (p.status == WeekStatus::kOk) {
      usable.push_back(std::move(p));
    } else if (excluded != nullptr) {
      excluded->push_back(p.week);
    }
  }
  if (usable.size() < 2) {
    throw InsufficientData("tag '" + corpus.tags().name(k) + "' has fewer than two usable weeks");
  }
  return usable;
}

inline JsdMatrix jsd_matrix(const Corpus& corpus, TagId k, const SemshiftOptions& opt = {}) {
  JsdMatrix m;
  m.tag = k;
  const auto usable = usable_profiles(corpus, k, opt, &m.excluded_weeks);
  const std::size_t n = usable.size();
  for (const auto& p : usable) m.weeks.push_back(p.week);
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = jsd(usable[i].distribution, usable[j].distribution);
      m.values[i * n + j] = d;
      m.values[j * n + i] = d;
    }
  }
  return m;
}

struct ConsecutiveJsd {
  std::int64_t from_week;
  std::int64_t to_week;
  double value;
  bool gap;  // weeks in between were inactive or had no usable profile
};

inline std::vector<ConsecutiveJsd> consecutive_jsd(const Corpus& corpus, TagId k,
                                                   const SemshiftOptions& opt = {}) {
  const auto usable = usable_profiles(corpus, k, opt);
  std::vector<ConsecutiveJsd> out;
  out.reserve(usable.size() - 1);
  for (std::size_t i = 0; i + 1 < usable.size(); ++i) {
    out.push_back({usable[i].week, usable[i + 1].week,
                   jsd(usable[i].distribution, usable[i + 1].distribution),
                   usable[i + 1].week - usable[i].week > 1});
  }
  return out;
}

enum class Drift {
  kConverging,
  kWandering,
  kIndeterminate,  // low trailing mean but a single spike
  kInsufficient,   // series shorter than the window
};

inline std::string_view drift_name(Drift d) {
  switch (d) {
    case Drift::kConverging: return "converging";
    case Drift::kWandering: return "wandering";
    case Drift::kIndeterminate: return "indeterminate";
    case Drift::kInsufficient: return "insufficient";
  }
  return "unknown";
}

struct DriftOptions {
  std::size_t window = 8;
  double threshold = 0.3;  // spikes are values above twice this
};

struct DriftReport {
  Drift drift = Drift::kInsufficient;
  double trailing_mean = 0.0;
  std::size_t spikes = 0;
};

// Trailing-window rule on a consecutive-JSD series:
//   converging    mean < threshold and no spike
//   wandering     mean >= threshold or at least two spikes
inline DriftReport classify_drift(std::span<const double> series, const DriftOptions& opt = {}) {
  if (opt.window == 0) throw ConfigError("drift window must be positive");
  DriftReport r;
  if (series.size() < opt.window) return r;
  const auto tail = series.last(opt.window);
  double sum = 0.0;
  for (double v : tail) {
    sum += v;
    if (v > 2.0 * opt.threshold) ++r.spikes;
  }
  r.trailing_mean = sum / static_cast<double>(opt.window);
  if (r.trailing_mean >= opt.threshold || r.spikes >= 2) {
    r.drift = Drift::kWandering;
  } else if (r.spikes == 0) {
    r.drift = Drift::kConverging;
  } else {
    r.drift = Drift::kIndeterminate;
  }
  return r;
}

inline std::vector<double> values_of(std::span<const ConsecutiveJsd> series) {
  std::vector<double> v;
  v.reserve(series.size());
  for (const auto& s : series) v.push_back(s.value);
  return v;
}

}  // namespace tagevo
