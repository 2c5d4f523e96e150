#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "tagevo/corpus.hpp"
#include "tagevo/error.hpp"

namespace tagevo {

// Sparse probability distribution over tag ids. Entries are sorted by id,
// strictly positive, and sum to 1 within kTolerance.
class WeightedDistribution {
 public:
  using Entry = std::pair<TagId, double>;
  static constexpr double kTolerance = 1e-9;

  WeightedDistribution() = default;

  // Normalizes non-negative weights; zero weights are dropped. An all-zero
  // input yields the empty distribution.
  static WeightedDistribution from_weights(std::vector<Entry> weights) {
    std::sort(weights.begin(), weights.end());
    std::vector<Entry> merged;
    for (const auto& [id, w] : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ContractViolation("weights must be finite and >= 0");
      if (w == 0.0) continue;
      if (!merged.empty() && merged.back().first == id) {
        merged.back().second += w;
      } else {
        merged.emplace_back(id, w);
      }
    }
    double total = 0.0;
    for (const auto& e : merged) total += e.second;
    WeightedDistribution d;
    for (auto& e : merged) e.second /= total;
    d.entries_ = std::move(merged);
    return d;
  }

  static WeightedDistribution from_counts(const std::map<TagId, double>& counts) {
    return from_weights({counts.begin(), counts.end()});
  }

  // Takes probabilities as given and checks them.
  static WeightedDistribution from_probabilities(std::vector<Entry> probs) {
    std::sort(probs.begin(), probs.end());
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double p = probs[i].second;
      if (!(p > 0.0) || !std::isfinite(p)) throw ContractViolation("probabilities must be positive");
      if (i > 0 && probs[i].first == probs[i - 1].first) throw ContractViolation("duplicate tag id");
      total += p;
    }
    if (std::abs(total - 1.0) > kTolerance) throw ContractViolation("probabilities must sum to 1");
    WeightedDistribution d;
    d.entries_ = std::move(probs);
    return d;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }
  std::span<const Entry> entries() const { return entries_; }

  double probability(TagId id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{id, 0.0},
                               [](const Entry& a, const Entry& b) { return a.first < b.first; });
    return it != entries_.end() && it->first == id ? it->second : 0.0;
  }

  double total() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.second;
    return s;
  }

  friend bool operator==(const WeightedDistribution&, const WeightedDistribution&) = default;

 private:
  std::vector<Entry> entries_;
};

namespace detail {

// p log2(p / m) for the half-mixture m = (p + q) / 2, with 0 log 0 = 0.
inline double kl_term(double p, double m) { return p > 0.0 ? p * std::log2(p / m) : 0.0; }

}  // namespace detail

// Jensen-Shannon divergence with base-2 logarithms, in [0, 1]. The sum runs
// over the merged support in id order and each term is built symmetrically,
// so jsd(p, q) == jsd(q, p) bit for bit.
inline double jsd(const WeightedDistribution& p, const WeightedDistribution& q) {
  if (p.empty() || q.empty()) throw ContractViolation("jsd of an empty distribution");
  if (std::abs(p.total() - 1.0) > WeightedDistribution::kTolerance ||
      std::abs(q.total() - 1.0) > WeightedDistribution::kTolerance) {
    throw ContractViolation("jsd needs normalized distributions");
  }
  const auto a = p.entries();
  const auto b = q.entries();
  std::size_t i = 0, j = 0;
  double sum = 0.0;
  while (i < a.size() || j < b.size()) {
    double pa = 0.0, qb = 0.0;
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      pa = a[i++].second;
    } else if (i == a.size() || b[j].first < a[i].first) {
      qb = b[j++].second;
    } else {
      pa = a[i++].second;
      qb = b[j++].second;
    }
    const double m = 0.5 * (pa + qb);
    sum += detail::kl_term(pa, m) + detail::kl_term(qb, m);
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

}  // namespace tagevo
