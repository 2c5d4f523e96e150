#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_fit.h>
#include <gsl/gsl_sf_zeta.h>

#include "tagevo/corpus.hpp"
#include "tagevo/error.hpp"

namespace tagevo {

// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InsufficientData("least squares needs >= 2 points");
  LinearFit fit;
  double cov00 = 0, cov01 = 0, cov11 = 0, sumsq = 0;
  const int status = gsl_fit_linear(x.data(), 1, y.data(), 1, x.size(), &fit.intercept, &fit.slope,
                                    &cov00, &cov01, &cov11, &sumsq);
  if (status != GSL_SUCCESS || !std::isfinite(fit.slope)) {
    throw InsufficientData("degenerate least-squares problem");
  }
  fit.points = x.size();
  fit.rms_residual = std::sqrt(sumsq / static_cast<double>(x.size()));
  // gsl_fit_linear scales the covariance by the residual variance estimate.
  fit.slope_stderr = std::sqrt(cov11);
  return fit;
}

// ---------------------------------------------------------------------------
// Heaps' law
// ---------------------------------------------------------------------------

struct HeapsOptions {
  double skip_fraction = 0.01;        // leading share of annotations left out of the fit
  std::size_t points_per_decade = 50;  // log-spaced sample density
};

// Dictionary size D(n) ~ n^beta over annotations seen so far, fitted on
// log10 axes.
struct HeapsFit {
  double beta = 0.0;
  double intercept = 0.0;  // log10 D at n = 1
  std::uint64_t range_begin = 0;
  std::uint64_t range_end = 0;
  double residual = 0.0;  // rms on log10 axes
  std::size_t points = 0;
  bool low_confidence = false;  // fewer than two decades of annotations
};

inline HeapsFit heaps_fit(const Corpus& corpus, const HeapsOptions& opt = {}) {
  if (corpus.tags().size() < 2) throw InsufficientData("Heaps fit needs at least two distinct tags");
  if (!(opt.skip_fraction >= 0.0 && opt.skip_fraction < 1.0) || opt.points_per_decade == 0) {
    throw ConfigError("invalid Heaps fit options");
  }
  const std::uint64_t total = corpus.annotation_count();
  const std::uint64_t first =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(opt.skip_fraction * static_cast<double>(total))));

  // Sample positions n (1-based annotation counts), log-spaced over [first, total].
  std::vector<std::uint64_t> marks;
  const double lo = std::log10(static_cast<double>(first));
  const double hi = std::log10(static_cast<double>(total));
  const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) * static_cast<double>(opt.points_per_decade)));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double e = steps == 0 ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps);
    auto n = static_cast<std::uint64_t>(std::llround(std::pow(10.0, e)));
    n = std::clamp(n, first, total);
    if (marks.empty() || marks.back() != n) marks.push_back(n);
  }

  std::vector<double> x, y;
  std::vector<bool> seen(corpus.tags().size(), false);
  std::uint64_t n = 0, distinct = 0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < corpus.post_count() && next < marks.size(); ++i) {
    for (TagId t : corpus.post_tags(i)) {
      ++n;
      if (!seen[t]) {
        seen[t] = true;
        ++distinct;
      }
      if (next < marks.size() && n == marks[next]) {
        x.push_back(std::log10(static_cast<double>(n)));
        y.push_back(std::log10(static_cast<double>(distinct)));
        ++next;
      }
    }
  }
  if (x.size() < 2) throw InsufficientData("Heaps fit range holds fewer than two points");

  const LinearFit line = least_squares(x, y);
  HeapsFit fit;
  fit.beta = line.slope;
  fit.intercept = line.intercept;
  fit.range_begin = marks.front();
  fit.range_end = marks.back();
  fit.residual = line.rms_residual;
  fit.points = line.points;
  fit.low_confidence = total < 100;
  return fit;
}

// ---------------------------------------------------------------------------
// Zipf / frequency-distribution tail
// ---------------------------------------------------------------------------

struct ZipfOptions {
  std::uint64_t f_min = 10;       // 0 selects f_min by minimizing the KS distance
  double poor_fit_ks = 0.1;       // KS distance above which the fit is flagged poor
  std::size_t min_tags = 100;     // fewer distinct tags flags low confidence
  std::size_t min_tail = 50;      // smallest tail considered by the automatic f_min scan
};

struct RankFrequency {
  std::uint64_t rank;
  std::uint64_t frequency;
};

// Discrete power law P(f) ~ f^-exponent for f >= f_min, fitted by maximum
// likelihood on the tag frequency distribution.
struct ZipfFit {
  std::vector<RankFrequency> table;  // rank 1 = most frequent
  double exponent = 0.0;
  double exponent_stderr = 0.0;
  std::uint64_t f_min = 0;
  std::size_t tail_size = 0;
  double ks_distance = 1.0;
  bool low_confidence = false;
  bool poor_fit = false;
};

namespace detail {

// Hurwitz zeta sum_{k>=0} (k + q)^-s, s > 1, q > 0.
inline double hurwitz_zeta(double s, double q) {
  gsl_sf_result r;
  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  const int status = gsl_sf_hzeta_e(s, q, &r);
  gsl_set_error_handler(previous);
  if (status != GSL_SUCCESS) throw Error("Hurwitz zeta evaluation failed");
  return r.val;
}

struct TailFit {
  double exponent;
  double stderr_;
  double ks;
};

// `tail` is sorted ascending and every value is >= f_min.
inline TailFit fit_discrete_tail(std::span<const std::uint64_t> tail, std::uint64_t f_min) {
  const double n = static_cast<double>(tail.size());
  double sum_log = 0.0;
  for (std::uint64_t f : tail) sum_log += std::log(static_cast<double>(f));
  const double q = static_cast<double>(f_min);
  auto neg_loglik = [&](double s) { return s * sum_log + n * std::log(hurwitz_zeta(s, q)); };

  // Golden-section search; the log-likelihood is concave in the exponent.
  double a = 1.0 + 1e-6, b = 12.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = neg_loglik(c), fd = neg_loglik(d);
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = neg_loglik(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = neg_loglik(d);
    }
  }
  const double s = 0.5 * (a + b);

  // Observed information from a central second difference.
  const double h = 1e-4;
  const double curvature = (neg_loglik(s + h) - 2.0 * neg_loglik(s) + neg_loglik(s - h)) / (h * h);
  const double se = curvature > 0.0 ? 1.0 / std::sqrt(curvature) : 0.0;

  // KS distance between empirical and fitted CDFs over the observed values.
  const double z_min = hurwitz_zeta(s, q);
  double ks = 0.0;
  for (std::size_t i = 0; i < tail.size();) {
    std::size_t j = i;
    while (j < tail.size() && tail[j] == tail[i]) ++j;
    const double empirical = static_cast<double>(j) / n;
    const double model = 1.0 - hurwitz_zeta(s, static_cast<double>(tail[i]) + 1.0) / z_min;
    ks = std::max(ks, std::abs(empirical - model));
    i = j;
  }
  return {s, se, ks};
}

}  // namespace detail

inline ZipfFit zipf_fit(const Corpus& corpus, const ZipfOptions& opt = {}) {
  std::vector<std::uint64_t> freq = tag_frequencies(corpus);
  ZipfFit fit;
  std::vector<std::uint64_t> desc = freq;
  std::sort(desc.begin(), desc.end(), std::greater<>());
  fit.table.reserve(desc.size());
  for (std::size_t r = 0; r < desc.size(); ++r) fit.table.push_back({r + 1, desc[r]});
  fit.low_confidence = freq.size() < opt.min_tags;

  std::vector<std::uint64_t> asc(desc.rbegin(), desc.rend());
  auto tail_from = [&](std::uint64_t f_min) {
    auto it = std::lower_bound(asc.begin(), asc.end(), f_min);
    const auto offset = static_cast<std::size_t>(it - asc.begin());
    return std::span<const std::uint64_t>(asc.data() + offset, asc.size() - offset);
  };

  std::uint64_t f_min = opt.f_min;
  if (f_min == 0) {
    // Scan distinct observed values as candidate cutoffs.
    double best_ks = 2.0;
    f_min = 1;
    std::uint64_t prev = 0;
    for (std::uint64_t candidate : asc) {
      if (candidate == prev) continue;
      prev = candidate;
      const auto tail = tail_from(candidate);
      if (tail.size() < opt.min_tail) break;
      const auto tf = detail::fit_discrete_tail(tail, candidate);
      if (tf.ks < best_ks) {
        best_ks = tf.ks;
        f_min = candidate;
      }
    }
  }

  fit.f_min = f_min;
  const auto tail = tail_from(f_min);
  fit.tail_size = tail.size();
  std::uint64_t distinct_values = 0;
  for (std::size_t i = 0; i < tail.size(); ++i) distinct_values += (i == 0 || tail[i] != tail[i - 1]);
  if (tail.size() < 2 || distinct_values < 2) {
    fit.low_confidence = true;
    fit.poor_fit = true;
    return fit;
  }
  const auto tf = detail::fit_discrete_tail(tail, f_min);
  fit.exponent = tf.exponent;
  fit.exponent_stderr = tf.stderr_;
  fit.ks_distance = tf.ks;
  fit.poor_fit = fit.low_confidence || tf.ks > opt.poor_fit_ks;
  return fit;
}

}  // namespace tagevo
