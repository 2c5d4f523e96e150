#include <catch_amalgamated.hpp>

#include <cmath>

#include "support/fixtures.hpp"

using namespace tagevo;
using fixtures::make_corpus;

namespace {

WeightedDistribution dist(std::vector<WeightedDistribution::Entry> e) {
  return WeightedDistribution::from_weights(std::move(e));
}

// Entropy-form oracle: H(M) - (H(P) + H(Q)) / 2 over a dense support.
double jsd_by_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  auto h = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
      if (x > 0.0) s -= x * std::log2(x);
    }
    return s;
  };
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return h(m) - 0.5 * (h(p) + h(q));
}

std::vector<double> random_simplex(Rng& rng, std::size_t n, double zero_rate) {
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) {
    x = uniform01(rng) < zero_rate ? 0.0 : uniform01(rng);
    total += x;
  }
  if (total == 0.0) {
    v[0] = 1.0;
    total = 1.0;
  }
  for (auto& x : v) x /= total;
  return v;
}

WeightedDistribution from_dense(const std::vector<double>& v) {
  std::vector<WeightedDistribution::Entry> e;
  for (std::size_t i = 0; i < v.size(); ++i) e.emplace_back(static_cast<TagId>(i), v[i]);
  return dist(std::move(e));
}

TagId id(const Corpus& c, std::string_view name) { return *c.tags().find(name); }

}  // namespace

TEST_CASE("JSD reference values", "[semshift][jsd]") {
  const auto p = dist({{0, 0.5}, {1, 0.5}});
  const auto q = dist({{0, 1.0}});
  CHECK(jsd(p, q) == Catch::Approx(0.311278).margin(1e-6));
  CHECK(jsd(p, p) == 0.0);
  CHECK(jsd(dist({{0, 1.0}}), dist({{1, 1.0}})) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("JSD is symmetric, bounded and matches the entropy form", "[semshift][jsd][property]") {
  Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    const auto pv = random_simplex(rng, n, 0.3);
    const auto qv = random_simplex(rng, n, 0.3);
    const auto p = from_dense(pv);
    const auto q = from_dense(qv);
    const double d = jsd(p, q);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == jsd(q, p));
    CHECK(jsd(p, p) == Catch::Approx(0.0).margin(1e-12));
    CHECK(d == Catch::Approx(jsd_by_entropy(pv, qv)).margin(1e-9));
  }
}

TEST_CASE("JSD ignores how tag ids are labelled", "[semshift][jsd][property]") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pv = random_simplex(rng, 8, 0.2);
    const auto qv = random_simplex(rng, 8, 0.2);
    std::vector<TagId> perm{0, 1, 2, 3, 4, 5, 6, 7};
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    std::vector<WeightedDistribution::Entry> pp, qq;
    for (std::size_t i = 0; i < 8; ++i) {
      pp.emplace_back(perm[i] + 100, pv[i]);
      qq.emplace_back(perm[i] + 100, qv[i]);
    }
    CHECK(jsd(dist(pp), dist(qq)) == Catch::Approx(jsd(from_dense(pv), from_dense(qv))).margin(1e-12));
  }
}

TEST_CASE("JSD rejects empty or unnormalized input", "[semshift][jsd]") {
  const auto p = dist({{0, 1.0}});
  CHECK_THROWS_AS(jsd(WeightedDistribution{}, p), ContractViolation);
  CHECK_THROWS_AS(WeightedDistribution::from_probabilities({{0, 0.5}, {1, 0.2}}), ContractViolation);
  CHECK_THROWS_AS(WeightedDistribution::from_probabilities({{0, -0.5}, {1, 1.5}}), ContractViolation);
}

TEST_CASE("co-occurrence profile counts co-tags", "[semshift][profile]") {
  const auto c = make_corpus({{0, "u", {"k", "a", "b"}}, {1, "u", {"k", "a"}}, {2, "u", {"x", "y"}}});
  const auto p = cooccurrence_distribution(c, id(c, "k"), 0);
  REQUIRE(p.status == WeekStatus::kOk);
  CHECK(p.posts == 2);
  CHECK(p.total_weight == 3.0);
  CHECK(p.distribution.probability(id(c, "a")) == Catch::Approx(2.0 / 3.0));
  CHECK(p.distribution.probability(id(c, "b")) == Catch::Approx(1.0 / 3.0));
  CHECK(p.distribution.probability(id(c, "k")) == 0.0);

  SemshiftOptions strict;
  strict.min_share = 0.4;
  const auto s = cooccurrence_distribution(c, id(c, "k"), 0, strict);
  CHECK(s.distribution.support_size() == 1);
  CHECK(s.distribution.probability(id(c, "a")) == 1.0);

  SemshiftOptions per_post;
  per_post.weighting = CoTagWeighting::kPerPost;
  const auto pp = cooccurrence_distribution(c, id(c, "k"), 0, per_post);
  CHECK(pp.distribution.probability(id(c, "a")) == Catch::Approx(0.75));
  CHECK(pp.distribution.probability(id(c, "b")) == Catch::Approx(0.25));
}

TEST_CASE("profiles report absent tags and lonely uses", "[semshift][profile]") {
  const auto c = make_corpus({{0, "u", {"k"}}, {kSecondsPerWeek * 2, "u", {"k", "a"}}});
  CHECK(cooccurrence_distribution(c, id(c, "k"), 0).status == WeekStatus::kNoCoTags);
  CHECK(cooccurrence_distribution(c, id(c, "k"), 1).status == WeekStatus::kTagAbsent);
  CHECK(cooccurrence_distribution(c, id(c, "k"), 2).status == WeekStatus::kOk);
  const auto weeks = weekly_profiles(c, id(c, "k"));
  REQUIRE(weeks.size() == 2);
  CHECK(weeks[0].week == 0);
  CHECK(weeks[1].week == 2);
}

TEST_CASE("JSD matrix shows block structure", "[semshift][matrix]") {
  // Weeks 0-1 use profile A, weeks 2-3 profile B (disjoint).
  std::vector<fixtures::PostSpec> posts;
  for (std::int64_t w = 0; w < 4; ++w) {
    const std::string x = w < 2 ? "a1" : "b1";
    const std::string y = w < 2 ? "a2" : "b2";
    posts.push_back({w * kSecondsPerWeek, "u", {"k", x, y}});
    posts.push_back({w * kSecondsPerWeek + 1, "u", {"k", x}});
  }
  const auto c = make_corpus(posts);
  const auto m = jsd_matrix(c, id(c, "k"));
  REQUIRE(m.size() == 4);
  CHECK(m.excluded_weeks.empty());
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const bool same_block = (i < 2) == (j < 2);
      CHECK(m.at(i, j) == m.at(j, i));
      if (same_block) {
        CHECK(m.at(i, j) == Catch::Approx(0.0).margin(1e-12));
      } else {
        CHECK(m.at(i, j) == Catch::Approx(1.0).margin(1e-12));
      }
    }
  }
}

TEST_CASE("consecutive JSD marks gaps and excluded weeks", "[semshift][series]") {
  const auto c = make_corpus({
      {0, "u", {"k", "a"}},
      {kSecondsPerWeek, "u", {"k"}},
      {3 * kSecondsPerWeek, "u", {"k", "b"}},
      {4 * kSecondsPerWeek, "u", {"k", "b"}},
  });
  const auto series = consecutive_jsd(c, id(c, "k"));
  REQUIRE(series.size() == 2);
  CHECK(series[0].from_week == 0);
  CHECK(series[0].to_week == 3);
  CHECK(series[0].gap);
  CHECK(series[0].value == Catch::Approx(1.0));
  CHECK_FALSE(series[1].gap);
  CHECK(series[1].value == 0.0);
  const auto m = jsd_matrix(c, id(c, "k"));
  CHECK(m.excluded_weeks == std::vector<std::int64_t>{1});
}

TEST_CASE("short histories are insufficient", "[semshift][series]") {
  const auto c = make_corpus({{0, "u", {"k", "a"}}, {kSecondsPerWeek, "u", {"k"}}});
  CHECK_THROWS_AS(jsd_matrix(c, id(c, "k")), InsufficientData);
  CHECK_THROWS_AS(consecutive_jsd(c, id(c, "k")), InsufficientData);
}

TEST_CASE("drift classification rules", "[semshift][drift]") {
  const std::vector<double> calm(10, 0.05);
  CHECK(classify_drift(calm).drift == Drift::kConverging);

  std::vector<double> decreasing;
  for (int i = 0; i < 20; ++i) decreasing.push_back(0.8 - 0.75 * i / 19.0);
  CHECK(classify_drift(decreasing).drift == Drift::kConverging);

  const std::vector<double> noisy(10, 0.5);
  CHECK(classify_drift(noisy).drift == Drift::kWandering);

  std::vector<double> two_spikes(10, 0.05);
  two_spikes[4] = two_spikes[8] = 0.9;
  const auto r = classify_drift(two_spikes);
  CHECK(r.drift == Drift::kWandering);
  CHECK(r.spikes == 2);

  std::vector<double> one_spike(10, 0.05);
  one_spike[9] = 0.9;
  CHECK(classify_drift(one_spike).drift == Drift::kIndeterminate);

  CHECK(classify_drift(std::vector<double>(3, 0.0)).drift == Drift::kInsufficient);
  CHECK(drift_name(Drift::kWandering) == "wandering");
}

TEST_CASE("constructed streams are classified as built", "[semshift][drift]") {
  const auto settled = fixtures::converging_stream(30, 10, 200, 3);
  const auto cs = consecutive_jsd(settled, id(settled, "k"));
  CHECK(classify_drift(values_of(cs)).drift == Drift::kConverging);

  const auto switching = fixtures::regime_switching_stream(30, 4, 200, 4);
  const auto ss = consecutive_jsd(switching, id(switching, "k"));
  CHECK(classify_drift(values_of(ss)).drift == Drift::kWandering);
}
