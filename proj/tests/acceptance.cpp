// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <gsl/gsl_cdf.h>

#include "support/fixtures.hpp"

using namespace tagevo;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-34s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs a criterion body; an exception counts as failure.
void criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(id, name, pass, detail);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

struct Trend {
  double mean;
  double slope;
  double lo;  // 95% CI of the slope
  double hi;
};

// Mean and OLS slope of y against its index, with a t-based 95% interval.
Trend trend(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mx += static_cast<double>(i);
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
    sxy += (static_cast<double>(i) - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - (my + slope * (static_cast<double>(i) - mx));
    rss += r * r;
  }
  const double se = std::sqrt(rss / (n - 2.0) / sxx);
  const double t = gsl_cdf_tdist_Pinv(0.975, n - 2.0);
  return {my, slope, slope - t * se, slope + t * se};
}

Corpus single_stream(double alpha, std::uint64_t steps, std::uint64_t seed) {
  YSConfig c;
  c.alpha = alpha;
  c.steps = steps;
  c.seed = seed;
  return to_corpus(generate_sequence(c));
}

// ---------------------------------------------------------------------------

void constant_novelty() {
  criterion(1, "YS constant novelty", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const Corpus c = single_stream(0.05, 1000000, 101);
    const auto s = single_novelty_series(c, 10000);
    const double elapsed = seconds_since(t0);
    const Trend tr = trend(s.proportion);
    const bool pass = s.proportion.size() == 100 && std::abs(tr.mean - 0.05) <= 0.005 && tr.lo <= 0.0 &&
                      tr.hi >= 0.0 && elapsed < 10.0;
    return std::pair{pass, fmt("mean=%.5f (0.05+-0.005) slope=%.2e CI=[%.2e, %.2e] time=%.2fs (<10s)", tr.mean,
                               tr.slope, tr.lo, tr.hi, elapsed)};
  });
}

void zipf_and_heaps() {
  Corpus c;
  double gen_time = 0.0;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    c = single_stream(0.1, 1000000, 202);
    gen_time = seconds_since(t0);
  } catch (const std::exception& e) {
    report(2, "YS Zipf tail", false, e.what());
    report(3, "Heaps linearity", false, e.what());
    return;
  }
  criterion(2, "YS Zipf tail", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const ZipfFit fit = zipf_fit(c);
    const double elapsed = gen_time + seconds_since(t0);
    const double target = 1.0 + 1.0 / 0.9;
    const bool pass = std::abs(fit.exponent - target) <= 0.15 && elapsed < 30.0;
    return std::pair{pass, fmt("exponent=%.4f (%.4f+-0.15) f_min=%llu tail=%zu ks=%.4f time=%.2fs (<30s)",
                               fit.exponent, target, static_cast<unsigned long long>(fit.f_min), fit.tail_size,
                               fit.ks_distance, elapsed)};
  });
  criterion(3, "Heaps linearity", [&] {
    const HeapsFit fit = heaps_fit(c);
    bool pass = std::abs(fit.beta - 1.0) <= 0.03;
    std::string detail = fmt("YS beta=%.4f (1+-0.03)", fit.beta);
    const char* sample = std::getenv("TAGEVO_SAMPLE_LOG");
    if (sample != nullptr && fs::exists(sample)) {
      const auto log = parse_annotation_file(sample);
      const HeapsFit s = heaps_fit(log.corpus);
      pass = pass && s.beta >= 0.7 && s.beta <= 1.0;
      detail += fmt("; sample log beta=%.4f ([0.7, 1])", s.beta);
    } else {
      detail += "; no sample STS log supplied (TAGEVO_SAMPLE_LOG)";
    }
    return std::pair{pass, detail};
  });
}

void set_pairwise_novelty() {
  criterion(4, "Set-YS pairwise novelty", [] {
    const Corpus c = fixtures::set_ys_corpus(0.1, 100000, 3, 303, 1);
    const std::int64_t width = 1000;
    const auto pairs = pairwise_novelty_series(c, width).proportion;
    const auto single = single_novelty_series(c, width).proportion;

    // Centered 5-bucket moving average.
    std::vector<double> smooth(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::size_t lo = i >= 2 ? i - 2 : 0, hi = std::min(pairs.size() - 1, i + 2);
      double s = 0.0;
      for (std::size_t k = lo; k <= hi; ++k) s += pairs[k];
      smooth[i] = s / static_cast<double>(hi - lo + 1);
    }
    const std::size_t half = pairs.size() / 2;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < half; ++i) first += pairs[i];
    first /= static_cast<double>(half);
    double var = 0.0;
    for (std::size_t i = 0; i < half; ++i) var += (pairs[i] - first) * (pairs[i] - first);
    const double se = std::sqrt(var / static_cast<double>(half - 1) / static_cast<double>(half));
    for (std::size_t i = half; i < pairs.size(); ++i) last += smooth[i];
    last /= static_cast<double>(pairs.size() - half);

    const double expected_single = 1.0 - std::pow(0.9, 3);
    const Trend st = trend(single);
    const bool flat = std::abs(st.mean - expected_single) <= 0.005 && st.lo <= 0.0 && st.hi >= 0.0;
    const bool pass = last >= first - se && flat;
    return std::pair{pass, fmt("pairs first-half=%.4f last-half(smoothed)=%.4f SE=%.4f; single mean=%.4f "
                               "(%.4f+-0.005) slope CI=[%.2e, %.2e]",
                               first, last, se, st.mean, expected_single, st.lo, st.hi)};
  });
}

void jsd_suite() {
  criterion(5, "JSD unit suite", [] {
    using WD = WeightedDistribution;
    const WD a = WD::from_weights({{0, 1.0}});
    const WD ab = WD::from_weights({{0, 0.5}, {1, 0.5}});
    const WD b = WD::from_weights({{1, 1.0}});
    const double hand = jsd(a, ab);
    const bool known = std::abs(hand - 0.311278) <= 1e-6;
    const bool self = jsd(ab, ab) == 0.0 && jsd(a, a) == 0.0;
    const bool disjoint = std::abs(jsd(a, b) - 1.0) <= 1e-12;
    Rng rng(505);
    bool bounded = true, symmetric = jsd(a, ab) == jsd(ab, a);
    for (int i = 0; i < 1000; ++i) {
      std::vector<WD::Entry> p, q;
      const std::size_t n = 1 + uniform_index(rng, 20);
      for (std::size_t k = 0; k < n; ++k) {
        if (uniform01(rng) < 0.7) p.emplace_back(static_cast<TagId>(k), uniform01(rng) + 1e-6);
        if (uniform01(rng) < 0.7) q.emplace_back(static_cast<TagId>(k), uniform01(rng) + 1e-6);
      }
      if (p.empty()) p.emplace_back(0, 1.0);
      if (q.empty()) q.emplace_back(1, 1.0);
      const WD pd = WD::from_weights(p), qd = WD::from_weights(q);
      const double d = jsd(pd, qd);
      bounded = bounded && d >= 0.0 && d <= 1.0;
      symmetric = symmetric && d == jsd(qd, pd);
    }
    const bool pass = known && self && disjoint && bounded && symmetric;
    return std::pair{pass, fmt("hand=%.7f (0.311278+-1e-6) self=0:%s disjoint=1:%s symmetric:%s 1000 random in "
                               "[0,1]:%s",
                               hand, self ? "yes" : "no", disjoint ? "yes" : "no", symmetric ? "yes" : "no",
                               bounded ? "yes" : "no")};
  });
}

void pair_oracle() {
  criterion(6, "First-co-occurrence oracle", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const Corpus c = fixtures::set_ys_corpus(0.1, 10000, 3, 606, 1);
    const std::int64_t width = 250;
    const auto oracle = fixtures::rescan_pair_events(c);

    const auto series = pairwise_novelty_series(c, width);
    std::vector<std::uint64_t> expected(series.novel_pairs.size(), 0);
    for (const auto& e : oracle) ++expected[static_cast<std::size_t>(c.bucket(e.post, width))];
    const bool series_ok = series.novel_pairs == expected;

    PairBirthMatrixOptions opt;
    opt.birth_width = width;
    const auto m = pair_birth_matrix(c, opt);
    std::vector<double> cells(m.dimension * m.dimension, 0.0);
    for (const auto& e : oracle) {
      const auto y1 = static_cast<std::size_t>(c.tags().birth_time(e.first) / width);
      const auto y2 = static_cast<std::size_t>(c.tags().birth_time(e.second) / width);
      cells[y1 * m.dimension + y2] += 0.5;
      cells[y2 * m.dimension + y1] += 0.5;
    }
    bool matrix_ok = m.novel_pairs == oracle.size();
    for (std::size_t i = 0; i < cells.size() && matrix_ok; ++i) {
      matrix_ok = std::abs(m.cells[i] * static_cast<double>(m.co_usages) - cells[i]) <= 1e-9;
    }
    const bool events_ok = first_pair_events(c) == oracle;
    const double elapsed = seconds_since(t0);
    const bool pass = series_ok && matrix_ok && events_ok && elapsed < 60.0;
    return std::pair{pass, fmt("posts=%zu events=%zu series:%s matrix:%s events:%s time=%.2fs (<60s)",
                               c.post_count(), oracle.size(), series_ok ? "match" : "DIFFER",
                               matrix_ok ? "match" : "DIFFER", events_ok ? "match" : "DIFFER", elapsed)};
  });
}

void modularity_oracle() {
  criterion(7, "Modularity oracle", [] {
    const auto family = fixtures::random_connected_family(50, 8, 707);
    double worst_gap = 0.0;
    for (const auto& sg : family) {
      const Graph g(sg.n, sg.edges);
      const double best = fixtures::brute_force_best_modularity(sg.n, g.edges());
      worst_gap = std::max(worst_gap, best - detect_communities(g).modularity);
    }
    const Graph tri(6, fixtures::two_triangles_with_bridge());
    const auto p = detect_communities(tri);
    const bool tri_ok = p.labels == std::vector<std::uint32_t>{0, 0, 0, 1, 1, 1} &&
                        std::abs(p.modularity - 5.0 / 14.0) <= 1e-12;
    std::vector<Edge> k;
    for (NodeId i = 0; i < 6; ++i) {
      for (NodeId j = i + 1; j < 6; ++j) k.emplace_back(i, j);
    }
    const auto complete = detect_communities(Graph(6, k));
    const bool complete_ok = complete.communities == 1 && std::abs(complete.modularity) <= 1e-12;
    const bool pass = worst_gap <= 0.05 && tri_ok && complete_ok;
    return std::pair{pass, fmt("50 graphs worst gap=%.4f (<=0.05); two-triangle Q=%.6f (5/14) exact:%s; complete "
                               "Q=%.1e communities=%zu",
                               worst_gap, p.modularity, tri_ok ? "yes" : "no", complete.modularity,
                               complete.communities)};
  });
}

void drift_classification() {
  criterion(8, "Drift classification", [] {
    const Corpus settled = fixtures::converging_stream(30, 10, 200, 808);
    const TagId k1 = *settled.tags().find("k");
    const auto cs = consecutive_jsd(settled, k1);
    const auto cr = classify_drift(values_of(cs));
    const auto m = jsd_matrix(settled, k1);
    double block = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (m.weeks[i] >= 10 && m.weeks[j] >= 10) block = std::max(block, m.at(i, j));
      }
    }

    const Corpus switching = fixtures::regime_switching_stream(30, 4, 200, 809);
    const TagId k2 = *switching.tags().find("k");
    const auto ss = consecutive_jsd(switching, k2);
    const auto sr = classify_drift(values_of(ss));
    std::size_t spikes = 0;
    for (const auto& s : ss) spikes += s.value > 0.6;

    const bool pass =
        cr.drift == Drift::kConverging && block < 0.05 && sr.drift == Drift::kWandering && spikes >= 4;
    return std::pair{pass, fmt("converging stream -> %s, block max=%.4f (<0.05); switching stream -> %s, "
                               "spikes>0.6=%zu (>=4)",
                               std::string(drift_name(cr.drift)).c_str(), block,
                               std::string(drift_name(sr.drift)).c_str(), spikes)};
  });
}

void sweep_monotonicity() {
  criterion(9, "Threshold-sweep monotonicity", [] {
    const std::vector<double> thresholds{0.4, 0.35, 0.3, 0.25};
    bool nested = true;
    std::string counts;
    const std::vector<std::pair<double, std::uint32_t>> corpora{{0.1, 60}, {0.12, 30}, {0.15, 30}};
    for (std::uint64_t seed = 1; seed <= corpora.size(); ++seed) {
      YSConfig cfg;
      cfg.alpha = corpora[seed - 1].first;
      cfg.steps = 3000;
      cfg.seed = 900 + seed;
      ToCorpusOptions opt;
      opt.users = UserAssignment::kUniform;
      opt.user_count = corpora[seed - 1].second;
      opt.seed = seed;
      const Corpus c = to_corpus(generate_set_sequence(cfg), opt);
      const auto profiles = build_user_profiles(c, filter_active_users(c, 20));
      const auto nets = similarity_sweep(profiles, thresholds);
      for (std::size_t i = 1; i < nets.size(); ++i) {
        const auto& wide = nets[i - 1].graph.edges();
        const auto& narrow = nets[i].graph.edges();
        nested = nested && std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end());
      }
      counts += (seed > 1 ? " | " : "");
      for (std::size_t i = 0; i < nets.size(); ++i) counts += (i ? "," : "") + std::to_string(nets[i].graph.edge_count());
    }
    return std::pair{nested, "edges at 0.4,0.35,0.3,0.25: " + counts + (nested ? " nested" : " NOT nested")};
  });
}

// Writes `rows` annotation rows shaped like a large tagging log.
void write_synthetic_log(const fs::path& path, std::uint64_t rows) {
  YSConfig cfg;
  cfg.alpha = 0.04;
  cfg.steps = rows / 3 + rows / 100;  // slack for slots lost to collisions
  cfg.seed = 1010;
  const auto seq = generate_set_sequence(cfg);
  Rng rng(1011);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw std::runtime_error("cannot create " + path.string());
  std::vector<char> buffer(1 << 20);
  std::setvbuf(f, buffer.data(), _IOFBF, buffer.size());
  std::uint64_t written = 0;
  const std::int64_t start = 1262304000;  // 2010-01-01
  for (std::size_t i = 0; i < seq.size() && written < rows; ++i) {
    const std::int64_t t = start + static_cast<std::int64_t>(i) * 19;
    const auto user = uniform_index(rng, 70000);
    for (std::uint64_t tag : seq.post(i)) {
      if (written == rows) break;
      std::fprintf(f, "%lld\tphoto-%zu\tuser-%llu\ttag-%llu\n", static_cast<long long>(t), i,
                   static_cast<unsigned long long>(user), static_cast<unsigned long long>(tag));
      ++written;
    }
  }
  std::fclose(f);
  if (written < rows) throw std::runtime_error("synthetic log came out short");
}

void throughput() {
  criterion(10, "Throughput 1e7 rows", [] {
    const std::uint64_t rows = 10000000;
    const fs::path path = fs::temp_directory_path() / ("tagevo_throughput_" + std::to_string(::getpid()) + ".tsv");
    write_synthetic_log(path, rows);

    // Ingest in a child process so its peak RSS is measured alone.
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    const pid_t pid = fork();
    if (pid == 0) {
      close(fds[0]);
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = parse_annotation_file(path.string());
      const auto s = single_novelty_series(r.corpus);
      double out[3] = {seconds_since(t0), static_cast<double>(r.stats.rows_kept), static_cast<double>(s.posts.size())};
      if (write(fds[1], out, sizeof out) != static_cast<ssize_t>(sizeof out)) _exit(2);
      _exit(0);
    }
    close(fds[1]);
    double out[3] = {0, 0, 0};
    const bool got = read(fds[0], out, sizeof out) == static_cast<ssize_t>(sizeof out);
    close(fds[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    struct rusage usage {};
    getrusage(RUSAGE_CHILDREN, &usage);
    fs::remove(path);
    const double peak_gb = static_cast<double>(usage.ru_maxrss) / (1024.0 * 1024.0);
    const bool pass = got && WIFEXITED(status) && WEXITSTATUS(status) == 0 && out[0] < 120.0 && peak_gb < 4.0 &&
                      out[1] == static_cast<double>(rows);
    return std::pair{pass, fmt("rows kept=%.0f buckets=%.0f time=%.1fs (<120s) peak RSS=%.2f GB (<4 GB)", out[1],
                               out[2], out[0], peak_gb)};
  });
}

}  // namespace

int main() {
  constant_novelty();
  zipf_and_heaps();
  set_pairwise_novelty();
  jsd_suite();
  pair_oracle();
  modularity_oracle();
  drift_classification();
  sweep_monotonicity();
  throughput();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
