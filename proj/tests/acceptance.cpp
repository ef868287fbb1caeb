// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include "oracles.hpp"

#include "reid/bench.hpp"
#include "reid/embedio.hpp"
#include "reid/gradcheck.hpp"
#include "reid/kernels.hpp"
#include "reid/metrics.hpp"
#include "reid/parallel.hpp"
#include "reid/report.hpp"
#include "reid/rerank.hpp"
#include "reid/rng.hpp"
#include "reid/sampling.hpp"
#include "reid/synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace k = reid::kernels;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

reid::DistanceMatrix random_instance(reid::Rng& rng) {
  const std::size_t q = 1 + rng.uniform_index(20);
  const std::size_t g = 1 + rng.uniform_index(50);
  const std::size_t ids = 1 + rng.uniform_index(8);
  const std::size_t cams = 1 + rng.uniform_index(4);
  const bool coarse = rng.uniform01() < 0.5;
  reid::DistanceMatrix d;
  d.values.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(g));
  for (Eigen::Index i = 0; i < d.values.size(); ++i) {
    d.values.data()[i] = coarse ? static_cast<double>(rng.uniform_index(6)) : rng.uniform01();
  }
  for (std::size_t i = 0; i < q; ++i) {
    d.query_meta.person_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(ids)));
    d.query_meta.cam_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(cams)));
  }
  for (std::size_t j = 0; j < g; ++j) {
    d.gallery_meta.person_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(ids)));
    d.gallery_meta.cam_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(cams)));
  }
  return d;
}

std::vector<oracle::QueryResult> oracle_rows(const reid::DistanceMatrix& d) {
  std::vector<oracle::QueryResult> out;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto row = d.values.row(i);
    out.push_back(oracle::evaluate_query(
        std::vector<double>(row.data(), row.data() + d.cols()), d.gallery_meta.person_ids,
        d.gallery_meta.cam_ids, d.query_meta.person_ids[static_cast<std::size_t>(i)],
        d.query_meta.cam_ids[static_cast<std::size_t>(i)], true));
  }
  return out;
}

Outcome metric_oracle_equivalence() {
  reid::Rng rng(1);
  const auto start = Clock::now();
  int instances = 0;
  int mismatches = 0;
  while (instances < 1000) {
    const auto d = random_instance(rng);
    const auto expected = oracle_rows(d);
    if (std::all_of(expected.begin(), expected.end(), [](const auto& q) { return q.skipped; })) {
      continue;
    }
    ++instances;
    const auto report = reid::evaluate(d);
    const auto agg = oracle::aggregate(expected, report.cmc.size());
    bool same = report.map == agg.map && report.minp == agg.minp && report.cmc == agg.cmc;
    for (std::size_t i = 0; i < expected.size() && same; ++i) {
      const auto& got = report.per_query[i];
      same = got.skipped == expected[i].skipped &&
             (got.skipped || (*got.ap == expected[i].ap && *got.inp == expected[i].inp));
    }
    if (!same) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          fmt("%.0f instances, %.0f mismatches, %.3f s", instances, mismatches, secs)};
}

Outcome minp_map_collapse() {
  reid::Rng rng(2);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t g = 2 + rng.uniform_index(49);
    const std::size_t q = 1 + rng.uniform_index(20);
    reid::DistanceMatrix d;
    d.values.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(g));
    for (Eigen::Index i = 0; i < d.values.size(); ++i) d.values.data()[i] = rng.uniform01();
    for (std::size_t j = 0; j < g; ++j) {
      d.gallery_meta.person_ids.push_back(static_cast<std::int64_t>(j));
      d.gallery_meta.cam_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(3)));
    }
    for (std::size_t i = 0; i < q; ++i) {
      d.query_meta.person_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(g)));
      d.query_meta.cam_ids.push_back(3);
    }
    const auto r = reid::evaluate(d);
    if (r.minp != r.map) ++violations;
  }
  return {violations == 0, fmt("1000 single-match instances, %.0f with mINP != mAP", violations)};
}

Outcome ap_inp_inversion() {
  auto eval = [](std::vector<std::size_t> ranks) {
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::vector<bool> mask(10, false);
    for (std::size_t r : ranks) mask[r - 1] = true;
    return reid::query_eval(order, mask);
  };
  const auto a = eval({1, 2, 10});
  const auto b = eval({3, 5, 7});
  const double ap1 = 23.0 / 30.0;
  const double inp1 = 3.0 / 10.0;
  const double ap2 = 122.0 / 315.0;
  const double inp2 = 3.0 / 7.0;
  const bool close = std::abs(*a.ap - ap1) <= 1e-12 && std::abs(*a.inp - inp1) <= 1e-12 &&
                     std::abs(*b.ap - ap2) <= 1e-12 && std::abs(*b.inp - inp2) <= 1e-12;
  const bool inverted = *a.ap > *b.ap && *a.inp < *b.inp;
  return {close && inverted, fmt("AP %.4f > %.4f, INP %.4f < %.4f", *a.ap, *b.ap, *a.inp, *b.inp)};
}

Outcome gradient_suite() {
  reid::GradCheckOptions opts;
  opts.instances = 100;
  opts.step = 1e-5;
  opts.tolerance = 1e-4;
  const auto start = Clock::now();
  const auto checks = reid::run_gradient_suite(opts);
  const double secs = seconds_since(start);
  bool all = !checks.empty();
  double worst = 0.0;
  std::string failed;
  for (const auto& c : checks) {
    worst = std::max(worst, c.max_relative_error);
    if (!c.passed || c.instances < 100) {
      all = false;
      failed += " " + c.kernel;
    }
  }
  std::string detail = fmt("%.0f kernels x 100 instances, worst rel err %.2e, %.2f s",
                           static_cast<double>(checks.size()), worst, secs);
  if (!failed.empty()) detail += ", failed:" + failed;
  return {all && secs < 60.0, detail};
}

Outcome gem_limits() {
  reid::Rng rng(5);
  double worst_mean = 0.0;
  double worst_ratio = 1.0;
  for (int t = 0; t < 100; ++t) {
    // 8 maps of 16 x 8 positive activations.
    Eigen::MatrixXd x(8, 128);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(0.05, 4.0);
    const auto mean_pool = k::gem_pool(x, k::GemParams<double>{Eigen::VectorXd::Ones(8)});
    const auto max_pool = k::gem_pool(x, k::GemParams<double>{Eigen::VectorXd::Constant(8, 64.0)});
    for (Eigen::Index m = 0; m < 8; ++m) {
      worst_mean = std::max(worst_mean, std::abs(mean_pool.pooled(m) - x.row(m).mean()));
      worst_ratio = std::min(worst_ratio, max_pool.pooled(m) / x.row(m).maxCoeff());
    }
  }
  return {worst_mean <= 1e-12 && worst_ratio >= 0.99,
          fmt("p=1 max |f - mean| %.1e; p=64 min f/max %.4f (need >= 0.99)", worst_mean,
              worst_ratio)};
}

Outcome nonlocal_identity() {
  reid::Rng rng(6);
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  };
  double identity_err = 0.0;
  double oracle_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd x = random(4, 8);
    k::NonLocalWeights<double> w{random(8, 4), random(8, 4), random(8, 4), random(4, 8),
                                 random(8, 1), random(8, 1)};
    const Eigen::MatrixXd ref =
        oracle::nonlocal_direct(x, w.theta, w.phi, w.g, w.out, w.out_scale, w.out_shift);
    oracle_err = std::max(oracle_err, (k::nonlocal_block(x, w) - ref).cwiseAbs().maxCoeff());
    w.out_scale.setZero();
    w.out_shift.setZero();
    identity_err = std::max(identity_err, (k::nonlocal_block(x, w) - x).cwiseAbs().maxCoeff());
  }
  return {identity_err <= 1e-15 && oracle_err <= 1e-10,
          fmt("zero-scale max |z - x| %.1e, oracle max diff %.1e", identity_err, oracle_err)};
}

Outcome wrt_weights() {
  reid::Rng rng(7);
  double sum_err = 0.0;
  double shift_err = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t p = 2 + rng.uniform_index(6);
    const std::size_t kk = 2 + rng.uniform_index(4);
    k::BatchLabels labels{{}, p};
    for (std::size_t id = 0; id < p; ++id) labels.person_ids.insert(labels.person_ids.end(), kk, id);
    const auto n = static_cast<Eigen::Index>(p * kk);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = rng.uniform(0.0, 4.0);
    }
    const auto w = k::triplet_weights(d, labels);
    const Eigen::MatrixXd shifted = (d.array() + rng.uniform(-100.0, 100.0)).matrix();
    const auto ws = k::triplet_weights(shifted, labels);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum_err = std::max({sum_err, std::abs(w.positive.row(i).sum() - 1.0),
                          std::abs(w.negative.row(i).sum() - 1.0)});
    }
    shift_err = std::max({shift_err, (w.positive - ws.positive).cwiseAbs().maxCoeff(),
                          (w.negative - ws.negative).cwiseAbs().maxCoeff()});
  }
  return {sum_err <= 1e-12 && shift_err <= 1e-12,
          fmt("500 batches, max |sum - 1| %.1e, max shift change %.1e", sum_err, shift_err)};
}

Outcome schedule_exactness() {
  const int epochs[] = {1, 5, 10, 11, 40, 41, 70, 71, 120};
  // Piecewise values written out directly from the schedule definition.
  auto prose = [](int t) {
    if (t <= 10) return 3.5e-5 + (3.5e-4 - 3.5e-5) * (t - 1) / 9.0;
    if (t <= 40) return 3.5e-4;
    if (t <= 70) return 3.5e-5;
    return 3.5e-6;
  };
  auto formula = [](int t) {
    if (t <= 10) return 3.5e-5 * t / 10;
    if (t <= 40) return 3.5e-4;
    if (t <= 70) return 3.5e-5;
    return 3.5e-6;
  };
  reid::LrSchedule selected;  // default ramp reading
  reid::LrSchedule printed;
  printed.ramp = reid::RampMode::kFormula;
  int mismatches = 0;
  for (int t : epochs) {
    if (reid::lr_at(selected, t) != prose(t)) ++mismatches;
    if (reid::lr_at(printed, t) != formula(t)) ++mismatches;
  }
  const bool anchors = reid::lr_at(printed, 5) == 1.75e-5 && reid::lr_at(selected, 10) == 3.5e-4;
  return {mismatches == 0 && anchors,
          std::string("ramp=") + std::string(reid::to_string(selected.ramp)) +
              fmt(" (formula also checked), %.0f mismatches over 9 epochs", mismatches)};
}

struct Split {
  reid::EmbeddingSet query;
  reid::EmbeddingSet gallery;
};

// First sample of every (identity, camera) cell is a query, the rest gallery.
Split overlapping_clusters(double sigma, std::uint64_t seed) {
  reid::SynthConfig cfg;
  cfg.n_ids = 25;
  cfg.per_id_per_cam = 4;
  cfg.n_cams = 3;
  cfg.dim = 16;
  cfg.noise_sigma = sigma;
  cfg.seed = seed;
  const auto all = reid::generate(cfg);
  Split s;
  for (auto* part : {&s.query, &s.gallery}) part->features.resize(0, all.dim());
  std::vector<Eigen::Index> q_rows;
  std::vector<Eigen::Index> g_rows;
  for (Eigen::Index i = 0; i < all.rows(); ++i) (i % cfg.per_id_per_cam == 0 ? q_rows : g_rows).push_back(i);
  auto take = [&](const std::vector<Eigen::Index>& rows, reid::EmbeddingSet& out) {
    out.features.resize(static_cast<Eigen::Index>(rows.size()), all.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.features.row(static_cast<Eigen::Index>(r)) = all.features.row(rows[r]);
      out.person_ids.push_back(all.person_ids[static_cast<std::size_t>(rows[r])]);
      out.cam_ids.push_back(all.cam_ids[static_cast<std::size_t>(rows[r])]);
    }
  };
  take(q_rows, s.query);
  take(g_rows, s.gallery);
  return s;
}

Outcome rerank_sanity() {
  int order_changes = 0;
  double before = 0.0;
  double after = 0.0;
  const int seeds = 50;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto s = overlapping_clusters(0.78, static_cast<std::uint64_t>(seed));
    const auto qg = reid::pairwise_distance(s.query, s.gallery);
    const auto gg = reid::pairwise_distance(s.gallery, s.gallery);
    const auto qq = reid::pairwise_distance(s.query, s.query);
    before += reid::evaluate(qg).map;
    after += reid::evaluate(reid::k_reciprocal_rerank(qg, gg, qq, {20, 6, 0.3})).map;

    if (seed < 10) {
      const auto keep = reid::k_reciprocal_rerank(qg, gg, qq, {20, 6, 1.0});
      const std::vector<bool> all(static_cast<std::size_t>(qg.cols()), true);
      for (Eigen::Index i = 0; i < qg.rows(); ++i) {
        const std::span<const double> a(qg.values.row(i).data(), all.size());
        const std::span<const double> b(keep.values.row(i).data(), all.size());
        if (reid::rank_gallery(a, all) != reid::rank_gallery(b, all)) ++order_changes;
      }
    }
  }
  before /= seeds;
  after /= seeds;
  return {order_changes == 0 && after >= before,
          fmt("lambda=1 order changes %.0f; mean mAP %.4f -> %.4f over 50 seeds", order_changes,
              before, after)};
}

Outcome synthetic_monotonicity() {
  std::vector<double> map_curve;
  std::vector<double> minp_curve;
  for (int level = 1; level <= 20; ++level) {
    const double sigma = 0.1 * level;  // center_scale = 1
    double map = 0.0;
    double minp = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      const auto s = overlapping_clusters(sigma, static_cast<std::uint64_t>(1000 + seed));
      const auto r = reid::evaluate(s.query, s.gallery, reid::Metric::kEuclidean);
      map += r.map;
      minp += r.minp;
    }
    map_curve.push_back(map / 20);
    minp_curve.push_back(minp / 20);
  }
  int violations = 0;
  for (std::size_t i = 1; i < map_curve.size(); ++i) {
    if (map_curve[i] > map_curve[i - 1]) ++violations;
    if (minp_curve[i] > minp_curve[i - 1]) ++violations;
  }
  return {violations <= 1,
          fmt("20 levels x 20 seeds, mAP %.3f -> %.3f, mINP %.3f -> %.3f", map_curve.front(),
              map_curve.back(), minp_curve.front(), minp_curve.back()) +
              fmt(", %.0f adjacent violations", violations)};
}

Outcome performance_budget() {
  reid::BenchConfig cfg;
  cfg.queries = 10000;
  cfg.gallery = 50000;
  cfg.dim = 512;
  cfg.threads = reid::resolve_threads(0);
  const auto r = reid::run_bench(cfg);
  const double secs = r.wall_ms / 1000.0;
  return {secs < 60.0 && r.peak_rss_mb <= 8192.0,
          fmt("Q=10000 G=50000 D=512 on %.0f thread(s): %.1f s, peak RSS %.0f MiB",
              cfg.threads, secs, r.peak_rss_mb)};
}

Outcome roundtrip_determinism() {
  reid::Rng rng(12);
  int roundtrip_failures = 0;
  for (int t = 0; t < 50; ++t) {
    reid::EmbeddingSet set;
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_index(64));
    const auto d = static_cast<Eigen::Index>(1 + rng.uniform_index(32));
    set.features.resize(n, d);
    for (Eigen::Index i = 0; i < set.features.size(); ++i) {
      const double u = rng.uniform01();
      float v = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-35.0, 35.0)));
      if (u < 0.05) v = -0.0f;
      if (u > 0.95) v = std::numeric_limits<float>::denorm_min() * 7;
      set.features.data()[i] = v;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      set.person_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(1u << 30)));
      set.cam_ids.push_back(static_cast<std::int64_t>(rng.uniform_index(16)));
    }
    testutil::TempDir dir;
    reid::save_embedding_set(set, dir.path());
    if (!reid::bit_equal(reid::load_embedding_set(dir.path()), set)) ++roundtrip_failures;
  }

  const auto s = overlapping_clusters(1.0, 77);
  std::vector<std::string> reports;
  for (int threads : {1, 2, 4, 8}) {
    reid::EvalOptions opts;
    opts.threads = threads;
    opts.block_rows = 7;
    reports.push_back(reid::to_json(reid::evaluate(s.query, s.gallery, reid::Metric::kCosine, opts), true));
    const auto qg = reid::pairwise_distance(s.query, s.gallery, reid::Metric::kEuclidean, {7, threads});
    const auto gg = reid::pairwise_distance(s.gallery, s.gallery, reid::Metric::kEuclidean, {7, threads});
    const auto qq = reid::pairwise_distance(s.query, s.query, reid::Metric::kEuclidean, {7, threads});
    reports.push_back(reid::to_json(reid::evaluate(reid::k_reciprocal_rerank(qg, gg, qq, {}, threads), opts), true));
  }
  int differing = 0;
  for (std::size_t i = 2; i < reports.size(); ++i) {
    if (reports[i] != reports[i % 2]) ++differing;
  }
  return {roundtrip_failures == 0 && differing == 0,
          fmt("50 random sets, %.0f round-trip failures; %.0f reports differ across 1/2/4/8 threads",
              roundtrip_failures, differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracle_equivalence},
      {"mINP equals mAP with one true match", minp_map_collapse},
      {"AP / INP inversion example", ap_inp_inversion},
      {"gradient suite", gradient_suite},
      {"GeM limits", gem_limits},
      {"non-local identity at init", nonlocal_identity},
      {"triplet weight normalisation", wrt_weights},
      {"schedule exactness", schedule_exactness},
      {"re-ranking sanity", rerank_sanity},
      {"synthetic monotonicity", synthetic_monotonicity},
      {"performance budget", performance_budget},
      {"round trip and determinism", roundtrip_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
              criteria.size());
  return failed == 0 ? 0 : 1;
}
