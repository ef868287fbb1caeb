#include "reid/error.hpp"
#include "reid/metrics.hpp"
#include "reid/rerank.hpp"
#include "reid/synth.hpp"

#include <doctest.h>

using reid::Metric;

namespace {

struct Split {
  reid::EmbeddingSet query;
  reid::EmbeddingSet gallery;
};

// First sample of each (identity, camera) goes to the query side.
Split split_queries(const reid::EmbeddingSet& all, int per_id_per_cam) {
  std::vector<Eigen::Index> q_rows;
  std::vector<Eigen::Index> g_rows;
  for (Eigen::Index i = 0; i < all.rows(); ++i) {
    (i % per_id_per_cam == 0 ? q_rows : g_rows).push_back(i);
  }
  auto take = [&](const std::vector<Eigen::Index>& rows) {
    reid::EmbeddingSet s;
    s.features.resize(static_cast<Eigen::Index>(rows.size()), all.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s.features.row(static_cast<Eigen::Index>(r)) = all.features.row(rows[r]);
      s.person_ids.push_back(all.person_ids[static_cast<std::size_t>(rows[r])]);
      s.cam_ids.push_back(all.cam_ids[static_cast<std::size_t>(rows[r])]);
    }
    return s;
  };
  return {take(q_rows), take(g_rows)};
}

reid::DistanceMatrix rerank(const Split& s, const reid::RerankParams& params, Metric metric,
                            int threads = 1) {
  const auto qg = reid::pairwise_distance(s.query, s.gallery, metric);
  const auto gg = reid::pairwise_distance(s.gallery, s.gallery, metric);
  const auto qq = reid::pairwise_distance(s.query, s.query, metric);
  return reid::k_reciprocal_rerank(qg, gg, qq, params, threads);
}

Split clusters(double noise, std::uint64_t seed, int n_ids = 12) {
  reid::SynthConfig cfg;
  cfg.n_ids = n_ids;
  cfg.n_cams = 2;
  cfg.per_id_per_cam = 5;
  cfg.dim = 16;
  cfg.noise_sigma = noise;
  cfg.seed = seed;
  return split_queries(reid::generate(cfg), cfg.per_id_per_cam);
}

}  // namespace

TEST_CASE("lambda = 1 keeps every query's ranking") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = clusters(0.6, seed);
    for (Metric metric : {Metric::kEuclidean, Metric::kCosine}) {
      const auto orig = reid::pairwise_distance(s.query, s.gallery, metric);
      const auto rr = rerank(s, {20, 6, 1.0}, metric);
      CHECK(rr.metric == Metric::kReranked);
      REQUIRE(rr.rows() == orig.rows());
      REQUIRE(rr.cols() == orig.cols());
      const std::vector<bool> all(static_cast<std::size_t>(orig.cols()), true);
      for (Eigen::Index i = 0; i < orig.rows(); ++i) {
        const std::span<const double> a(orig.values.row(i).data(), all.size());
        const std::span<const double> b(rr.values.row(i).data(), all.size());
        CHECK(reid::rank_gallery(a, all) == reid::rank_gallery(b, all));
      }
    }
  }
}

TEST_CASE("well-separated clusters stay perfect after re-ranking") {
  const auto s = clusters(0.01, 3, 3);
  const auto before = reid::evaluate(reid::pairwise_distance(s.query, s.gallery));
  REQUIRE(before.map == 1.0);
  const auto after = reid::evaluate(rerank(s, {4, 2, 0.3}, Metric::kEuclidean));
  CHECK(after.map == 1.0);
  CHECK(after.minp == 1.0);
}

TEST_CASE("re-ranked distances lie in [0, 1] and carry the input labels") {
  const auto s = clusters(0.8, 4);
  const auto rr = rerank(s, {}, Metric::kEuclidean);
  CHECK(rr.values.minCoeff() >= 0.0);
  CHECK(rr.values.maxCoeff() <= 1.0);
  CHECK(rr.query_meta.person_ids == s.query.person_ids);
  CHECK(rr.gallery_meta.cam_ids == s.gallery.cam_ids);
}

TEST_CASE("thread count does not change the result") {
  const auto s = clusters(0.9, 5, 20);
  const auto one = rerank(s, {}, Metric::kEuclidean, 1);
  const auto three = rerank(s, {}, Metric::kEuclidean, 3);
  CHECK(one.values == three.values);
}

TEST_CASE("k1 larger than the probe set is clipped, not an error") {
  const auto s = clusters(0.5, 6, 2);
  CHECK_NOTHROW(rerank(s, {200, 6, 0.3}, Metric::kEuclidean));
}

TEST_CASE("parameter and shape validation") {
  const auto s = clusters(0.5, 7, 3);
  auto code = [&](const reid::RerankParams& p) {
    try {
      rerank(s, p, Metric::kEuclidean);
    } catch (const reid::Error& e) {
      return e.code();
    }
    return reid::ErrorCode::kUsage;
  };
  CHECK(code({5, 6, 0.3}) == reid::ErrorCode::kBadParams);
  CHECK(code({5, 0, 0.3}) == reid::ErrorCode::kBadParams);
  CHECK(code({5, 2, 1.5}) == reid::ErrorCode::kBadParams);
  CHECK(code({5, 2, -0.1}) == reid::ErrorCode::kBadParams);

  const auto qg = reid::pairwise_distance(s.query, s.gallery);
  const auto gg = reid::pairwise_distance(s.gallery, s.gallery);
  try {
    reid::k_reciprocal_rerank(qg, gg, gg);
    FAIL("expected DimMismatch");
  } catch (const reid::Error& e) {
    CHECK(e.code() == reid::ErrorCode::kDimMismatch);
  }
}
