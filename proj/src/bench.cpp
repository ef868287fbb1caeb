#include "reid/bench.hpp"

#include "reid/error.hpp"
#include "reid/metrics.hpp"
#include "reid/parallel.hpp"
#include "reid/report.hpp"
#include "reid/rng.hpp"

#include <sys/resource.h>

#include <chrono>
#include <mutex>

namespace reid {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Identities shared between query and gallery; two cameras so the
// cross-camera protocol keeps matches.
EmbeddingSet bench_set(Eigen::Index rows, Eigen::Index dim, const Eigen::MatrixXf& centers,
                       Rng& rng, int cam_shift) {
  EmbeddingSet set;
  set.features.resize(rows, dim);
  const Eigen::Index ids = centers.rows();
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index id = i % ids;
    for (Eigen::Index d = 0; d < dim; ++d) {
      set.features(i, d) = centers(id, d) + static_cast<float>(2.0 * rng.normal());
    }
    set.person_ids.push_back(id);
    set.cam_ids.push_back(((i / ids) + cam_shift) % 2);
  }
  return set;
}

}  // namespace

double peak_rss_mb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) / 1024.0;
}

BenchResult run_bench(const BenchConfig& config) {
  if (config.queries < 1 || config.gallery < 1 || config.dim < 1 || config.block_rows < 1) {
    throw Error(ErrorCode::kUsage, "bench sizes must be positive");
  }
  BenchResult result;
  result.config = config;

  auto start = Clock::now();
  Rng rng(config.seed);
  const Eigen::Index ids = std::max<Eigen::Index>(1, config.gallery / 10);
  Eigen::MatrixXf centers(ids, config.dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) {
    centers.data()[i] = static_cast<float>(rng.normal());
  }
  const EmbeddingSet gallery = bench_set(config.gallery, config.dim, centers, rng, 0);
  const EmbeddingSet query = bench_set(config.queries, config.dim, centers, rng, 1);
  result.generate_ms = ms_since(start);

  start = Clock::now();
  const GalleryDistances engine(gallery, config.metric);
  const Labels gallery_labels = gallery.labels();
  const auto g_count = static_cast<std::size_t>(gallery.rows());
  const Eigen::Index block = config.block_rows;
  const auto n_blocks = static_cast<std::size_t>((query.rows() + block - 1) / block);
  std::vector<QueryEval> per_query(static_cast<std::size_t>(query.rows()));
  std::mutex timing_mutex;
  parallel_for(n_blocks, config.threads, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index end = std::min(begin + block, query.rows());
    DistanceValues out;
    auto t0 = Clock::now();
    engine.compute(query, begin, end, out);
    const double dist_ms = ms_since(t0);
    t0 = Clock::now();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const auto i = static_cast<std::size_t>(begin + r);
      per_query[i] = evaluate_row(std::span<const double>(out.row(r).data(), g_count),
                                  query.person_ids[i], query.cam_ids[i], gallery_labels,
                                  FilterProtocol::kCrossCamera, i);
    }
    const double eval_ms = ms_since(t0);
    std::lock_guard lock(timing_mutex);
    result.distance_ms += dist_ms;
    result.evaluate_ms += eval_ms;
  });
  const EvalReport report = summarize(std::move(per_query), g_count);
  result.wall_ms = ms_since(start);
  result.peak_rss_mb = peak_rss_mb();
  result.map = report.map;
  result.minp = report.minp;
  result.rank1 = report.cmc_at(1);
  return result;
}

std::string to_json(const BenchResult& r) {
  JsonWriter w;
  w.begin_object();
  w.key("queries").value(static_cast<std::int64_t>(r.config.queries));
  w.key("gallery").value(static_cast<std::int64_t>(r.config.gallery));
  w.key("dim").value(static_cast<std::int64_t>(r.config.dim));
  w.key("threads").value(r.config.threads);
  w.key("block_rows").value(static_cast<std::int64_t>(r.config.block_rows));
  w.key("metric").value(to_string(r.config.metric));
  w.key("generate_ms").value(r.generate_ms);
  w.key("distance_ms").value(r.distance_ms);
  w.key("evaluate_ms").value(r.evaluate_ms);
  w.key("wall_ms").value(r.wall_ms);
  w.key("peak_rss_mb").value(r.peak_rss_mb);
  w.key("rank1").value(r.rank1);
  w.key("map").value(r.map);
  w.key("minp").value(r.minp);
  w.end_object();
  return w.str() + "\n";
}

}  // namespace reid
