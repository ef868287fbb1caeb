#include "reid/metrics.hpp"

#include "reid/error.hpp"
#include "reid/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace reid {

namespace {

// Strict order used for ranking: by distance, then by gallery index.
struct Entry {
  double dist;
  std::size_t index;
};

bool precedes(const Entry& a, const Entry& b) {
  return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
}

// Shared tail of both evaluation routes: `match_ranks` holds the 1-based
// ranks of the correct matches in increasing order.
QueryEval from_match_ranks(std::span<const std::size_t> match_ranks,
                           std::size_t query_index) {
  QueryEval q;
  q.query_index = query_index;
  q.num_valid_matches = match_ranks.size();
  if (match_ranks.empty()) return q;

  double precision_sum = 0.0;
  for (std::size_t k = 0; k < match_ranks.size(); ++k) {
    precision_sum +=
        static_cast<double>(k + 1) / static_cast<double>(match_ranks[k]);
  }
  q.skipped = false;
  q.first_match_rank = match_ranks.front();
  q.hardest_match_rank = match_ranks.back();
  q.ap = precision_sum / static_cast<double>(match_ranks.size());
  q.inp = static_cast<double>(match_ranks.size()) /
          static_cast<double>(match_ranks.back());
  return q;
}

bool is_valid(FilterProtocol protocol, std::int64_t qpid, std::int64_t qcam,
              std::int64_t gpid, std::int64_t gcam) {
  return protocol == FilterProtocol::kNone || gpid != qpid || gcam != qcam;
}

}  // namespace

std::string_view to_string(FilterProtocol protocol) {
  switch (protocol) {
    case FilterProtocol::kCrossCamera: return "cross_camera";
    case FilterProtocol::kNone: return "none";
  }
  return "unknown";
}

FilterProtocol parse_protocol(std::string_view token) {
  if (token == "cross_camera") return FilterProtocol::kCrossCamera;
  if (token == "none") return FilterProtocol::kNone;
  throw Error(ErrorCode::kBadParams, "unknown protocol '" + std::string(token) + "'");
}

std::vector<std::size_t> rank_gallery(std::span<const double> dist_row,
                                      const std::vector<bool>& valid_mask) {
  if (dist_row.size() != valid_mask.size()) {
    throw Error(ErrorCode::kShapeMismatch, "distance row and mask lengths differ");
  }
  std::vector<std::size_t> order;
  order.reserve(dist_row.size());
  for (std::size_t j = 0; j < dist_row.size(); ++j) {
    if (valid_mask[j]) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist_row[a] < dist_row[b];
  });
  return order;
}

QueryEval query_eval(std::span<const std::size_t> ranked,
                     const std::vector<bool>& match_mask,
                     std::size_t query_index) {
  std::vector<std::size_t> match_ranks;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (ranked[r] < match_mask.size() && match_mask[ranked[r]]) {
      match_ranks.push_back(r + 1);
    }
  }
  return from_match_ranks(match_ranks, query_index);
}

QueryEval evaluate_row(std::span<const double> dist_row, std::int64_t query_pid,
                       std::int64_t query_cam, const Labels& gallery,
                       FilterProtocol protocol, std::size_t query_index) {
  if (dist_row.size() != gallery.size()) {
    throw Error(ErrorCode::kShapeMismatch, "distance row and gallery lengths differ");
  }
  std::vector<Entry> matches;
  for (std::size_t j = 0; j < dist_row.size(); ++j) {
    if (gallery.person_ids[j] == query_pid &&
        is_valid(protocol, query_pid, query_cam, query_pid, gallery.cam_ids[j])) {
      matches.push_back({dist_row[j], j});
    }
  }
  if (matches.empty()) return from_match_ranks({}, query_index);
  std::sort(matches.begin(), matches.end(), precedes);

  // preceding[p] counts non-matches that rank between match p-1 and match p.
  std::vector<std::size_t> preceding(matches.size() + 1, 0);
  const Entry& last = matches.back();
  for (std::size_t j = 0; j < dist_row.size(); ++j) {
    if (gallery.person_ids[j] == query_pid) continue;
    const Entry e{dist_row[j], j};
    if (!precedes(e, last)) continue;
    const auto pos = std::lower_bound(matches.begin(), matches.end(), e, precedes);
    ++preceding[static_cast<std::size_t>(pos - matches.begin())];
  }

  std::vector<std::size_t> match_ranks(matches.size());
  std::size_t before = 0;
  for (std::size_t k = 0; k < matches.size(); ++k) {
    before += preceding[k];
    match_ranks[k] = k + 1 + before;
  }
  return from_match_ranks(match_ranks, query_index);
}

EvalReport summarize(std::vector<QueryEval> per_query, std::size_t gallery_size,
                     std::size_t max_rank) {
  EvalReport report;
  const std::size_t cmc_len = std::min(max_rank, gallery_size);
  std::vector<std::size_t> first_hist(cmc_len + 1, 0);
  double ap_sum = 0.0;
  double inp_sum = 0.0;
  for (const auto& q : per_query) {
    if (q.skipped) {
      ++report.n_skipped;
      continue;
    }
    ++report.n_evaluated;
    ap_sum += *q.ap;
    inp_sum += *q.inp;
    if (*q.first_match_rank <= cmc_len) ++first_hist[*q.first_match_rank];
  }
  if (report.n_evaluated == 0) {
    throw Error(ErrorCode::kAllQueriesSkipped,
                "no query has a valid match in the gallery after filtering");
  }
  const auto n = static_cast<double>(report.n_evaluated);
  report.map = ap_sum / n;
  report.minp = inp_sum / n;
  report.cmc.resize(cmc_len);
  std::size_t hits = 0;
  for (std::size_t k = 1; k <= cmc_len; ++k) {
    hits += first_hist[k];
    report.cmc[k - 1] = static_cast<double>(hits) / n;
  }
  report.per_query = std::move(per_query);
  return report;
}

EvalReport evaluate(const DistanceMatrix& dist, const EvalOptions& options) {
  const auto q_count = static_cast<std::size_t>(dist.rows());
  const auto g_count = static_cast<std::size_t>(dist.cols());
  if (dist.query_meta.size() != q_count || dist.gallery_meta.size() != g_count) {
    throw Error(ErrorCode::kShapeMismatch, "distance matrix metadata does not match its shape");
  }
  std::vector<QueryEval> per_query(q_count);
  parallel_for(q_count, options.threads, [&](std::size_t i) {
    const auto row = dist.values.row(static_cast<Eigen::Index>(i));
    per_query[i] = evaluate_row(std::span<const double>(row.data(), g_count),
                                dist.query_meta.person_ids[i],
                                dist.query_meta.cam_ids[i], dist.gallery_meta,
                                options.protocol, i);
  });
  return summarize(std::move(per_query), g_count, options.max_rank);
}

EvalReport evaluate(const EmbeddingSet& query, const EmbeddingSet& gallery,
                    Metric metric, const EvalOptions& options) {
  if (query.dim() != gallery.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "query dim " + std::to_string(query.dim()) +
                    " != gallery dim " + std::to_string(gallery.dim()));
  }
  if (options.block_rows < 1) {
    throw Error(ErrorCode::kBadParams, "block_rows must be positive");
  }
  const GalleryDistances engine(gallery, metric);
  const Labels gallery_labels = gallery.labels();
  const auto g_count = static_cast<std::size_t>(gallery.rows());
  const bool self = &query == &gallery;

  const Eigen::Index block = options.block_rows;
  const auto n_blocks = static_cast<std::size_t>((query.rows() + block - 1) / block);
  std::vector<QueryEval> per_query(static_cast<std::size_t>(query.rows()));
  parallel_for(n_blocks, options.threads, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index end = std::min(begin + block, query.rows());
    DistanceValues out;
    engine.compute(query, begin, end, out);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const auto i = static_cast<std::size_t>(begin + r);
      if (self) out(r, begin + r) = 0.0;
      per_query[i] = evaluate_row(
          std::span<const double>(out.row(r).data(), g_count),
          query.person_ids[i], query.cam_ids[i], gallery_labels,
          options.protocol, i);
    }
  });
  return summarize(std::move(per_query), g_count, options.max_rank);
}

}  // namespace reid
