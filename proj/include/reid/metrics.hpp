#pragma once

#include "reid/distances.hpp"
#include "reid/embedio.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace reid {

// cross_camera drops gallery entries that share both person id and camera
// with the query (Market-1501 convention). none keeps everything.
enum class FilterProtocol { kCrossCamera, kNone };

std::string_view to_string(FilterProtocol protocol);
FilterProtocol parse_protocol(std::string_view token);

struct QueryEval {
  std::size_t query_index = 0;
  std::size_t num_valid_matches = 0;  // |G_i|
  std::optional<std::size_t> first_match_rank;
  std::optional<std::size_t> hardest_match_rank;  // R_hard, 1-based
  std::optional<double> ap;
  std::optional<double> inp;
  bool skipped = true;

  // Negative penalty, (R_hard - |G_i|) / R_hard.
  std::optional<double> np() const {
    if (skipped) return std::nullopt;
    return static_cast<double>(*hardest_match_rank - num_valid_matches) /
           static_cast<double>(*hardest_match_rank);
  }
};

struct EvalReport {
  std::vector<double> cmc;  // cmc[k - 1] is CMC-k
  double map = 0.0;
  double minp = 0.0;
  std::size_t n_evaluated = 0;
  std::size_t n_skipped = 0;
  std::vector<QueryEval> per_query;

  double cmc_at(std::size_t k) const {
    if (cmc.empty()) return 0.0;
    return cmc[std::min(k, cmc.size()) - 1];
  }
};

struct EvalOptions {
  FilterProtocol protocol = FilterProtocol::kCrossCamera;
  std::size_t max_rank = 100;  // CMC length is min(max_rank, G)
  int threads = 1;
  Eigen::Index block_rows = 512;
};

// Valid gallery indices sorted by ascending distance, ties by index.
std::vector<std::size_t> rank_gallery(std::span<const double> dist_row,
                                      const std::vector<bool>& valid_mask);

// AP / INP / ranks of one query from a ranked list of valid indices and a
// per-gallery-index match mask. Zero matches gives a skipped entry.
QueryEval query_eval(std::span<const std::size_t> ranked,
                     const std::vector<bool>& match_mask,
                     std::size_t query_index = 0);

// Same result as rank_gallery + query_eval, in O(G log |G_i|) without a
// full sort: only the ranks of the correct matches are located.
QueryEval evaluate_row(std::span<const double> dist_row,
                       std::int64_t query_pid, std::int64_t query_cam,
                       const Labels& gallery, FilterProtocol protocol,
                       std::size_t query_index = 0);

// Aggregates per-query results into CMC / mAP / mINP. Throws
// AllQueriesSkipped when no query has a valid match.
EvalReport summarize(std::vector<QueryEval> per_query, std::size_t gallery_size,
                     std::size_t max_rank = 100);

EvalReport evaluate(const DistanceMatrix& dist, const EvalOptions& options = {});

// Streams blocks of query-to-gallery distances straight into evaluation so
// the full Q x G matrix is never held; memory is about
// threads * block_rows * G doubles. Produces the same report as
// evaluate(pairwise_distance(...)) with the same block size.
EvalReport evaluate(const EmbeddingSet& query, const EmbeddingSet& gallery,
                    Metric metric, const EvalOptions& options = {});

}  // namespace reid
