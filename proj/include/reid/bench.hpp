#pragma once

#include "reid/distances.hpp"

#include <cstdint>
#include <string>

namespace reid {

struct BenchConfig {
  Eigen::Index queries = 1000;
  Eigen::Index gallery = 5000;
  Eigen::Index dim = 512;
  int threads = 1;
  Eigen::Index block_rows = 512;
  Metric metric = Metric::kEuclidean;
  std::uint64_t seed = 1;
};

struct BenchResult {
  BenchConfig config;
  double generate_ms = 0.0;
  double distance_ms = 0.0;  // summed over workers
  double evaluate_ms = 0.0;  // summed over workers
  double wall_ms = 0.0;      // distance + evaluation, wall clock
  double peak_rss_mb = 0.0;
  double map = 0.0;
  double minp = 0.0;
  double rank1 = 0.0;
};

// Synthetic Q x G retrieval problem timed through the blocked
// distance + evaluation pipeline. Throws Usage on non-positive sizes.
BenchResult run_bench(const BenchConfig& config);

// Peak resident set size of this process in MiB.
double peak_rss_mb();

std::string to_json(const BenchResult& result);

}  // namespace reid
