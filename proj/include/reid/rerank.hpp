#pragma once

#include "reid/distances.hpp"

namespace reid {

struct RerankParams {
  int k1 = 20;
  int k2 = 6;
  double lambda = 0.3;
};

// Throws BadParams unless k1 >= k2 >= 1 and 0 <= lambda <= 1.
void validate(const RerankParams& params);

// k-reciprocal re-ranking with Jaccard distance over soft neighbour
// encodings. Neighbourhoods are built on the joint (query + gallery) probe
// set, so all three blocks of the joint distance matrix are required.
//
// The result is lambda * d_orig + (1 - lambda) * d_jaccard where d_orig is
// each probe row min-max normalised to [0, 1] (euclidean inputs are squared
// first) and d_jaccard is in [0, 1].
DistanceMatrix k_reciprocal_rerank(const DistanceMatrix& query_gallery,
                                   const DistanceMatrix& gallery_gallery,
                                   const DistanceMatrix& query_query,
                                   const RerankParams& params = {},
                                   int threads = 1);

}  // namespace reid
