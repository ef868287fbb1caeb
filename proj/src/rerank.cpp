#include "reid/rerank.hpp"

#include "reid/error.hpp"
#include "reid/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace reid {

namespace {

using SparseRow = std::vector<std::pair<std::size_t, double>>;  // sorted by index

// Joint (Q+G) x (Q+G) distance matrix with each row min-max normalised.
DistanceValues joint_normalized(const DistanceMatrix& qg, const DistanceMatrix& gg,
                                const DistanceMatrix& qq) {
  const Eigen::Index q = qg.rows();
  const Eigen::Index g = qg.cols();
  DistanceValues joint(q + g, q + g);
  joint.topLeftCorner(q, q) = qq.values;
  joint.topRightCorner(q, g) = qg.values;
  joint.bottomLeftCorner(g, q) = qg.values.transpose();
  joint.bottomRightCorner(g, g) = gg.values;
  if (qg.metric == Metric::kEuclidean) joint = joint.array().square();

  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    auto row = joint.row(i);
    const double lo = row.minCoeff();
    const double span = row.maxCoeff() - lo;
    if (span > 0.0) {
      row = (row.array() - lo) / span;
    } else {
      row.setZero();
    }
  }
  return joint;
}

// Indices of the `count` nearest probes of every row, nearest first, ties
// broken by index.
std::vector<std::vector<std::size_t>> nearest_lists(const DistanceValues& dist,
                                                    std::size_t count, int threads) {
  const auto n = static_cast<std::size_t>(dist.rows());
  count = std::min(count, n);
  std::vector<std::vector<std::size_t>> lists(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto row = dist.row(static_cast<Eigen::Index>(i));
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < n; ++j) order[j] = j;
    const auto by_distance = [&](std::size_t a, std::size_t b) {
      const double da = row(static_cast<Eigen::Index>(a));
      const double db = row(static_cast<Eigen::Index>(b));
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                      order.end(), by_distance);
    order.resize(count);
    lists[i] = std::move(order);
  });
  return lists;
}

// Members j of the k-nearest list of `probe` whose own k-nearest list
// contains `probe`. Lists hold k + 1 entries (the probe itself included).
std::vector<std::size_t> reciprocal_neighbors(
    const std::vector<std::vector<std::size_t>>& nearest, std::size_t probe,
    std::size_t k) {
  const auto& forward = nearest[probe];
  const std::size_t span = std::min(k + 1, forward.size());
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < span; ++a) {
    const auto& backward = nearest[forward[a]];
    const auto end = backward.begin() +
                     static_cast<std::ptrdiff_t>(std::min(k + 1, backward.size()));
    if (std::find(backward.begin(), end, probe) != end) out.push_back(forward[a]);
  }
  return out;
}

SparseRow encode_probe(const DistanceValues& dist,
                       const std::vector<std::vector<std::size_t>>& nearest,
                       std::size_t probe, std::size_t k1) {
  const std::size_t half = static_cast<std::size_t>(std::nearbyint(static_cast<double>(k1) / 2.0));
  std::vector<std::size_t> base = reciprocal_neighbors(nearest, probe, k1);
  std::vector<std::size_t> sorted_base = base;
  std::sort(sorted_base.begin(), sorted_base.end());

  std::vector<std::size_t> expanded = base;
  for (std::size_t candidate : base) {
    std::vector<std::size_t> cand = reciprocal_neighbors(nearest, candidate, half);
    std::sort(cand.begin(), cand.end());
    std::size_t overlap = 0;
    for (std::size_t c : cand) {
      if (std::binary_search(sorted_base.begin(), sorted_base.end(), c)) ++overlap;
    }
    if (static_cast<double>(overlap) > 2.0 / 3.0 * static_cast<double>(cand.size())) {
      expanded.insert(expanded.end(), cand.begin(), cand.end());
    }
  }
  std::sort(expanded.begin(), expanded.end());
  expanded.erase(std::unique(expanded.begin(), expanded.end()), expanded.end());

  const auto row = dist.row(static_cast<Eigen::Index>(probe));
  SparseRow encoding;
  encoding.reserve(expanded.size());
  double total = 0.0;
  for (std::size_t j : expanded) {
    const double w = std::exp(-row(static_cast<Eigen::Index>(j)));
    encoding.emplace_back(j, w);
    total += w;
  }
  for (auto& [j, w] : encoding) w /= total;
  return encoding;
}

// Local query expansion: average of the encodings of the k2 nearest probes.
SparseRow expand_query(const std::vector<SparseRow>& encodings,
                       const std::vector<std::size_t>& nearest, std::size_t k2,
                       std::vector<double>& scratch, std::vector<bool>& touched) {
  std::vector<std::size_t> support;
  const std::size_t span = std::min(k2, nearest.size());
  for (std::size_t a = 0; a < span; ++a) {
    for (const auto& [j, w] : encodings[nearest[a]]) {
      if (!touched[j]) {
        touched[j] = true;
        support.push_back(j);
      }
      scratch[j] += w;
    }
  }
  std::sort(support.begin(), support.end());
  SparseRow out;
  out.reserve(support.size());
  for (std::size_t j : support) {
    out.emplace_back(j, scratch[j] / static_cast<double>(span));
    scratch[j] = 0.0;
    touched[j] = false;
  }
  return out;
}

}  // namespace

void validate(const RerankParams& params) {
  if (params.k2 < 1 || params.k1 < params.k2) {
    throw Error(ErrorCode::kBadParams, "re-ranking requires k1 >= k2 >= 1");
  }
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) {
    throw Error(ErrorCode::kBadParams, "re-ranking lambda must lie in [0, 1]");
  }
}

DistanceMatrix k_reciprocal_rerank(const DistanceMatrix& query_gallery,
                                   const DistanceMatrix& gallery_gallery,
                                   const DistanceMatrix& query_query,
                                   const RerankParams& params, int threads) {
  validate(params);
  const Eigen::Index q = query_gallery.rows();
  const Eigen::Index g = query_gallery.cols();
  if (query_query.rows() != q || query_query.cols() != q ||
      gallery_gallery.rows() != g || gallery_gallery.cols() != g) {
    throw Error(ErrorCode::kDimMismatch,
                "re-ranking needs Q x G, G x G and Q x Q matrices");
  }
  if (!query_gallery.values.allFinite() || !gallery_gallery.values.allFinite() ||
      !query_query.values.allFinite()) {
    throw Error(ErrorCode::kBadValue, "re-ranking input contains NaN or Inf");
  }

  const DistanceValues joint = joint_normalized(query_gallery, gallery_gallery, query_query);
  const auto probes = static_cast<std::size_t>(joint.rows());
  const auto k1 = static_cast<std::size_t>(params.k1);
  const auto k2 = static_cast<std::size_t>(params.k2);
  const auto nearest = nearest_lists(joint, k1 + 1, threads);

  std::vector<SparseRow> encodings(probes);
  parallel_for(probes, threads, [&](std::size_t i) {
    encodings[i] = encode_probe(joint, nearest, i, k1);
  });

  if (k2 != 1) {
    std::vector<SparseRow> expanded(probes);
    const std::size_t n_chunks = std::min<std::size_t>(probes, 64);
    parallel_for(n_chunks, threads, [&](std::size_t c) {
      std::vector<double> scratch(probes, 0.0);
      std::vector<bool> touched(probes, false);
      for (std::size_t i = c; i < probes; i += n_chunks) {
        expanded[i] = expand_query(encodings, nearest[i], k2, scratch, touched);
      }
    });
    encodings = std::move(expanded);
  }

  // Inverted index over gallery probes only: column l -> (probe, weight).
  const auto q_count = static_cast<std::size_t>(q);
  std::vector<std::vector<std::pair<std::size_t, double>>> inverted(probes);
  for (std::size_t j = q_count; j < probes; ++j) {
    for (const auto& [l, w] : encodings[j]) inverted[l].emplace_back(j, w);
  }

  DistanceMatrix out;
  out.metric = Metric::kReranked;
  out.query_meta = query_gallery.query_meta;
  out.gallery_meta = query_gallery.gallery_meta;
  out.values.resize(q, g);
  const double lambda = params.lambda;
  parallel_for(q_count, threads, [&](std::size_t i) {
    std::vector<double> shared(static_cast<std::size_t>(g), 0.0);
    for (const auto& [l, w] : encodings[i]) {
      for (const auto& [j, wj] : inverted[l]) shared[j - q_count] += std::min(w, wj);
    }
    for (Eigen::Index j = 0; j < g; ++j) {
      const double s = shared[static_cast<std::size_t>(j)];
      const double jaccard = 1.0 - s / (2.0 - s);
      out.values(static_cast<Eigen::Index>(i), j) =
          jaccard * (1.0 - lambda) + joint(static_cast<Eigen::Index>(i), q + j) * lambda;
    }
  });
  return out;
}

}  // namespace reid
