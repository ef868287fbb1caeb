#include "reid/distances.hpp"

#include "reid/error.hpp"
#include "reid/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace reid {

namespace fs = std::filesystem;

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kEuclideanSq: return "euclidean_sq";
    case Metric::kEuclidean: return "euclidean";
    case Metric::kCosine: return "cosine";
    case Metric::kReranked: return "reranked";
  }
  return "unknown";
}

Metric parse_metric(std::string_view token) {
  if (token == "euclidean_sq") return Metric::kEuclideanSq;
  if (token == "euclidean") return Metric::kEuclidean;
  if (token == "cosine") return Metric::kCosine;
  if (token == "reranked") return Metric::kReranked;
  throw Error(ErrorCode::kBadParams, "unknown metric '" + std::string(token) + "'");
}

GalleryDistances::GalleryDistances(const EmbeddingSet& gallery, Metric metric)
    : gallery_(gallery.features.cast<double>()), metric_(metric) {
  if (metric == Metric::kReranked) {
    throw Error(ErrorCode::kBadParams, "reranked is not a feature-space metric");
  }
  if (metric == Metric::kCosine) {
    norms_ = gallery_.rowwise().norm();
    if ((norms_.array() == 0.0).any()) {
      throw Error(ErrorCode::kZeroVector, "cosine metric on an all-zero gallery row");
    }
  } else {
    norms_ = gallery_.rowwise().squaredNorm();
  }
}

void GalleryDistances::compute(const EmbeddingSet& query, Eigen::Index begin,
                               Eigen::Index end, DistanceValues& out) const {
  if (query.dim() != gallery_.cols()) {
    throw Error(ErrorCode::kDimMismatch,
                "query dim " + std::to_string(query.dim()) +
                    " != gallery dim " + std::to_string(gallery_.cols()));
  }
  const Eigen::MatrixXd block =
      query.features.middleRows(begin, end - begin).cast<double>();
  out.resize(block.rows(), gallery_.rows());
  out.noalias() = block * gallery_.transpose();

  if (metric_ == Metric::kCosine) {
    const Eigen::VectorXd qnorm = block.rowwise().norm();
    if ((qnorm.array() == 0.0).any()) {
      throw Error(ErrorCode::kZeroVector, "cosine metric on an all-zero query row");
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double d = 1.0 - out(i, j) / (qnorm(i) * norms_(j));
        out(i, j) = std::clamp(d, 0.0, 2.0);
      }
    }
    return;
  }

  const Eigen::VectorXd qnorm = block.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      double d = qnorm(i) + norms_(j) - 2.0 * out(i, j);
      if (d < 0.0) d = 0.0;
      out(i, j) = metric_ == Metric::kEuclidean ? std::sqrt(d) : d;
    }
  }
}

DistanceMatrix pairwise_distance(const EmbeddingSet& query,
                                 const EmbeddingSet& gallery, Metric metric,
                                 const DistanceOptions& options) {
  if (query.dim() != gallery.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "query dim " + std::to_string(query.dim()) +
                    " != gallery dim " + std::to_string(gallery.dim()));
  }
  if (options.block_rows < 1) {
    throw Error(ErrorCode::kBadParams, "block_rows must be positive");
  }
  const GalleryDistances engine(gallery, metric);

  DistanceMatrix dist;
  dist.metric = metric;
  dist.query_meta = query.labels();
  dist.gallery_meta = gallery.labels();
  dist.values.resize(query.rows(), gallery.rows());

  const Eigen::Index block = options.block_rows;
  const auto n_blocks = static_cast<std::size_t>((query.rows() + block - 1) / block);
  parallel_for(n_blocks, options.threads, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index end = std::min(begin + block, query.rows());
    DistanceValues out;
    engine.compute(query, begin, end, out);
    dist.values.middleRows(begin, end - begin) = out;
  });

  if (&query == &gallery) dist.values.diagonal().setZero();
  return dist;
}

void save_distance_matrix(const DistanceMatrix& dist, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kIoFailure, "cannot create directory " + dir.string());
  }
  Manifest m;
  m.n = dist.rows();
  m.dim = dist.cols();
  m.dtype = "f64le";
  m.feature_file = "distances.bin";
  m.label_file = "query_labels.csv";
  m.gallery_label_file = "gallery_labels.csv";
  m.metric_hint = std::string(to_string(dist.metric));
  write_f64le(dir / m.feature_file, dist.values.data(),
              static_cast<std::size_t>(dist.values.size()));
  write_labels_csv(dist.query_meta, dir / m.label_file);
  write_labels_csv(dist.gallery_meta, dir / *m.gallery_label_file);
  write_manifest(m, dir);
}

DistanceMatrix load_distance_matrix(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  if (m.dtype != "f64le") {
    throw Error(ErrorCode::kMalformedManifest,
                dir.string() + ": distance matrices use dtype f64le");
  }
  if (!m.gallery_label_file) {
    throw Error(ErrorCode::kMalformedManifest,
                dir.string() + ": missing gallery_label_file");
  }
  const auto count = static_cast<std::size_t>(m.n) * static_cast<std::size_t>(m.dim);
  const std::vector<double> values = read_f64le(dir / m.feature_file, count);

  DistanceMatrix dist;
  dist.values = Eigen::Map<const DistanceValues>(values.data(), m.n, m.dim);
  dist.metric = parse_metric(m.metric_hint.value_or("euclidean"));
  dist.query_meta = read_labels_csv(dir / m.label_file);
  dist.gallery_meta = read_labels_csv(dir / *m.gallery_label_file);
  if (dist.query_meta.size() != static_cast<std::size_t>(m.n) ||
      dist.gallery_meta.size() != static_cast<std::size_t>(m.dim)) {
    throw Error(ErrorCode::kSizeMismatch, dir.string() + ": label tables do not match shape");
  }
  if (!dist.values.allFinite()) {
    throw Error(ErrorCode::kBadValue, dir.string() + ": non-finite distance");
  }
  return dist;
}

}  // namespace reid
