#pragma once

#include "reid/embedio.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string_view>

namespace reid {

enum class Metric { kEuclideanSq, kEuclidean, kCosine, kReranked };

std::string_view to_string(Metric metric);
// Accepts euclidean_sq, euclidean, cosine. Throws BadParams otherwise.
Metric parse_metric(std::string_view token);

// Row-major so that one query's distances are contiguous.
using DistanceValues =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DistanceMatrix {
  DistanceValues values;
  Metric metric = Metric::kEuclidean;
  Labels query_meta;
  Labels gallery_meta;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct DistanceOptions {
  Eigen::Index block_rows = 512;
  int threads = 1;
};

// Precomputed gallery side of a blocked distance computation. Query rows are
// processed in fixed blocks so that a given row always sees the same
// arithmetic, whatever the thread count.
class GalleryDistances {
 public:
  GalleryDistances(const EmbeddingSet& gallery, Metric metric);

  Eigen::Index size() const { return gallery_.rows(); }
  Metric metric() const { return metric_; }

  // Distances from query rows [begin, end) to every gallery row, written
  // into `out` (resized to (end - begin) x G).
  void compute(const EmbeddingSet& query, Eigen::Index begin, Eigen::Index end,
               DistanceValues& out) const;

 private:
  Eigen::MatrixXd gallery_;
  Eigen::VectorXd norms_;
  Metric metric_;
};

// Full Q x G matrix. When `query` and `gallery` are the same object the
// diagonal is set to exactly zero.
DistanceMatrix pairwise_distance(const EmbeddingSet& query,
                                 const EmbeddingSet& gallery,
                                 Metric metric = Metric::kEuclidean,
                                 const DistanceOptions& options = {});

// Dump in the embedio directory layout with dtype f64le.
void save_distance_matrix(const DistanceMatrix& dist,
                          const std::filesystem::path& dir);
DistanceMatrix load_distance_matrix(const std::filesystem::path& dir);

}  // namespace reid
