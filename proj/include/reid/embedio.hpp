#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace reid {

// Storage precision is 32-bit; everything downstream converts to double.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Identity and camera label per row.
struct Labels {
  std::vector<std::int64_t> person_ids;
  std::vector<std::int64_t> cam_ids;

  std::size_t size() const { return person_ids.size(); }
  bool operator==(const Labels&) const = default;
};

struct EmbeddingSet {
  FeatureMatrix features;
  std::vector<std::int64_t> person_ids;
  std::vector<std::int64_t> cam_ids;
  std::string name;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Labels labels() const { return {person_ids, cam_ids}; }
};

// Bitwise equality of features (so -0.0 != +0.0) plus label/name equality.
bool bit_equal(const EmbeddingSet& a, const EmbeddingSet& b);

// Throws BadValue / SizeMismatch when an invariant of EmbeddingSet fails.
void validate(const EmbeddingSet& set);

struct Manifest {
  std::int64_t n = 0;
  std::int64_t dim = 0;
  std::string dtype = "f32le";
  std::string feature_file = "features.bin";
  std::string label_file = "labels.csv";
  std::optional<std::string> metric_hint;
  std::optional<std::string> name;
  // Only present on distance-matrix dumps: labels of the column set.
  std::optional<std::string> gallery_label_file;
};

inline constexpr const char* kManifestFile = "manifest.json";

Manifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const Manifest& manifest, const std::filesystem::path& dir);

std::vector<float> read_f32le(const std::filesystem::path& file,
                              std::size_t expected_count);
std::vector<double> read_f64le(const std::filesystem::path& file,
                               std::size_t expected_count);
void write_f32le(const std::filesystem::path& file, const float* data,
                 std::size_t count);
void write_f64le(const std::filesystem::path& file, const double* data,
                 std::size_t count);

// `person_id,cam_id` table with a header row.
Labels read_labels_csv(const std::filesystem::path& file);
void write_labels_csv(const Labels& labels, const std::filesystem::path& file);

EmbeddingSet load_embedding_set(const std::filesystem::path& dir);
void save_embedding_set(const EmbeddingSet& set,
                        const std::filesystem::path& dir);

}  // namespace reid
