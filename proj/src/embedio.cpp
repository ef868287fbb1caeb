#include "reid/embedio.hpp"

#include "reid/error.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace reid {

namespace fs = std::filesystem;

namespace {

template <typename Float, typename Bits>
Float from_le(Bits bits) {
  if constexpr (std::endian::native == std::endian::big) {
    Bits swapped = 0;
    for (std::size_t b = 0; b < sizeof(Bits); ++b) {
      swapped = static_cast<Bits>((swapped << 8) | ((bits >> (8 * b)) & 0xFF));
    }
    bits = swapped;
  }
  return std::bit_cast<Float>(bits);
}

template <typename Bits, typename Float>
Bits to_le(Float value) {
  Bits bits = std::bit_cast<Bits>(value);
  if constexpr (std::endian::native == std::endian::big) {
    Bits swapped = 0;
    for (std::size_t b = 0; b < sizeof(Bits); ++b) {
      swapped = static_cast<Bits>((swapped << 8) | ((bits >> (8 * b)) & 0xFF));
    }
    bits = swapped;
  }
  return bits;
}

template <typename Float, typename Bits>
std::vector<Float> read_binary(const fs::path& file, std::size_t expected_count) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw Error(ErrorCode::kMissingFile, "missing file: " + file.string());
  }
  const auto bytes = fs::file_size(file, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot stat " + file.string());
  if (bytes != expected_count * sizeof(Bits)) {
    throw Error(ErrorCode::kSizeMismatch,
                file.string() + ": " + std::to_string(bytes) +
                    " bytes, manifest implies " +
                    std::to_string(expected_count * sizeof(Bits)));
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + file.string());
  std::vector<Bits> raw(expected_count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw Error(ErrorCode::kIoFailure, "short read on " + file.string());
  std::vector<Float> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    out[i] = from_le<Float>(raw[i]);
  }
  return out;
}

template <typename Bits, typename Float>
void write_binary(const fs::path& file, const Float* data, std::size_t count) {
  std::vector<Bits> raw(count);
  for (std::size_t i = 0; i < count; ++i) raw[i] = to_le<Bits>(data[i]);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(count * sizeof(Bits)));
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + file.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  if (fs::is_directory(dir, ec)) return;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoFailure, "cannot create directory " + dir.string());
  }
}

std::int64_t parse_label(std::string_view field, const fs::path& file,
                         std::size_t line) {
  std::int64_t value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kMalformedManifest,
                file.string() + ":" + std::to_string(line) +
                    ": not an integer: '" + std::string(field) + "'");
  }
  if (value < 0) {
    throw Error(ErrorCode::kBadValue, file.string() + ":" +
                                          std::to_string(line) +
                                          ": negative label");
  }
  return value;
}

}  // namespace

bool bit_equal(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.features.rows() != b.features.rows() ||
      a.features.cols() != b.features.cols()) {
    return false;
  }
  const auto bytes = static_cast<std::size_t>(a.features.size()) * sizeof(float);
  return std::memcmp(a.features.data(), b.features.data(), bytes) == 0 &&
         a.person_ids == b.person_ids && a.cam_ids == b.cam_ids &&
         a.name == b.name;
}

void validate(const EmbeddingSet& set) {
  const auto n = static_cast<std::size_t>(set.features.rows());
  if (set.features.rows() < 1 || set.features.cols() < 1) {
    throw Error(ErrorCode::kSizeMismatch, "embedding set must be at least 1x1");
  }
  if (set.person_ids.size() != n || set.cam_ids.size() != n) {
    throw Error(ErrorCode::kSizeMismatch,
                "label count does not match feature rows");
  }
  if (!set.features.allFinite()) {
    throw Error(ErrorCode::kBadValue, "features contain NaN or Inf");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (set.person_ids[i] < 0 || set.cam_ids[i] < 0) {
      throw Error(ErrorCode::kBadValue, "labels must be non-negative");
    }
  }
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path file = dir / kManifestFile;
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw Error(ErrorCode::kMissingFile, "missing file: " + file.string());
  }
  std::ifstream in(file);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest,
                file.string() + ": " + e.what());
  }
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!doc.is_object() || !doc.contains(key)) {
      throw Error(ErrorCode::kMalformedManifest,
                  file.string() + ": missing key '" + key + "'");
    }
    return doc.at(key);
  };
  auto require_count = [&](const char* key) {
    const auto& v = require(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
      throw Error(ErrorCode::kMalformedManifest,
                  file.string() + ": '" + key + "' must be a positive integer");
    }
    return v.get<std::int64_t>();
  };
  auto require_string = [&](const char* key) {
    const auto& v = require(key);
    if (!v.is_string()) {
      throw Error(ErrorCode::kMalformedManifest,
                  file.string() + ": '" + key + "' must be a string");
    }
    return v.get<std::string>();
  };
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    if (!doc.at(key).is_string()) {
      throw Error(ErrorCode::kMalformedManifest,
                  file.string() + ": '" + key + "' must be a string");
    }
    return doc.at(key).get<std::string>();
  };

  Manifest m;
  m.n = require_count("n");
  m.dim = require_count("dim");
  m.dtype = require_string("dtype");
  m.feature_file = require_string("feature_file");
  m.label_file = require_string("label_file");
  m.metric_hint = optional_string("metric_hint");
  m.name = optional_string("name");
  m.gallery_label_file = optional_string("gallery_label_file");
  if (m.dtype != "f32le" && m.dtype != "f64le") {
    throw Error(ErrorCode::kMalformedManifest,
                file.string() + ": unsupported dtype '" + m.dtype + "'");
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& dir) {
  nlohmann::ordered_json doc;
  doc["n"] = manifest.n;
  doc["dim"] = manifest.dim;
  doc["dtype"] = manifest.dtype;
  doc["feature_file"] = manifest.feature_file;
  doc["label_file"] = manifest.label_file;
  if (manifest.gallery_label_file) {
    doc["gallery_label_file"] = *manifest.gallery_label_file;
  }
  if (manifest.metric_hint) doc["metric_hint"] = *manifest.metric_hint;
  if (manifest.name) doc["name"] = *manifest.name;

  const fs::path file = dir / kManifestFile;
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + file.string());
  out << doc.dump(2) << '\n';
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + file.string());
}

std::vector<float> read_f32le(const fs::path& file, std::size_t expected_count) {
  return read_binary<float, std::uint32_t>(file, expected_count);
}

std::vector<double> read_f64le(const fs::path& file,
                               std::size_t expected_count) {
  return read_binary<double, std::uint64_t>(file, expected_count);
}

void write_f32le(const fs::path& file, const float* data, std::size_t count) {
  write_binary<std::uint32_t>(file, data, count);
}

void write_f64le(const fs::path& file, const double* data, std::size_t count) {
  write_binary<std::uint64_t>(file, data, count);
}

Labels read_labels_csv(const fs::path& file) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw Error(ErrorCode::kMissingFile, "missing file: " + file.string());
  }
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kMalformedManifest, file.string() + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "person_id,cam_id") {
    throw Error(ErrorCode::kMalformedManifest,
                file.string() + ": expected header 'person_id,cam_id'");
  }
  Labels labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorCode::kMalformedManifest,
                  file.string() + ":" + std::to_string(line_no) +
                      ": expected two columns");
    }
    const std::string_view view(line);
    labels.person_ids.push_back(parse_label(view.substr(0, comma), file, line_no));
    labels.cam_ids.push_back(parse_label(view.substr(comma + 1), file, line_no));
  }
  return labels;
}

void write_labels_csv(const Labels& labels, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + file.string());
  out << "person_id,cam_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << labels.person_ids[i] << ',' << labels.cam_ids[i] << '\n';
  }
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + file.string());
}

EmbeddingSet load_embedding_set(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kMissingFile, "missing directory: " + dir.string());
  }
  const Manifest m = read_manifest(dir);
  if (m.dtype != "f32le") {
    throw Error(ErrorCode::kMalformedManifest,
                dir.string() + ": embedding sets must use dtype f32le");
  }
  const auto count = static_cast<std::size_t>(m.n) * static_cast<std::size_t>(m.dim);
  std::vector<float> values = read_f32le(dir / m.feature_file, count);
  Labels labels = read_labels_csv(dir / m.label_file);
  if (labels.size() != static_cast<std::size_t>(m.n)) {
    throw Error(ErrorCode::kSizeMismatch,
                dir.string() + ": label table has " +
                    std::to_string(labels.size()) + " rows, manifest says " +
                    std::to_string(m.n));
  }

  EmbeddingSet set;
  set.features = Eigen::Map<const FeatureMatrix>(values.data(), m.n, m.dim);
  set.person_ids = std::move(labels.person_ids);
  set.cam_ids = std::move(labels.cam_ids);
  set.name = m.name.value_or(dir.filename().string());
  validate(set);
  return set;
}

void save_embedding_set(const EmbeddingSet& set, const fs::path& dir) {
  validate(set);
  ensure_directory(dir);
  Manifest m;
  m.n = set.rows();
  m.dim = set.dim();
  m.name = set.name;
  write_f32le(dir / m.feature_file, set.features.data(),
              static_cast<std::size_t>(set.features.size()));
  write_labels_csv(set.labels(), dir / m.label_file);
  write_manifest(m, dir);
}

}  // namespace reid
