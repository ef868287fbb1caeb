#pragma once

#include "reid/embedio.hpp"

#include <cstdint>

namespace reid {

struct SynthConfig {
  int n_ids = 10;
  int per_id_per_cam = 5;
  int n_cams = 2;
  int dim = 16;
  double center_scale = 1.0;     // std-dev of identity centres per coordinate
  double noise_sigma = 0.1;      // within-identity std-dev
  double cam_offset_sigma = 0.0; // per-camera systematic shift std-dev
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& config);

// Gaussian clusters: sample = centre[id] + offset[cam] + noise. Rows are
// ordered by identity, then camera, then instance.
EmbeddingSet generate(const SynthConfig& config);

}  // namespace reid
