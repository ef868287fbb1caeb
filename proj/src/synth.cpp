#include "reid/synth.hpp"

#include "reid/error.hpp"
#include "reid/rng.hpp"

#include <string>

namespace reid {

void validate(const SynthConfig& c) {
  if (c.n_ids < 1 || c.per_id_per_cam < 1 || c.n_cams < 1 || c.dim < 1) {
    throw Error(ErrorCode::kBadParams, "synth: all counts must be >= 1");
  }
  if (!(c.center_scale >= 0.0) || !(c.noise_sigma >= 0.0) ||
      !(c.cam_offset_sigma >= 0.0)) {
    throw Error(ErrorCode::kBadParams, "synth: sigmas must be >= 0");
  }
}

EmbeddingSet generate(const SynthConfig& c) {
  validate(c);
  Rng rng(c.seed);
  Eigen::MatrixXd centers(c.n_ids, c.dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) {
    centers.data()[i] = c.center_scale * rng.normal();
  }
  Eigen::MatrixXd offsets(c.n_cams, c.dim);
  for (Eigen::Index i = 0; i < offsets.size(); ++i) {
    offsets.data()[i] = c.cam_offset_sigma * rng.normal();
  }

  const Eigen::Index n = static_cast<Eigen::Index>(c.n_ids) * c.n_cams * c.per_id_per_cam;
  EmbeddingSet set;
  set.name = "synth-" + std::to_string(c.seed);
  set.features.resize(n, c.dim);
  set.person_ids.reserve(static_cast<std::size_t>(n));
  set.cam_ids.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (int id = 0; id < c.n_ids; ++id) {
    for (int cam = 0; cam < c.n_cams; ++cam) {
      for (int s = 0; s < c.per_id_per_cam; ++s, ++row) {
        for (int d = 0; d < c.dim; ++d) {
          const double v = centers(id, d) + offsets(cam, d) + c.noise_sigma * rng.normal();
          set.features(row, d) = static_cast<float>(v);
        }
        set.person_ids.push_back(id);
        set.cam_ids.push_back(cam);
      }
    }
  }
  return set;
}

}  // namespace reid
