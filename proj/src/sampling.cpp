#include "reid/sampling.hpp"

#include "reid/error.hpp"
#include "reid/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace reid {

BatchSpec sample_batch(std::span<const std::int64_t> person_ids, std::size_t p,
                       std::size_t k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::kBadParams, "sample_batch: k must be >= 1");
  if (p < 2) {
    throw Error(ErrorCode::kNotEnoughIdentities,
                "sample_batch: p >= 2 identities are needed for in-batch negatives");
  }
  // Sorted by identity so the draw does not depend on row order of ids.
  std::map<std::int64_t, std::vector<std::size_t>> rows_by_id;
  for (std::size_t i = 0; i < person_ids.size(); ++i) {
    rows_by_id[person_ids[i]].push_back(i);
  }
  if (rows_by_id.size() < p) {
    throw Error(ErrorCode::kNotEnoughIdentities,
                "sample_batch: " + std::to_string(rows_by_id.size()) +
                    " identities available, " + std::to_string(p) + " requested");
  }
  std::vector<const std::vector<std::size_t>*> groups;
  groups.reserve(rows_by_id.size());
  for (const auto& [id, rows] : rows_by_id) groups.push_back(&rows);

  Rng rng(seed);
  // Partial Fisher-Yates: the first p slots become the chosen identities.
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t j = i + rng.uniform_index(groups.size() - i);
    std::swap(groups[i], groups[j]);
  }

  BatchSpec batch{p, k, {}, seed};
  batch.indices.reserve(p * k);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<std::size_t> rows = *groups[i];
    if (rows.size() >= k) {
      for (std::size_t s = 0; s < k; ++s) {
        const std::size_t j = s + rng.uniform_index(rows.size() - s);
        std::swap(rows[s], rows[j]);
        batch.indices.push_back(rows[s]);
      }
    } else {
      for (std::size_t s = 0; s < k; ++s) {
        batch.indices.push_back(rows[rng.uniform_index(rows.size())]);
      }
    }
  }
  return batch;
}

std::string_view to_string(RampMode mode) {
  return mode == RampMode::kFormula ? "formula" : "prose";
}

RampMode parse_ramp_mode(std::string_view token) {
  if (token == "formula") return RampMode::kFormula;
  if (token == "prose") return RampMode::kProse;
  throw Error(ErrorCode::kBadParams, "unknown ramp mode '" + std::string(token) + "'");
}

void validate(const LrSchedule& s) {
  if (!(s.base_lr > 0.0) || !(s.warmup_lr >= 0.0) || s.warmup_epochs < 0) {
    throw Error(ErrorCode::kBadParams, "schedule: rates must be positive, warm-up >= 0");
  }
  if (!(s.decay > 0.0 && s.decay < 1.0)) {
    throw Error(ErrorCode::kBadParams, "schedule: decay must lie in (0, 1)");
  }
  for (std::size_t i = 1; i < s.milestones.size(); ++i) {
    if (s.milestones[i] <= s.milestones[i - 1]) {
      throw Error(ErrorCode::kBadParams, "schedule: milestones must be strictly increasing");
    }
  }
}

double lr_at(const LrSchedule& s, int epoch) {
  validate(s);
  if (epoch < 1) throw Error(ErrorCode::kBadParams, "lr_at: epochs are 1-based");
  const double t = epoch;
  const double w = s.warmup_epochs;
  if (epoch <= s.warmup_epochs) {
    if (s.ramp == RampMode::kFormula) return s.warmup_lr * t / w;
    if (s.warmup_epochs == 1) return s.base_lr;
    return s.warmup_lr + (s.base_lr - s.warmup_lr) * (t - 1.0) / (w - 1.0);
  }
  const auto passed = std::count_if(s.milestones.begin(), s.milestones.end(),
                                    [&](int m) { return epoch > m; });
  // Divide by 1/decay so that decimal factors such as 0.1 stay exact:
  // 3.5e-4 * 0.1 != 3.5e-5 in binary, 3.5e-4 / 10 == 3.5e-5.
  return s.base_lr / std::pow(1.0 / s.decay, static_cast<double>(passed));
}

std::string to_json(const LrSchedule& s) {
  nlohmann::ordered_json doc;
  doc["base_lr"] = s.base_lr;
  doc["warmup_lr"] = s.warmup_lr;
  doc["warmup_epochs"] = s.warmup_epochs;
  doc["milestones"] = s.milestones;
  doc["decay"] = s.decay;
  doc["ramp"] = std::string(to_string(s.ramp));
  return doc.dump();
}

LrSchedule schedule_from_json(std::string_view text) {
  LrSchedule s;
  try {
    const auto doc = nlohmann::json::parse(text);
    s.base_lr = doc.at("base_lr").get<double>();
    s.warmup_lr = doc.at("warmup_lr").get<double>();
    s.warmup_epochs = doc.at("warmup_epochs").get<int>();
    s.milestones = doc.at("milestones").get<std::vector<int>>();
    s.decay = doc.at("decay").get<double>();
    s.ramp = parse_ramp_mode(doc.at("ramp").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadParams, std::string("schedule JSON: ") + e.what());
  }
  validate(s);
  return s;
}

}  // namespace reid
