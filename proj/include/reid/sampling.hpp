#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reid {

// P identities x K instances, indices grouped by identity in draw order.
struct BatchSpec {
  std::size_t p_identities = 0;
  std::size_t k_instances = 0;
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;
};

// Identity-balanced sampling over a per-row identity column. Identities with
// fewer than k rows are drawn with replacement from their own rows. p must be
// at least 2 so that every anchor has a negative.
BatchSpec sample_batch(std::span<const std::int64_t> person_ids, std::size_t p,
                       std::size_t k, std::uint64_t seed);

// Warm-up ramp reading. kFormula: warmup_lr * t / warmup_epochs, as the
// printed piecewise formula states. kProse: linear from warmup_lr at t = 1 to
// base_lr at t = warmup_epochs.
enum class RampMode { kFormula, kProse };

std::string_view to_string(RampMode mode);
RampMode parse_ramp_mode(std::string_view token);

struct LrSchedule {
  double base_lr = 3.5e-4;
  double warmup_lr = 3.5e-5;
  int warmup_epochs = 10;
  std::vector<int> milestones{40, 70};
  double decay = 0.1;
  RampMode ramp = RampMode::kProse;
};

void validate(const LrSchedule& schedule);

// Learning rate at 1-based epoch t.
double lr_at(const LrSchedule& schedule, int epoch);

std::string to_json(const LrSchedule& schedule);
LrSchedule schedule_from_json(std::string_view text);

}  // namespace reid
