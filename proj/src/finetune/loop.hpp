#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtdlab/core/rng.hpp"
#include "rtdlab/finetune/config.hpp"

// Shared plumbing for the three downstream training loops: step planning,
// per-epoch shuffling, and loss sanity. Internal to the finetune sources.

namespace rtdlab::ftloop {

constexpr std::uint64_t kOrderTag = 0x6f726472ULL;  // epoch example order
constexpr std::uint64_t kDropTag = 0x66647270ULL;   // dropout stream

struct StepPlan {
  std::int64_t steps_per_epoch = 0;
  std::int64_t total = 0;
  std::int64_t warmup = 0;
};

inline StepPlan make_plan(std::size_t examples, const FinetuneConfig& config) {
  StepPlan plan;
  plan.steps_per_epoch = (static_cast<std::int64_t>(examples) + config.batch_size - 1) /
                         config.batch_size;
  plan.total = plan.steps_per_epoch * config.epochs;
  plan.warmup = std::llround(config.warmup_fraction * static_cast<double>(plan.total));
  return plan;
}

inline std::vector<std::int32_t> epoch_order(std::size_t n, std::uint64_t seed,
                                             std::int64_t epoch) {
  Rng rng(derive_seed(seed, kOrderTag, static_cast<std::uint64_t>(epoch)));
  return rng.sample_without_replacement(static_cast<std::int32_t>(n),
                                        static_cast<std::int32_t>(n));
}

inline double checked_loss(double value, std::int64_t step) {
  if (!std::isfinite(value)) {
    throw std::runtime_error("finetune: non-finite loss at step " + std::to_string(step));
  }
  return value;
}

}  // namespace rtdlab::ftloop
