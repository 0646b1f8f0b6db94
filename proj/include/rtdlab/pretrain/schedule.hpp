#pragma once

#include <cstdint>
#include <stdexcept>

namespace rtdlab {

// Linear warmup to peak_lr at warmup steps, then linear decay to zero at
// total steps.  step is 1-based: the first optimizer update uses step 1.
inline double linear_lr(std::int64_t step, double peak_lr, std::int64_t warmup,
                        std::int64_t total) {
  if (step < 1 || step > total) throw std::invalid_argument("linear_lr: step outside [1, total]");
  if (warmup < 0 || warmup > total) {
    throw std::invalid_argument("linear_lr: warmup outside [0, total]");
  }
  if (step <= warmup) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total == warmup) return peak_lr;
  return peak_lr * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

}  // namespace rtdlab
