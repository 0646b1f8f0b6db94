#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

// Learning-rate sweep: one full fine-tune per grid point under identical
// seeds, selected by the dev metric. The runner owns the training; this
// module owns the bookkeeping and the tie rule.

namespace rtdlab {

struct SweepRow {
  double learning_rate = 0.0;
  double dev_metric = 0.0;
  double test_metric = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // grid order
  std::size_t best_index = 0;
  double best_learning_rate = 0.0;
};

// `run` trains at the given rate and returns (dev metric, test metric),
// higher dev is better. Ties break toward the smaller rate. Throws on an
// empty grid or a non-finite dev metric.
SweepResult lr_sweep(const std::vector<double>& grid,
                     const std::function<std::pair<double, double>(double)>& run);

}  // namespace rtdlab
