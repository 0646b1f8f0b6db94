#include "rtdlab/finetune/sweep.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rtdlab {

SweepResult lr_sweep(const std::vector<double>& grid,
                     const std::function<std::pair<double, double>(double)>& run) {
  if (grid.empty()) throw std::invalid_argument("lr_sweep: empty learning-rate grid");
  if (!run) throw std::invalid_argument("lr_sweep: no runner");

  SweepResult out;
  out.rows.reserve(grid.size());
  for (double lr : grid) {
    const auto [dev, test] = run(lr);
    if (!std::isfinite(dev)) {
      throw std::runtime_error("lr_sweep: non-finite dev metric at rate " + std::to_string(lr));
    }
    out.rows.push_back({lr, dev, test});
  }
  out.best_index = 0;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const SweepRow& cur = out.rows[i];
    const SweepRow& best = out.rows[out.best_index];
    if (cur.dev_metric > best.dev_metric ||
        (cur.dev_metric == best.dev_metric && cur.learning_rate < best.learning_rate)) {
      out.best_index = i;
    }
  }
  out.best_learning_rate = out.rows[out.best_index].learning_rate;
  return out;
}

}  // namespace rtdlab
