#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rtdlab/core/tensor.hpp"

namespace rtdlab {

template <class S>
struct NamedParam {
  std::string name;
  Tensor<S> tensor;
};

template <class S>
using NamedParams = std::vector<NamedParam<S>>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.01;
};

// Bias and normalization parameters are conventionally excluded from weight
// decay; so is the vocabulary output bias.
inline bool decay_exempt(const std::string& name) {
  return name.find(".bias") != std::string::npos || name.find(".norm.") != std::string::npos ||
         name.find(".gain") != std::string::npos || name.find("output_bias") != std::string::npos;
}

// Adam with bias correction and decoupled weight decay. Parameters tied under
// several names (shared embedding tables) are deduplicated by graph node so
// each gets exactly one update and one pair of moment buffers.
template <class S>
class Adam {
 public:
  Adam(const NamedParams<S>& params, AdamConfig config = {}) : config_(config) {
    std::unordered_set<const TensorNode<S>*> seen;
    for (const auto& p : params) {
      if (!p.tensor.defined()) {
        throw std::invalid_argument("Adam: undefined tensor for parameter " + p.name);
      }
      if (!seen.insert(p.tensor.raw()).second) continue;
      Slot slot;
      slot.name = p.name;
      slot.tensor = p.tensor;
      slot.m.assign(p.tensor.size(), S(0));
      slot.v.assign(p.tensor.size(), S(0));
      slot.decay = !decay_exempt(p.name);
      slots_.push_back(std::move(slot));
    }
  }

  // One update with the given learning rate. Gradients that were never
  // allocated (parameter untouched by the loss) count as zero.
  void step(double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("Adam: lr must be >= 0");
    ++step_count_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (auto& slot : slots_) {
      TensorNode<S>* node = slot.tensor.raw();
      const bool has_grad = !node->grad.empty();
      S* p = node->value.data();
      const std::size_t n = node->value.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double g = has_grad ? static_cast<double>(node->grad[i]) : 0.0;
        if (!std::isfinite(g)) {
          throw std::runtime_error("Adam: non-finite gradient in " + slot.name);
        }
        double m = b1 * static_cast<double>(slot.m[i]) + (1.0 - b1) * g;
        double v = b2 * static_cast<double>(slot.v[i]) + (1.0 - b2) * g * g;
        slot.m[i] = static_cast<S>(m);
        slot.v[i] = static_cast<S>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double upd = lr * mhat / (std::sqrt(vhat) + config_.eps);
        if (slot.decay && config_.weight_decay != 0.0) {
          upd += lr * config_.weight_decay * static_cast<double>(p[i]);
        }
        p[i] = static_cast<S>(static_cast<double>(p[i]) - upd);
      }
    }
  }

  void zero_grad() {
    for (auto& slot : slots_) slot.tensor.zero_grad();
  }

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

  // Checkpoint access: moment vectors by unique parameter name.
  struct MomentView {
    const std::string& name;
    const std::vector<S>& m;
    const std::vector<S>& v;
  };
  std::size_t slot_count() const { return slots_.size(); }
  MomentView moments(std::size_t i) const {
    return MomentView{slots_[i].name, slots_[i].m, slots_[i].v};
  }
  void restore(std::int64_t step_count, const std::string& name, const std::vector<S>& m,
               const std::vector<S>& v) {
    step_count_ = step_count;
    for (auto& slot : slots_) {
      if (slot.name != name) continue;
      if (m.size() != slot.m.size() || v.size() != slot.v.size()) {
        throw std::runtime_error("Adam: moment size mismatch restoring " + name);
      }
      slot.m = m;
      slot.v = v;
      return;
    }
    throw std::runtime_error("Adam: unknown parameter in checkpoint: " + name);
  }

 private:
  struct Slot {
    std::string name;
    Tensor<S> tensor;
    std::vector<S> m, v;
    bool decay = true;
  };
  AdamConfig config_;
  std::vector<Slot> slots_;
  std::int64_t step_count_ = 0;
};

}  // namespace rtdlab
