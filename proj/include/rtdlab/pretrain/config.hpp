#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace rtdlab {

struct PretrainConfig {
  double mask_fraction = 0.15;
  std::int32_t seq_len = 128;
  std::int64_t steps = 300;
  std::int32_t batch_size = 8;
  double peak_lr = 2e-4;
  std::int64_t warmup_steps = 30;
  double disc_loss_weight = 50.0;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  std::int64_t log_interval = 10;

  void validate() const {
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
      throw std::invalid_argument("PretrainConfig: mask_fraction must be in (0, 1), got " +
                                  std::to_string(mask_fraction));
    }
    if (seq_len < 8) throw std::invalid_argument("PretrainConfig: seq_len must be at least 8");
    if (steps <= 0) throw std::invalid_argument("PretrainConfig: steps must be positive");
    if (batch_size <= 0) throw std::invalid_argument("PretrainConfig: batch_size must be positive");
    if (peak_lr <= 0.0) throw std::invalid_argument("PretrainConfig: peak_lr must be positive");
    if (warmup_steps < 0 || warmup_steps > steps) {
      throw std::invalid_argument("PretrainConfig: warmup_steps must lie in [0, steps]");
    }
    if (disc_loss_weight < 0.0) {
      throw std::invalid_argument("PretrainConfig: disc_loss_weight must be nonnegative");
    }
    if (temperature <= 0.0) {
      throw std::invalid_argument("PretrainConfig: temperature must be positive");
    }
    if (log_interval <= 0) {
      throw std::invalid_argument("PretrainConfig: log_interval must be positive");
    }
  }
};

inline void to_json(nlohmann::json& j, const PretrainConfig& c) {
  j = nlohmann::json{{"mask_fraction", c.mask_fraction},
                     {"seq_len", c.seq_len},
                     {"steps", c.steps},
                     {"batch_size", c.batch_size},
                     {"peak_lr", c.peak_lr},
                     {"warmup_steps", c.warmup_steps},
                     {"disc_loss_weight", c.disc_loss_weight},
                     {"temperature", c.temperature},
                     {"seed", c.seed},
                     {"log_interval", c.log_interval}};
}

inline void from_json(const nlohmann::json& j, PretrainConfig& c) {
  j.at("mask_fraction").get_to(c.mask_fraction);
  j.at("seq_len").get_to(c.seq_len);
  j.at("steps").get_to(c.steps);
  j.at("batch_size").get_to(c.batch_size);
  j.at("peak_lr").get_to(c.peak_lr);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("disc_loss_weight").get_to(c.disc_loss_weight);
  j.at("temperature").get_to(c.temperature);
  j.at("seed").get_to(c.seed);
  j.at("log_interval").get_to(c.log_interval);
}

}  // namespace rtdlab
