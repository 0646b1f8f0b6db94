#pragma once

#include <cstdint>
#include <utility>
#include <vector>

// Downstream-task training configuration and the deterministic dataset
// splits used when a corpus ships without its own dev or test partition.

namespace rtdlab {

struct FinetuneConfig {
  std::int32_t batch_size = 32;
  std::int32_t max_seq_len = 256;  // question answering uses 384
  double learning_rate = 3e-5;
  std::int64_t epochs = 10;  // question answering defaults to 3
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  std::int32_t doc_stride = 128;  // window advance for question answering
  std::int32_t max_answer_len = 30;
  std::int32_t n_best = 20;

  void validate() const;  // throws std::invalid_argument
};

// The swept learning rates, smallest first.
const std::vector<double>& finetune_lr_grid();

// Element i lands in the carved-out split iff the hash of (seed, i) falls
// below the fraction; independent of every other element.
std::vector<std::uint8_t> hash_split_mask(std::size_t n, double dev_fraction, std::uint64_t seed);

// Seeded-shuffle partition into (train, test) index lists, each ascending;
// test gets round(n * test_fraction) elements.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> shuffled_split(
    std::size_t n, double test_fraction, std::uint64_t seed);

}  // namespace rtdlab
