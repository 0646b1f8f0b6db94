#include "rtdlab/finetune/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rtdlab/core/rng.hpp"

namespace rtdlab {

namespace {
constexpr std::uint64_t kHashSplitTag = 0x68737074ULL;  // per-index dev carve-out
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;    // train/test permutation
}  // namespace

void FinetuneConfig::validate() const {
  if (batch_size <= 0) throw std::invalid_argument("FinetuneConfig: batch_size must be positive");
  if (max_seq_len < 4) {
    throw std::invalid_argument("FinetuneConfig: max_seq_len must be at least 4");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("FinetuneConfig: learning_rate must be positive");
  }
  if (epochs <= 0) throw std::invalid_argument("FinetuneConfig: epochs must be positive");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw std::invalid_argument("FinetuneConfig: warmup_fraction must lie in [0, 1]");
  }
  if (doc_stride <= 0) throw std::invalid_argument("FinetuneConfig: doc_stride must be positive");
  if (max_answer_len <= 0) {
    throw std::invalid_argument("FinetuneConfig: max_answer_len must be positive");
  }
  if (n_best <= 0) throw std::invalid_argument("FinetuneConfig: n_best must be positive");
}

const std::vector<double>& finetune_lr_grid() {
  static const std::vector<double> grid = {2e-5, 3e-5, 5e-5};
  return grid;
}

std::vector<std::uint8_t> hash_split_mask(std::size_t n, double dev_fraction,
                                          std::uint64_t seed) {
  if (dev_fraction < 0.0 || dev_fraction > 1.0) {
    throw std::invalid_argument("hash_split_mask: dev_fraction must lie in [0, 1]");
  }
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t h = splitmix64(derive_seed(seed, kHashSplitTag, i));
    const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
    mask[i] = unit < dev_fraction ? 1 : 0;
  }
  return mask;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> shuffled_split(
    std::size_t n, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0) {
    throw std::invalid_argument("shuffled_split: test_fraction must lie in [0, 1]");
  }
  if (n > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw std::invalid_argument("shuffled_split: n too large");
  }
  Rng rng(derive_seed(seed, kShuffleTag));
  const auto perm = rng.sample_without_replacement(static_cast<std::int32_t>(n),
                                                   static_cast<std::int32_t>(n));
  const std::size_t test_count =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_count));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(test_count), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

}  // namespace rtdlab
