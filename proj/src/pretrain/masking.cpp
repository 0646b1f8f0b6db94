#include "rtdlab/pretrain/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rtdlab {

MaskResult make_masked_batch(const std::vector<std::vector<std::int32_t>>& sequences,
                             const Vocab& vocab, double mask_fraction, Rng& rng) {
  if (sequences.empty()) throw std::invalid_argument("make_masked_batch: no sequences");
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
    throw std::invalid_argument("make_masked_batch: mask_fraction must be in (0, 1)");
  }
  const std::size_t seq_len = sequences.front().size();
  for (const auto& seq : sequences) {
    if (seq.size() != seq_len) {
      throw std::invalid_argument("make_masked_batch: sequences must share one length");
    }
  }
  if (seq_len == 0) throw std::invalid_argument("make_masked_batch: empty sequences");

  MaskResult result;
  RtdBatch& b = result.batch;
  b.seq_len = static_cast<std::int32_t>(seq_len);

  std::vector<std::int32_t> eligible;
  for (const auto& seq : sequences) {
    eligible.clear();
    for (std::size_t i = 0; i < seq_len; ++i) {
      const std::int32_t id = seq[i];
      if (id == vocab.pad() || id == vocab.cls() || id == vocab.sep() || id == vocab.mask()) {
        continue;
      }
      eligible.push_back(static_cast<std::int32_t>(i));
    }
    const std::int32_t k = static_cast<std::int32_t>(
        std::llround(mask_fraction * static_cast<double>(eligible.size())));
    if (k == 0) {
      ++result.skipped;
      continue;
    }

    const std::size_t base = b.original_ids.size();
    b.original_ids.insert(b.original_ids.end(), seq.begin(), seq.end());
    b.masked_ids.insert(b.masked_ids.end(), seq.begin(), seq.end());
    b.corrupted_ids.insert(b.corrupted_ids.end(), seq.begin(), seq.end());
    b.mask_positions.resize(base + seq_len, 0);
    b.rtd_labels.resize(base + seq_len, 0);
    for (std::size_t i = 0; i < seq_len; ++i) {
      b.attention_mask.push_back(seq[i] == vocab.pad() ? 0 : 1);
    }

    const auto picks =
        rng.sample_without_replacement(static_cast<std::int32_t>(eligible.size()), k);
    for (const std::int32_t pick : picks) {
      const std::size_t pos = base + static_cast<std::size_t>(eligible[pick]);
      b.masked_ids[pos] = vocab.mask();
      b.mask_positions[pos] = 1;
    }
    ++b.batch;
  }
  return result;
}

std::vector<std::int32_t> masked_positions_of(const RtdBatch& batch) {
  std::vector<std::int32_t> positions;
  for (std::size_t i = 0; i < batch.mask_positions.size(); ++i) {
    if (batch.mask_positions[i]) positions.push_back(static_cast<std::int32_t>(i));
  }
  return positions;
}

void sample_replacements(RtdBatch& batch, const std::vector<float>& logits,
                         std::int32_t vocab_size, double temperature, Rng& rng) {
  if (vocab_size <= 1) throw std::invalid_argument("sample_replacements: vocab_size too small");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("sample_replacements: temperature must be positive");
  }
  const auto positions = masked_positions_of(batch);
  if (logits.size() != positions.size() * static_cast<std::size_t>(vocab_size)) {
    throw std::invalid_argument(
        "sample_replacements: logits must be [masked_count, vocab_size], got " +
        std::to_string(logits.size()) + " values for " + std::to_string(positions.size()) +
        " masked positions");
  }

  std::vector<double> probs(static_cast<std::size_t>(vocab_size));
  for (std::size_t m = 0; m < positions.size(); ++m) {
    const float* row = logits.data() + m * static_cast<std::size_t>(vocab_size);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::int32_t v = 0; v < vocab_size; ++v) {
      if (!std::isfinite(row[v])) {
        throw std::runtime_error("sample_replacements: non-finite generator logit");
      }
      max_logit = std::max(max_logit, static_cast<double>(row[v]));
    }
    for (std::int32_t v = 0; v < vocab_size; ++v) {
      probs[static_cast<std::size_t>(v)] =
          std::exp((static_cast<double>(row[v]) - max_logit) / temperature);
    }
    const std::int32_t sampled = rng.categorical(probs.data(), vocab_size);
    const auto pos = static_cast<std::size_t>(positions[m]);
    batch.corrupted_ids[pos] = sampled;
    batch.rtd_labels[pos] = (sampled != batch.original_ids[pos]) ? 1 : 0;
  }
}

}  // namespace rtdlab
