#pragma once

#include <cstdint>
#include <vector>

#include "rtdlab/core/rng.hpp"
#include "rtdlab/tokenizer/vocab.hpp"

// Replaced-token-detection batch construction.  A batch carries three views of
// the same sequences: the originals, a masked copy for the generator, and a
// corrupted copy for the discriminator where each masked position holds a
// token sampled from the generator.  Detection labels mark positions where the
// sampled token differs from the original; a sampled token that matches the
// original counts as untouched.

namespace rtdlab {

struct RtdBatch {
  std::int32_t batch = 0;
  std::int32_t seq_len = 0;
  std::vector<std::int32_t> original_ids;    // all row-major [batch, seq_len]
  std::vector<std::int32_t> masked_ids;      // [MASK] at selected positions
  std::vector<std::int32_t> corrupted_ids;   // generator samples at selected positions
  std::vector<std::uint8_t> mask_positions;  // 1 where selected for masking
  std::vector<std::uint8_t> rtd_labels;      // 1 where corrupted differs from original
  std::vector<std::uint8_t> attention_mask;  // 0 exactly at [PAD]
};

struct MaskResult {
  RtdBatch batch;
  std::int32_t skipped = 0;  // sequences dropped for lack of maskable positions
};

// Selects round(mask_fraction * eligible) positions per sequence without
// replacement, where eligible positions hold none of [PAD], [CLS], [SEP],
// [MASK].  Sequences whose rounded count is zero are dropped and counted in
// `skipped`.  corrupted_ids starts as a copy of original_ids and rtd_labels
// all zero; sample_replacements fills both in.
MaskResult make_masked_batch(const std::vector<std::vector<std::int32_t>>& sequences,
                             const Vocab& vocab, double mask_fraction, Rng& rng);

// Flat [batch * seq_len] indices of the masked positions, increasing.
std::vector<std::int32_t> masked_positions_of(const RtdBatch& batch);

// Samples one replacement token per masked position from
// softmax(logits / temperature) and writes corrupted_ids and rtd_labels.
// `logits` is row-major [masked_count, vocab_size] in masked_positions_of
// order.  Throws if any logit is non-finite.
void sample_replacements(RtdBatch& batch, const std::vector<float>& logits,
                         std::int32_t vocab_size, double temperature, Rng& rng);

}  // namespace rtdlab
