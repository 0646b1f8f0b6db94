#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rtdlab/core/adam.hpp"
#include "rtdlab/model/encoder.hpp"
#include "rtdlab/model/heads.hpp"
#include "rtdlab/pretrain/config.hpp"
#include "rtdlab/pretrain/masking.hpp"

// Replaced-token-detection pretraining: a small generator trained as a masked
// language model proposes replacement tokens, and a discriminator classifies
// every non-pad token as original or replaced.  Both train jointly under one
// optimizer on mlm_loss + disc_loss_weight * disc_loss.  The generator
// borrows all three embedding tables from the discriminator.  An MLM-only
// trainer on a full-width model serves as the efficiency baseline.

namespace rtdlab {

struct RtdModels {
  EncoderModel<float> generator;
  EncoderModel<float> discriminator;
  MlmHead<float> mlm_head;  // sized to the generator, output tied to the token table
  RtdHead<float> rtd_head;  // sized to the discriminator

  RtdModels(const EncoderConfig& generator_config, const EncoderConfig& discriminator_config);

  void init(std::uint64_t seed);

  // Union of all trainable tensors under the prefixes "discriminator.",
  // "generator.", "mlm.", "rtd.".  Tied tables appear under both encoder
  // prefixes; the optimizer deduplicates by storage.
  NamedParams<float> trainable();
};

struct GeneratorOutput {
  Tensor<float> loss;           // scalar mean cross-entropy over masked positions
  Tensor<float> masked_logits;  // [masked_count, vocab]
  std::vector<std::int32_t> masked_flat;
};

// Generator forward on masked_ids, loss over masked positions only.
// Throws when the batch has no masked positions.
GeneratorOutput generator_step(EncoderModel<float>& generator, MlmHead<float>& mlm_head,
                               const Tensor<float>& token_table, const RtdBatch& batch,
                               const ForwardOptions<float>& opts);

struct DiscriminatorOutput {
  Tensor<float> loss;  // scalar mean binary cross-entropy over non-pad positions
  double accuracy = 0.0;
  std::int64_t replaced = 0;  // label counts over the positions in the loss
  std::int64_t total = 0;
};

// Discriminator forward on corrupted_ids; every non-pad position contributes
// one sigmoid cross-entropy term.
DiscriminatorOutput discriminator_step(EncoderModel<float>& discriminator,
                                       RtdHead<float>& rtd_head, const RtdBatch& batch,
                                       const ForwardOptions<float>& opts);

struct PretrainMetrics {
  std::int64_t step = 0;
  double mlm_loss = 0.0;
  double disc_loss = 0.0;  // NaN for the MLM-only objective
  double disc_acc = 0.0;   // NaN for the MLM-only objective
  double lr = 0.0;
  std::int64_t replaced_tokens = 0;  // discriminator label stream, this step
  std::int64_t loss_tokens = 0;
  std::int32_t skipped_sequences = 0;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const PretrainMetrics& m);

class RtdTrainer {
 public:
  // Sequences are fixed-length id rows from pack_sequences.  The trainer
  // samples batches with replacement from per-step seed-derived streams, so a
  // run restored at step k continues bit-identically.
  RtdTrainer(RtdModels& models, const Vocab& vocab,
             std::vector<std::vector<std::int32_t>> sequences, PretrainConfig config);

  PretrainMetrics train_step();

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }
  Adam<float>& optimizer() { return optimizer_; }
  const PretrainConfig& config() const { return config_; }

 private:
  RtdModels& models_;
  const Vocab& vocab_;
  std::vector<std::vector<std::int32_t>> sequences_;
  PretrainConfig config_;
  Adam<float> optimizer_;
  std::int64_t step_ = 0;
};

struct MlmModels {
  EncoderModel<float> model;
  MlmHead<float> head;

  explicit MlmModels(const EncoderConfig& config);
  void init(std::uint64_t seed);
  NamedParams<float> trainable();  // prefixes "model." and "mlm."
};

class MlmTrainer {
 public:
  MlmTrainer(MlmModels& models, const Vocab& vocab,
             std::vector<std::vector<std::int32_t>> sequences, PretrainConfig config);

  PretrainMetrics train_step();

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }
  Adam<float>& optimizer() { return optimizer_; }
  const PretrainConfig& config() const { return config_; }

 private:
  MlmModels& models_;
  const Vocab& vocab_;
  std::vector<std::vector<std::int32_t>> sequences_;
  PretrainConfig config_;
  Adam<float> optimizer_;
  std::int64_t step_ = 0;
};

struct HeldoutMetrics {
  double mlm_loss = 0.0;
  double disc_loss = 0.0;
  double disc_acc = 0.0;
  std::int64_t masked_tokens = 0;
  std::int64_t replaced_tokens = 0;
  std::int64_t loss_tokens = 0;
};

// Evaluation-mode pass over held-out sequences in fixed batches; masking and
// replacement sampling use a stream derived only from the config seed, so the
// numbers are comparable across calls.
HeldoutMetrics evaluate_heldout(RtdModels& models, const Vocab& vocab,
                                const std::vector<std::vector<std::int32_t>>& sequences,
                                const PretrainConfig& config);

// MLM-only variant; disc fields of the result are NaN.
HeldoutMetrics evaluate_heldout(MlmModels& models, const Vocab& vocab,
                                const std::vector<std::vector<std::int32_t>>& sequences,
                                const PretrainConfig& config);

}  // namespace rtdlab
