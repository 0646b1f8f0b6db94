#include "rtdlab/pretrain/rtd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "rtdlab/core/ops.hpp"
#include "rtdlab/pretrain/schedule.hpp"

namespace rtdlab {

namespace {

constexpr std::uint64_t kGenInitTag = 0x67656e;
constexpr std::uint64_t kDiscInitTag = 0x64697363;
constexpr std::uint64_t kMlmInitTag = 0x6d6c6d;
constexpr std::uint64_t kRtdInitTag = 0x727464;
constexpr std::uint64_t kDataTag = 0x64617461;
constexpr std::uint64_t kMaskTag = 0x6d61736b;
constexpr std::uint64_t kReplTag = 0x7265706c;
constexpr std::uint64_t kDropTag = 0x64726f70;
constexpr std::uint64_t kEvalTag = 0x6576616c;

TokenBatch to_token_batch(const RtdBatch& batch, const std::vector<std::int32_t>& ids) {
  TokenBatch tb;
  tb.batch = static_cast<std::size_t>(batch.batch);
  tb.seq_len = static_cast<std::size_t>(batch.seq_len);
  tb.ids = ids;
  tb.segments.assign(ids.size(), 0);
  tb.attention_mask = batch.attention_mask;
  return tb;
}

void check_training_inputs(const Vocab& vocab, const EncoderConfig& config,
                           const std::vector<std::vector<std::int32_t>>& sequences,
                           const PretrainConfig& pretrain) {
  pretrain.validate();
  if (sequences.empty()) throw std::invalid_argument("pretrain: no training sequences");
  if (static_cast<std::int32_t>(vocab.size()) != config.vocab_size) {
    throw std::invalid_argument("pretrain: vocab has " + std::to_string(vocab.size()) +
                                " tokens but the model expects " +
                                std::to_string(config.vocab_size));
  }
  for (const auto& seq : sequences) {
    if (static_cast<std::int32_t>(seq.size()) != pretrain.seq_len) {
      throw std::invalid_argument("pretrain: sequence of length " + std::to_string(seq.size()) +
                                  " does not match configured seq_len " +
                                  std::to_string(pretrain.seq_len));
    }
  }
}

std::vector<std::vector<std::int32_t>> sample_rows(
    const std::vector<std::vector<std::int32_t>>& sequences, std::int32_t batch_size, Rng& rng) {
  std::vector<std::vector<std::int32_t>> rows;
  rows.reserve(static_cast<std::size_t>(batch_size));
  for (std::int32_t b = 0; b < batch_size; ++b) {
    rows.push_back(sequences[static_cast<std::size_t>(rng.uniform_below(sequences.size()))]);
  }
  return rows;
}

double finite_or_throw(double v, const char* what, std::int64_t step) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string(what) + " is non-finite at step " + std::to_string(step));
  }
  return v;
}

}  // namespace

RtdModels::RtdModels(const EncoderConfig& generator_config,
                     const EncoderConfig& discriminator_config)
    : generator(generator_config),
      discriminator(discriminator_config),
      mlm_head(generator_config),
      rtd_head(discriminator_config) {
  if (generator_config.vocab_size != discriminator_config.vocab_size) {
    throw std::invalid_argument("RtdModels: generator and discriminator vocab sizes differ");
  }
  if (generator_config.embedding_size != discriminator_config.embedding_size) {
    throw std::invalid_argument("RtdModels: embedding sizes must match to share tables");
  }
  if (generator_config.max_positions != discriminator_config.max_positions) {
    throw std::invalid_argument("RtdModels: generator and discriminator max_positions differ");
  }
  generator.share_embeddings_from(discriminator, EmbeddingSharing::all);
}

void RtdModels::init(std::uint64_t seed) {
  // Generator first: the discriminator pass then rewrites the shared tables,
  // so tied storage ends up with the discriminator's stream.
  generator.init(derive_seed(seed, kGenInitTag));
  discriminator.init(derive_seed(seed, kDiscInitTag));
  mlm_head.init(derive_seed(seed, kMlmInitTag));
  rtd_head.init(derive_seed(seed, kRtdInitTag));
}

NamedParams<float> RtdModels::trainable() {
  NamedParams<float> out = prefixed(discriminator.params().all(), "discriminator.");
  NamedParams<float> gen = prefixed(generator.params().all(), "generator.");
  NamedParams<float> mlm = prefixed(mlm_head.params().all(), "mlm.");
  NamedParams<float> rtd = prefixed(rtd_head.params().all(), "rtd.");
  out.insert(out.end(), gen.begin(), gen.end());
  out.insert(out.end(), mlm.begin(), mlm.end());
  out.insert(out.end(), rtd.begin(), rtd.end());
  return out;
}

GeneratorOutput generator_step(EncoderModel<float>& generator, MlmHead<float>& mlm_head,
                               const Tensor<float>& token_table, const RtdBatch& batch,
                               const ForwardOptions<float>& opts) {
  GeneratorOutput out;
  out.masked_flat = masked_positions_of(batch);
  if (out.masked_flat.empty()) {
    throw std::runtime_error("generator_step: batch has no masked positions");
  }
  Tensor<float> hidden = generator.encode(to_token_batch(batch, batch.masked_ids), opts);
  Tensor<float> gathered = gather_rows(hidden, out.masked_flat);
  out.masked_logits = mlm_head.forward(gathered, token_table);
  std::vector<std::int32_t> targets;
  targets.reserve(out.masked_flat.size());
  for (const std::int32_t pos : out.masked_flat) {
    targets.push_back(batch.original_ids[static_cast<std::size_t>(pos)]);
  }
  out.loss = cross_entropy(out.masked_logits, targets);
  return out;
}

DiscriminatorOutput discriminator_step(EncoderModel<float>& discriminator,
                                       RtdHead<float>& rtd_head, const RtdBatch& batch,
                                       const ForwardOptions<float>& opts) {
  std::vector<std::int32_t> nonpad;
  std::vector<float> labels;
  for (std::size_t i = 0; i < batch.attention_mask.size(); ++i) {
    if (!batch.attention_mask[i]) continue;
    nonpad.push_back(static_cast<std::int32_t>(i));
    labels.push_back(batch.rtd_labels[i] ? 1.0f : 0.0f);
  }
  if (nonpad.empty()) throw std::runtime_error("discriminator_step: batch has no real tokens");

  Tensor<float> hidden = discriminator.encode(to_token_batch(batch, batch.corrupted_ids), opts);
  Tensor<float> gathered = gather_rows(hidden, nonpad);
  Tensor<float> logits = rtd_head.forward(gathered);

  DiscriminatorOutput out;
  out.total = static_cast<std::int64_t>(labels.size());
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0.5f) ++out.replaced;
    const bool predicted_replaced = logits.values()[i] > 0.0f;
    if (predicted_replaced == (labels[i] > 0.5f)) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.total);

  const std::size_t label_count = labels.size();
  Tensor<float> label_t = Tensor<float>::from(Shape{label_count}, std::move(labels));
  out.loss = reduce_mean(binary_cross_entropy_with_logits(logits, label_t));
  return out;
}

void write_metrics_header(std::ostream& out) { out << "step,mlm_loss,disc_loss,disc_acc,lr\n"; }

void write_metrics_row(std::ostream& out, const PretrainMetrics& m) {
  out << m.step << ',' << m.mlm_loss << ',' << m.disc_loss << ',' << m.disc_acc << ',' << m.lr
      << '\n';
}

RtdTrainer::RtdTrainer(RtdModels& models, const Vocab& vocab,
                       std::vector<std::vector<std::int32_t>> sequences, PretrainConfig config)
    : models_(models),
      vocab_(vocab),
      sequences_(std::move(sequences)),
      config_(config),
      optimizer_(models.trainable()) {
  check_training_inputs(vocab_, models_.discriminator.config(), sequences_, config_);
}

PretrainMetrics RtdTrainer::train_step() {
  const std::int64_t step = step_ + 1;
  if (step > config_.steps) {
    throw std::runtime_error("train_step: schedule exhausted after " +
                             std::to_string(config_.steps) + " steps");
  }
  Rng data_rng(derive_seed(config_.seed, kDataTag, static_cast<std::uint64_t>(step)));
  Rng mask_rng(derive_seed(config_.seed, kMaskTag, static_cast<std::uint64_t>(step)));
  Rng repl_rng(derive_seed(config_.seed, kReplTag, static_cast<std::uint64_t>(step)));
  Rng drop_rng(derive_seed(config_.seed, kDropTag, static_cast<std::uint64_t>(step)));

  MaskResult masked =
      make_masked_batch(sample_rows(sequences_, config_.batch_size, data_rng), vocab_,
                        config_.mask_fraction, mask_rng);
  if (masked.batch.batch == 0) {
    throw std::runtime_error("train_step: every sampled sequence lacked maskable positions");
  }

  ForwardOptions<float> opts;
  opts.training = true;
  opts.dropout_rng = &drop_rng;

  GeneratorOutput gen = generator_step(models_.generator, models_.mlm_head,
                                       models_.generator.params().get("embeddings.token"),
                                       masked.batch, opts);
  sample_replacements(masked.batch, gen.masked_logits.values(),
                      models_.generator.config().vocab_size, config_.temperature, repl_rng);
  DiscriminatorOutput disc =
      discriminator_step(models_.discriminator, models_.rtd_head, masked.batch, opts);

  Tensor<float> total =
      add(gen.loss, scale(disc.loss, static_cast<float>(config_.disc_loss_weight)));
  finite_or_throw(static_cast<double>(total.item()), "total loss", step);

  optimizer_.zero_grad();
  backward(total);
  const double lr = linear_lr(step, config_.peak_lr, config_.warmup_steps, config_.steps);
  optimizer_.step(lr);
  step_ = step;

  PretrainMetrics m;
  m.step = step;
  m.mlm_loss = static_cast<double>(gen.loss.item());
  m.disc_loss = static_cast<double>(disc.loss.item());
  m.disc_acc = disc.accuracy;
  m.lr = lr;
  m.replaced_tokens = disc.replaced;
  m.loss_tokens = disc.total;
  m.skipped_sequences = masked.skipped;
  return m;
}

MlmModels::MlmModels(const EncoderConfig& config) : model(config), head(config) {}

void MlmModels::init(std::uint64_t seed) {
  model.init(derive_seed(seed, kGenInitTag));
  head.init(derive_seed(seed, kMlmInitTag));
}

NamedParams<float> MlmModels::trainable() {
  NamedParams<float> out = prefixed(model.params().all(), "model.");
  NamedParams<float> mlm = prefixed(head.params().all(), "mlm.");
  out.insert(out.end(), mlm.begin(), mlm.end());
  return out;
}

MlmTrainer::MlmTrainer(MlmModels& models, const Vocab& vocab,
                       std::vector<std::vector<std::int32_t>> sequences, PretrainConfig config)
    : models_(models),
      vocab_(vocab),
      sequences_(std::move(sequences)),
      config_(config),
      optimizer_(models.trainable()) {
  check_training_inputs(vocab_, models_.model.config(), sequences_, config_);
}

PretrainMetrics MlmTrainer::train_step() {
  const std::int64_t step = step_ + 1;
  if (step > config_.steps) {
    throw std::runtime_error("train_step: schedule exhausted after " +
                             std::to_string(config_.steps) + " steps");
  }
  Rng data_rng(derive_seed(config_.seed, kDataTag, static_cast<std::uint64_t>(step)));
  Rng mask_rng(derive_seed(config_.seed, kMaskTag, static_cast<std::uint64_t>(step)));
  Rng drop_rng(derive_seed(config_.seed, kDropTag, static_cast<std::uint64_t>(step)));

  MaskResult masked =
      make_masked_batch(sample_rows(sequences_, config_.batch_size, data_rng), vocab_,
                        config_.mask_fraction, mask_rng);
  if (masked.batch.batch == 0) {
    throw std::runtime_error("train_step: every sampled sequence lacked maskable positions");
  }

  ForwardOptions<float> opts;
  opts.training = true;
  opts.dropout_rng = &drop_rng;

  GeneratorOutput gen = generator_step(models_.model, models_.head,
                                       models_.model.params().get("embeddings.token"),
                                       masked.batch, opts);
  finite_or_throw(static_cast<double>(gen.loss.item()), "mlm loss", step);

  optimizer_.zero_grad();
  backward(gen.loss);
  const double lr = linear_lr(step, config_.peak_lr, config_.warmup_steps, config_.steps);
  optimizer_.step(lr);
  step_ = step;

  PretrainMetrics m;
  m.step = step;
  m.mlm_loss = static_cast<double>(gen.loss.item());
  m.disc_loss = std::numeric_limits<double>::quiet_NaN();
  m.disc_acc = std::numeric_limits<double>::quiet_NaN();
  m.lr = lr;
  m.loss_tokens = static_cast<std::int64_t>(gen.masked_flat.size());
  m.skipped_sequences = masked.skipped;
  return m;
}

namespace {

template <class StepFn>
HeldoutMetrics heldout_pass(const Vocab& vocab,
                            const std::vector<std::vector<std::int32_t>>& sequences,
                            const PretrainConfig& config, StepFn&& run_batch) {
  if (sequences.empty()) throw std::invalid_argument("evaluate_heldout: no sequences");
  Rng rng(derive_seed(config.seed, kEvalTag));
  HeldoutMetrics agg;
  double mlm_sum = 0.0, disc_sum = 0.0, acc_sum = 0.0;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < sequences.size(); start += bs) {
    const std::size_t stop = std::min(sequences.size(), start + bs);
    std::vector<std::vector<std::int32_t>> rows(sequences.begin() + static_cast<std::ptrdiff_t>(start),
                                                sequences.begin() + static_cast<std::ptrdiff_t>(stop));
    MaskResult masked = make_masked_batch(rows, vocab, config.mask_fraction, rng);
    if (masked.batch.batch == 0) continue;
    run_batch(masked.batch, rng, mlm_sum, disc_sum, acc_sum, agg);
  }
  if (agg.masked_tokens == 0) {
    throw std::runtime_error("evaluate_heldout: no maskable positions in the held-out set");
  }
  agg.mlm_loss = mlm_sum / static_cast<double>(agg.masked_tokens);
  if (agg.loss_tokens > 0) {
    agg.disc_loss = disc_sum / static_cast<double>(agg.loss_tokens);
    agg.disc_acc = acc_sum / static_cast<double>(agg.loss_tokens);
  } else {
    agg.disc_loss = std::numeric_limits<double>::quiet_NaN();
    agg.disc_acc = std::numeric_limits<double>::quiet_NaN();
  }
  return agg;
}

}  // namespace

HeldoutMetrics evaluate_heldout(RtdModels& models, const Vocab& vocab,
                                const std::vector<std::vector<std::int32_t>>& sequences,
                                const PretrainConfig& config) {
  return heldout_pass(vocab, sequences, config,
                      [&](RtdBatch& batch, Rng& rng, double& mlm_sum, double& disc_sum,
                          double& acc_sum, HeldoutMetrics& agg) {
                        ForwardOptions<float> opts;
                        GeneratorOutput gen = generator_step(
                            models.generator, models.mlm_head,
                            models.generator.params().get("embeddings.token"), batch, opts);
                        sample_replacements(batch, gen.masked_logits.values(),
                                            models.generator.config().vocab_size,
                                            config.temperature, rng);
                        DiscriminatorOutput disc = discriminator_step(models.discriminator,
                                                                      models.rtd_head, batch, opts);
                        const auto masked = static_cast<std::int64_t>(gen.masked_flat.size());
                        mlm_sum += static_cast<double>(gen.loss.item()) * static_cast<double>(masked);
                        disc_sum +=
                            static_cast<double>(disc.loss.item()) * static_cast<double>(disc.total);
                        acc_sum += disc.accuracy * static_cast<double>(disc.total);
                        agg.masked_tokens += masked;
                        agg.replaced_tokens += disc.replaced;
                        agg.loss_tokens += disc.total;
                      });
}

HeldoutMetrics evaluate_heldout(MlmModels& models, const Vocab& vocab,
                                const std::vector<std::vector<std::int32_t>>& sequences,
                                const PretrainConfig& config) {
  return heldout_pass(vocab, sequences, config,
                      [&](RtdBatch& batch, Rng&, double& mlm_sum, double&, double&,
                          HeldoutMetrics& agg) {
                        ForwardOptions<float> opts;
                        GeneratorOutput gen = generator_step(
                            models.model, models.head,
                            models.model.params().get("embeddings.token"), batch, opts);
                        const auto masked = static_cast<std::int64_t>(gen.masked_flat.size());
                        mlm_sum += static_cast<double>(gen.loss.item()) * static_cast<double>(masked);
                        agg.masked_tokens += masked;
                      });
}

}  // namespace rtdlab
