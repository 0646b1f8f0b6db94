#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtdlab/data/examples.hpp"
#include "rtdlab/finetune/config.hpp"
#include "rtdlab/model/encoder.hpp"
#include "rtdlab/model/heads.hpp"
#include "rtdlab/tokenizer/wordpiece.hpp"

// Extractive question answering: sliding-window features over the context,
// span training against gold character offsets, and exhaustive span decoding
// back to context text.

namespace rtdlab {

// One window over an example's context: [CLS] question [SEP] window [SEP].
struct QaFeature {
  std::string example_id;
  std::string context;  // original text, for answer recovery
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> segments;
  std::vector<std::uint8_t> attention_mask;
  // per-position code-point offsets into context; -1 outside the window
  std::vector<std::int32_t> char_begin;
  std::vector<std::int32_t> char_end;
  std::int32_t context_first = 0;  // inclusive position range of context tokens
  std::int32_t context_last = -1;  // -1 when the window holds no context
  std::int32_t start_position = 0;  // gold span in window coordinates; 0 = [CLS]
  std::int32_t end_position = 0;
};

// Windows advance by `stride` context tokens until the last one reaches the
// end. With gold answers the first answer is mapped to token positions;
// windows not containing it fully target [CLS]. Returns an empty list when
// the gold answer text does not occur at its claimed offset (dirty row) or
// when the answer survives normalization with no covering tokens. Throws when
// the question leaves no room for context tokens.
std::vector<QaFeature> build_qa_features(const QaExample& example,
                                         const WordPieceEncoder& encoder,
                                         std::int32_t max_len = 384, std::int32_t stride = 128);

struct QaDataset {
  std::vector<QaFeature> features;
  QualityReport report;  // dirty examples are dropped and counted, never kept
};

QaDataset build_qa_dataset(const std::vector<QaExample>& examples,
                           const WordPieceEncoder& encoder, std::int32_t max_len = 384,
                           std::int32_t stride = 128);

struct SpanCandidate {
  double score = 0.0;
  std::int32_t start = 0;  // window positions; (0, 0) is the [CLS] candidate
  std::int32_t end = 0;
  std::string text;
};

struct SpanPrediction {
  std::string text;  // empty for the [CLS] / no-answer candidate
  double score = 0.0;
  std::vector<SpanCandidate> candidates;  // at most n_best, best first
};

// Exhaustive search over context positions i <= j with j - i < max_answer_len,
// scored start_logits[i] + end_logits[j], against the [CLS] no-answer score.
// Ties break toward the earlier, then shorter span.
SpanPrediction predict_span(const std::vector<float>& start_logits,
                            const std::vector<float>& end_logits, const QaFeature& feature,
                            std::int32_t max_answer_len = 30, std::int32_t n_best = 20);

struct QaPrediction {
  std::string example_id;
  std::string text;
  double score = 0.0;
};

struct QaEpochMetrics {
  std::int64_t epoch = 0;
  double train_loss = 0.0;  // mean over the epoch's steps
  double dev_em = 0.0;      // NaN when no dev examples were given
  double dev_f1 = 0.0;
};

// Joint start/end cross-entropy over shuffled feature batches with linear
// warmup/decay. Trains model and head in place.
std::vector<QaEpochMetrics> finetune_qa(EncoderModel<float>& model, SpanHead<float>& head,
                                        const std::vector<QaFeature>& train,
                                        const std::vector<QaExample>& dev,
                                        const WordPieceEncoder& encoder,
                                        const FinetuneConfig& config);

// Best answer per example: highest span score across the example's windows.
std::vector<QaPrediction> predict_qa(EncoderModel<float>& model, SpanHead<float>& head,
                                     const std::vector<QaFeature>& features,
                                     const FinetuneConfig& config);

struct QaEval {
  double em = 0.0;
  double f1 = 0.0;
  std::vector<QaPrediction> predictions;
};

QaEval evaluate_qa(EncoderModel<float>& model, SpanHead<float>& head,
                   const std::vector<QaExample>& examples, const WordPieceEncoder& encoder,
                   const FinetuneConfig& config);

}  // namespace rtdlab
