#pragma once

#include <cstdint>
#include <vector>

#include "rtdlab/data/examples.hpp"
#include "rtdlab/finetune/config.hpp"
#include "rtdlab/model/encoder.hpp"
#include "rtdlab/model/heads.hpp"
#include "rtdlab/tokenizer/wordpiece.hpp"

// Sequence classification: softmax cross-entropy on the linear head over the
// [CLS] hidden state. The class count comes from the head; labels outside its
// range throw.

namespace rtdlab {

struct ClsEpochMetrics {
  std::int64_t epoch = 0;
  double train_loss = 0.0;   // mean over the epoch's steps
  double dev_accuracy = 0.0;  // NaN when no dev examples were given
  double dev_macro_f1 = 0.0;
};

// [CLS] text [SEP] inputs truncated and padded to config.max_seq_len. Trains
// model and head in place over shuffled batches with linear warmup/decay.
std::vector<ClsEpochMetrics> finetune_classifier(EncoderModel<float>& model,
                                                 ClsHead<float>& head,
                                                 const std::vector<ClsExample>& train,
                                                 const std::vector<ClsExample>& dev,
                                                 const WordPieceEncoder& encoder,
                                                 const FinetuneConfig& config);

// Argmax labels, ties toward the smaller class index; aligned with `examples`.
std::vector<std::int32_t> predict_classifier(EncoderModel<float>& model, ClsHead<float>& head,
                                             const std::vector<ClsExample>& examples,
                                             const WordPieceEncoder& encoder,
                                             const FinetuneConfig& config);

struct ClsEval {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<std::int32_t> predictions;
};

ClsEval evaluate_classifier(EncoderModel<float>& model, ClsHead<float>& head,
                            const std::vector<ClsExample>& examples,
                            const WordPieceEncoder& encoder, const FinetuneConfig& config);

}  // namespace rtdlab
