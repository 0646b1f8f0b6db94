#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtdlab/data/examples.hpp"
#include "rtdlab/eval/metrics.hpp"
#include "rtdlab/finetune/config.hpp"
#include "rtdlab/model/encoder.hpp"
#include "rtdlab/model/heads.hpp"
#include "rtdlab/tokenizer/wordpiece.hpp"

// Token tagging over IOB2 labels. Each word's first wordpiece carries its tag;
// continuation pieces, specials, and padding are excluded from the loss via
// the ignore index. Predictions are read back at first pieces; words that did
// not fit the window predict "O".

namespace rtdlab {

struct NerFeature {
  std::string example_id;
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> segments;
  std::vector<std::uint8_t> attention_mask;
  std::vector<std::int32_t> tag_ids;     // per position; -1 outside the loss
  std::vector<std::int32_t> word_first;  // per word: its first piece, -1 if truncated
};

// [CLS] pieces [SEP] padded to max_len; whole words are kept while they fit.
// Throws when words and tags disagree in length or a tag is unknown.
NerFeature build_ner_feature(const NerExample& example, const WordPieceEncoder& encoder,
                             std::int32_t max_len);

struct NerEpochMetrics {
  std::int64_t epoch = 0;
  double train_loss = 0.0;       // mean over the epoch's steps
  double dev_token_accuracy = 0.0;  // NaN when no dev examples were given
  double dev_entity_f1 = 0.0;
};

std::vector<NerEpochMetrics> finetune_ner(EncoderModel<float>& model, TokenHead<float>& head,
                                          const std::vector<NerExample>& train,
                                          const std::vector<NerExample>& dev,
                                          const WordPieceEncoder& encoder,
                                          const FinetuneConfig& config);

// Word-level tag predictions aligned with each example's words.
std::vector<std::vector<std::string>> predict_ner(EncoderModel<float>& model,
                                                  TokenHead<float>& head,
                                                  const std::vector<NerExample>& examples,
                                                  const WordPieceEncoder& encoder,
                                                  const FinetuneConfig& config);

struct NerEval {
  double token_accuracy = 0.0;  // over words whose first piece is in the window
  PrfMetrics entity;            // micro span F1 against the full gold tags
  std::vector<std::vector<std::string>> predictions;
};

NerEval evaluate_ner(EncoderModel<float>& model, TokenHead<float>& head,
                     const std::vector<NerExample>& examples, const WordPieceEncoder& encoder,
                     const FinetuneConfig& config);

}  // namespace rtdlab
