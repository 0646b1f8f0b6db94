#include "rtdlab/finetune/ner.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtdlab/core/adam.hpp"
#include "rtdlab/core/ops.hpp"
#include "rtdlab/core/rng.hpp"
#include "rtdlab/pretrain/schedule.hpp"
#include "loop.hpp"

namespace rtdlab {

NerFeature build_ner_feature(const NerExample& example, const WordPieceEncoder& encoder,
                             std::int32_t max_len) {
  if (max_len < 3) throw std::invalid_argument("build_ner_feature: max_len must be at least 3");
  if (example.words.size() != example.tags.size()) {
    throw std::invalid_argument("build_ner_feature: example " + example.id + " has " +
                                std::to_string(example.words.size()) + " words but " +
                                std::to_string(example.tags.size()) + " tags");
  }

  const Vocab& vocab = encoder.vocab();
  NerFeature f;
  f.example_id = example.id;
  f.word_first.assign(example.words.size(), -1);

  auto push = [&](std::int32_t id, std::uint8_t mask, std::int32_t tag) {
    f.ids.push_back(id);
    f.segments.push_back(0);
    f.attention_mask.push_back(mask);
    f.tag_ids.push_back(tag);
  };
  push(vocab.cls(), 1, -1);

  std::vector<std::int32_t> tags(example.tags.size());
  for (std::size_t w = 0; w < example.tags.size(); ++w) tags[w] = ner_tag_id(example.tags[w]);

  const std::size_t budget = static_cast<std::size_t>(max_len) - 1;  // room for [SEP]
  for (std::size_t w = 0; w < example.words.size(); ++w) {
    const std::int32_t tag = tags[w];
    const std::vector<TokenizedWord> toks = encoder.tokenize_words(example.words[w]);
    std::size_t pieces = 0;
    for (const auto& t : toks) pieces += t.pieces.size();
    if (pieces == 0) continue;  // word vanished in normalization
    if (f.ids.size() + pieces > budget) break;  // truncate here, rest stays -1
    f.word_first[w] = static_cast<std::int32_t>(f.ids.size());
    bool first = true;
    for (const auto& t : toks) {
      for (const auto& p : t.pieces) {
        push(p.id, 1, first ? tag : -1);
        first = false;
      }
    }
  }
  push(vocab.sep(), 1, -1);
  while (f.ids.size() < static_cast<std::size_t>(max_len)) push(vocab.pad(), 0, -1);
  return f;
}

namespace {

TokenBatch fill_batch(const std::vector<const NerFeature*>& feats) {
  TokenBatch batch;
  batch.batch = feats.size();
  batch.seq_len = feats.front()->ids.size();
  for (const NerFeature* f : feats) {
    batch.ids.insert(batch.ids.end(), f->ids.begin(), f->ids.end());
    batch.segments.insert(batch.segments.end(), f->segments.begin(), f->segments.end());
    batch.attention_mask.insert(batch.attention_mask.end(), f->attention_mask.begin(),
                                f->attention_mask.end());
  }
  return batch;
}

std::vector<NerFeature> build_all(const std::vector<NerExample>& examples,
                                  const WordPieceEncoder& encoder, std::int32_t max_len) {
  std::vector<NerFeature> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(build_ner_feature(ex, encoder, max_len));
  return out;
}

// word-level argmax tags per sentence; truncated words predict "O"
std::vector<std::vector<std::string>> predict_features(EncoderModel<float>& model,
                                                       TokenHead<float>& head,
                                                       const std::vector<NerFeature>& features,
                                                       std::int32_t batch_size) {
  const std::vector<std::string>& names = ner_tag_names();
  std::vector<std::vector<std::string>> out;
  out.reserve(features.size());
  const std::size_t chunk = static_cast<std::size_t>(batch_size);
  for (std::size_t off = 0; off < features.size(); off += chunk) {
    const std::size_t count = std::min(chunk, features.size() - off);
    std::vector<const NerFeature*> feats(count);
    for (std::size_t b = 0; b < count; ++b) feats[b] = &features[off + b];
    const std::size_t L = feats.front()->ids.size();
    Tensor<float> logits = head.forward(model.encode(fill_batch(feats)));
    const std::size_t tags = logits.dim(1);
    const auto& v = logits.values();
    for (std::size_t b = 0; b < count; ++b) {
      const NerFeature& f = *feats[b];
      std::vector<std::string> sentence(f.word_first.size(), "O");
      for (std::size_t w = 0; w < f.word_first.size(); ++w) {
        if (f.word_first[w] < 0) continue;
        const std::size_t row = b * L + static_cast<std::size_t>(f.word_first[w]);
        const auto begin = v.begin() + static_cast<std::ptrdiff_t>(row * tags);
        const std::size_t best = static_cast<std::size_t>(
            std::max_element(begin, begin + static_cast<std::ptrdiff_t>(tags)) - begin);
        sentence[w] = names[best];
      }
      out.push_back(std::move(sentence));
    }
  }
  return out;
}

}  // namespace

std::vector<NerEpochMetrics> finetune_ner(EncoderModel<float>& model, TokenHead<float>& head,
                                          const std::vector<NerExample>& train,
                                          const std::vector<NerExample>& dev,
                                          const WordPieceEncoder& encoder,
                                          const FinetuneConfig& config) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("finetune_ner: no training examples");
  const std::vector<NerFeature> train_feat = build_all(train, encoder, config.max_seq_len);
  const std::vector<NerFeature> dev_feat = build_all(dev, encoder, config.max_seq_len);
  const std::size_t len = train_feat.front().ids.size();
  const ftloop::StepPlan plan = ftloop::make_plan(train.size(), config);

  NamedParams<float> params = prefixed(model.params().all(), "model.");
  NamedParams<float> head_params = prefixed(head.params().all(), "head.");
  params.insert(params.end(), head_params.begin(), head_params.end());
  Adam<float> optimizer(params);

  std::vector<NerEpochMetrics> history;
  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::int32_t> order =
        ftloop::epoch_order(train.size(), config.seed, epoch);
    double loss_sum = 0.0;
    std::int64_t epoch_steps = 0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(config.batch_size)) {
      ++step;
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - off);
      std::vector<const NerFeature*> feats(count);
      std::vector<std::int32_t> targets;
      targets.reserve(count * len);
      for (std::size_t b = 0; b < count; ++b) {
        const NerFeature& f = train_feat[static_cast<std::size_t>(order[off + b])];
        feats[b] = &f;
        targets.insert(targets.end(), f.tag_ids.begin(), f.tag_ids.end());
      }

      Rng drop_rng(derive_seed(config.seed, ftloop::kDropTag, static_cast<std::uint64_t>(step)));
      ForwardOptions<float> opts;
      opts.training = true;
      opts.dropout_rng = &drop_rng;

      Tensor<float> logits = head.forward(model.encode(fill_batch(feats), opts));
      Tensor<float> loss = cross_entropy(logits, targets, -1);
      optimizer.zero_grad();
      backward(loss);
      optimizer.step(linear_lr(step, config.learning_rate, plan.warmup, plan.total));
      loss_sum += ftloop::checked_loss(static_cast<double>(loss.item()), step);
      ++epoch_steps;
    }

    NerEpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(epoch_steps);
    if (dev.empty()) {
      m.dev_token_accuracy = std::numeric_limits<double>::quiet_NaN();
      m.dev_entity_f1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      const std::vector<std::vector<std::string>> pred =
          predict_features(model, head, dev_feat, config.batch_size);
      std::size_t labeled = 0, hits = 0;
      std::vector<std::vector<std::string>> gold(dev.size());
      for (std::size_t i = 0; i < dev.size(); ++i) {
        gold[i] = dev[i].tags;
        for (std::size_t w = 0; w < dev[i].tags.size(); ++w) {
          if (dev_feat[i].word_first[w] < 0) continue;
          ++labeled;
          if (pred[i][w] == dev[i].tags[w]) ++hits;
        }
      }
      m.dev_token_accuracy =
          labeled == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : static_cast<double>(hits) / static_cast<double>(labeled);
      m.dev_entity_f1 = entity_f1(gold, pred).f1;
    }
    history.push_back(m);
  }
  return history;
}

std::vector<std::vector<std::string>> predict_ner(EncoderModel<float>& model,
                                                  TokenHead<float>& head,
                                                  const std::vector<NerExample>& examples,
                                                  const WordPieceEncoder& encoder,
                                                  const FinetuneConfig& config) {
  config.validate();
  if (examples.empty()) return {};
  return predict_features(model, head, build_all(examples, encoder, config.max_seq_len),
                          config.batch_size);
}

NerEval evaluate_ner(EncoderModel<float>& model, TokenHead<float>& head,
                     const std::vector<NerExample>& examples, const WordPieceEncoder& encoder,
                     const FinetuneConfig& config) {
  if (examples.empty()) throw std::invalid_argument("evaluate_ner: no examples");
  const std::vector<NerFeature> features = build_all(examples, encoder, config.max_seq_len);

  NerEval out;
  out.predictions = predict_features(model, head, features, config.batch_size);
  std::size_t labeled = 0, hits = 0;
  std::vector<std::vector<std::string>> gold(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    gold[i] = examples[i].tags;
    for (std::size_t w = 0; w < examples[i].tags.size(); ++w) {
      if (features[i].word_first[w] < 0) continue;
      ++labeled;
      if (out.predictions[i][w] == examples[i].tags[w]) ++hits;
    }
  }
  out.token_accuracy = labeled == 0 ? std::numeric_limits<double>::quiet_NaN()
                                    : static_cast<double>(hits) / static_cast<double>(labeled);
  out.entity = entity_f1(gold, out.predictions);
  return out;
}

}  // namespace rtdlab
