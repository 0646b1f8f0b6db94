#include "rtdlab/finetune/classify.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtdlab/core/adam.hpp"
#include "rtdlab/core/ops.hpp"
#include "rtdlab/core/rng.hpp"
#include "rtdlab/eval/metrics.hpp"
#include "rtdlab/pretrain/schedule.hpp"
#include "loop.hpp"

namespace rtdlab {

namespace {

std::int32_t head_classes(ClsHead<float>& head) {
  return static_cast<std::int32_t>(head.params().get("weight").dim(1));
}

void check_labels(const std::vector<ClsExample>& examples, std::int32_t classes,
                  const char* who) {
  for (const auto& ex : examples) {
    if (ex.label < 0 || ex.label >= classes) {
      throw std::invalid_argument(std::string(who) + ": label " + std::to_string(ex.label) +
                                  " of example " + ex.id + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
}

std::vector<Encoding> encode_all(const std::vector<ClsExample>& examples,
                                 const WordPieceEncoder& encoder, std::int32_t max_len) {
  std::vector<Encoding> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back(encoder.encode(ex.text, static_cast<std::size_t>(max_len)));
  }
  return out;
}

TokenBatch fill_batch(const std::vector<const Encoding*>& rows) {
  TokenBatch batch;
  batch.batch = rows.size();
  batch.seq_len = rows.front()->ids.size();
  for (const Encoding* e : rows) {
    batch.ids.insert(batch.ids.end(), e->ids.begin(), e->ids.end());
    batch.segments.insert(batch.segments.end(), e->segments.begin(), e->segments.end());
    batch.attention_mask.insert(batch.attention_mask.end(), e->attention_mask.begin(),
                                e->attention_mask.end());
  }
  return batch;
}

// logits for one batch: encode, pick each row's [CLS] state, apply the head
Tensor<float> cls_logits(EncoderModel<float>& model, ClsHead<float>& head,
                         const std::vector<const Encoding*>& rows,
                         const ForwardOptions<float>& opts) {
  const std::size_t L = rows.front()->ids.size();
  Tensor<float> hidden = model.encode(fill_batch(rows), opts);
  std::vector<std::int32_t> cls_rows(rows.size());
  for (std::size_t b = 0; b < rows.size(); ++b) {
    cls_rows[b] = static_cast<std::int32_t>(b * L);
  }
  return head.forward(gather_rows(hidden, cls_rows));
}

std::vector<std::int32_t> predict_encoded(EncoderModel<float>& model, ClsHead<float>& head,
                                          const std::vector<Encoding>& encodings,
                                          std::int32_t batch_size) {
  std::vector<std::int32_t> out;
  out.reserve(encodings.size());
  const std::size_t chunk = static_cast<std::size_t>(batch_size);
  for (std::size_t off = 0; off < encodings.size(); off += chunk) {
    const std::size_t count = std::min(chunk, encodings.size() - off);
    std::vector<const Encoding*> rows(count);
    for (std::size_t b = 0; b < count; ++b) rows[b] = &encodings[off + b];
    Tensor<float> logits = cls_logits(model, head, rows, {});
    const std::size_t classes = logits.dim(1);
    const auto& v = logits.values();
    for (std::size_t b = 0; b < count; ++b) {
      const auto row = v.begin() + static_cast<std::ptrdiff_t>(b * classes);
      out.push_back(static_cast<std::int32_t>(
          std::max_element(row, row + static_cast<std::ptrdiff_t>(classes)) - row));
    }
  }
  return out;
}

}  // namespace

std::vector<ClsEpochMetrics> finetune_classifier(EncoderModel<float>& model,
                                                 ClsHead<float>& head,
                                                 const std::vector<ClsExample>& train,
                                                 const std::vector<ClsExample>& dev,
                                                 const WordPieceEncoder& encoder,
                                                 const FinetuneConfig& config) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("finetune_classifier: no training examples");
  const std::int32_t classes = head_classes(head);
  check_labels(train, classes, "finetune_classifier");
  check_labels(dev, classes, "finetune_classifier");

  const std::vector<Encoding> train_enc = encode_all(train, encoder, config.max_seq_len);
  const std::vector<Encoding> dev_enc = encode_all(dev, encoder, config.max_seq_len);
  const ftloop::StepPlan plan = ftloop::make_plan(train.size(), config);

  NamedParams<float> params = prefixed(model.params().all(), "model.");
  NamedParams<float> head_params = prefixed(head.params().all(), "head.");
  params.insert(params.end(), head_params.begin(), head_params.end());
  Adam<float> optimizer(params);

  std::vector<ClsEpochMetrics> history;
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
      std::vector<const Encoding*> rows(count);
      std::vector<std::int32_t> labels(count);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t idx = static_cast<std::size_t>(order[off + b]);
        rows[b] = &train_enc[idx];
        labels[b] = train[idx].label;
      }

      Rng drop_rng(derive_seed(config.seed, ftloop::kDropTag, static_cast<std::uint64_t>(step)));
      ForwardOptions<float> opts;
      opts.training = true;
      opts.dropout_rng = &drop_rng;

      Tensor<float> loss = cross_entropy(cls_logits(model, head, rows, opts), labels);
      optimizer.zero_grad();
      backward(loss);
      optimizer.step(linear_lr(step, config.learning_rate, plan.warmup, plan.total));
      loss_sum += ftloop::checked_loss(static_cast<double>(loss.item()), step);
      ++epoch_steps;
    }

    ClsEpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(epoch_steps);
    if (dev.empty()) {
      m.dev_accuracy = std::numeric_limits<double>::quiet_NaN();
      m.dev_macro_f1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      const std::vector<std::int32_t> pred =
          predict_encoded(model, head, dev_enc, config.batch_size);
      std::vector<std::int32_t> gold(dev.size());
      std::size_t hits = 0;
      for (std::size_t i = 0; i < dev.size(); ++i) {
        gold[i] = dev[i].label;
        if (pred[i] == gold[i]) ++hits;
      }
      m.dev_accuracy = static_cast<double>(hits) / static_cast<double>(dev.size());
      m.dev_macro_f1 = macro_f1(gold, pred, classes);
    }
    history.push_back(m);
  }
  return history;
}

std::vector<std::int32_t> predict_classifier(EncoderModel<float>& model, ClsHead<float>& head,
                                             const std::vector<ClsExample>& examples,
                                             const WordPieceEncoder& encoder,
                                             const FinetuneConfig& config) {
  config.validate();
  if (examples.empty()) return {};
  return predict_encoded(model, head, encode_all(examples, encoder, config.max_seq_len),
                         config.batch_size);
}

ClsEval evaluate_classifier(EncoderModel<float>& model, ClsHead<float>& head,
                            const std::vector<ClsExample>& examples,
                            const WordPieceEncoder& encoder, const FinetuneConfig& config) {
  if (examples.empty()) {
    throw std::invalid_argument("evaluate_classifier: no examples");
  }
  const std::int32_t classes = head_classes(head);
  check_labels(examples, classes, "evaluate_classifier");

  ClsEval out;
  out.predictions = predict_classifier(model, head, examples, encoder, config);
  std::vector<std::int32_t> gold(examples.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    gold[i] = examples[i].label;
    if (out.predictions[i] == gold[i]) ++hits;
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(examples.size());
  out.macro_f1 = macro_f1(gold, out.predictions, classes);
  out.weighted_f1 = weighted_f1(gold, out.predictions, classes);
  return out;
}

}  // namespace rtdlab
