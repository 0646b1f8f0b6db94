#include "rtdlab/finetune/qa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rtdlab/core/adam.hpp"
#include "rtdlab/core/ops.hpp"
#include "rtdlab/core/rng.hpp"
#include "rtdlab/eval/metrics.hpp"
#include "rtdlab/pretrain/schedule.hpp"
#include "loop.hpp"

namespace rtdlab {

namespace {

struct FlatPiece {
  std::int32_t id;
  std::int32_t start;  // source code-point offsets
  std::int32_t end;
};

std::vector<FlatPiece> flatten(const std::vector<TokenizedWord>& words) {
  std::vector<FlatPiece> out;
  for (const auto& w : words) {
    for (const auto& p : w.pieces) out.push_back({p.id, p.start, p.end});
  }
  return out;
}

}  // namespace

std::vector<QaFeature> build_qa_features(const QaExample& example,
                                         const WordPieceEncoder& encoder, std::int32_t max_len,
                                         std::int32_t stride) {
  if (max_len < 4) throw std::invalid_argument("build_qa_features: max_len must be at least 4");
  if (stride < 1) throw std::invalid_argument("build_qa_features: stride must be positive");

  const std::vector<FlatPiece> question = flatten(encoder.tokenize_words(example.question));
  const std::vector<FlatPiece> context = flatten(encoder.tokenize_words(example.context));
  const std::int64_t avail =
      static_cast<std::int64_t>(max_len) - static_cast<std::int64_t>(question.size()) - 3;
  if (avail < 1) {
    throw std::invalid_argument("build_qa_features: question of " +
                                std::to_string(question.size()) +
                                " pieces leaves no context room at max_len " +
                                std::to_string(max_len));
  }
  const std::int32_t n = static_cast<std::int32_t>(context.size());
  if (n > avail && stride > avail) {
    throw std::invalid_argument("build_qa_features: stride " + std::to_string(stride) +
                                " exceeds the window capacity of " + std::to_string(avail) +
                                " context tokens, leaving gaps");
  }

  // Map the first gold answer to the context pieces that overlap its
  // character range. A claimed offset that does not reproduce the answer
  // text marks the row as dirty.
  bool has_gold = !example.answers.empty();
  std::int32_t ans_first = -1, ans_last = -1;
  if (has_gold) {
    const QaAnswer& gold = example.answers.front();
    const std::int64_t cs64 = gold.char_start;
    const std::int64_t ce64 = cs64 + static_cast<std::int64_t>(decode_utf8(gold.text).size());
    if (cs64 < 0 || gold.text.empty() ||
        ce64 > static_cast<std::int64_t>(std::numeric_limits<std::int32_t>::max())) {
      return {};
    }
    const std::int32_t cs = static_cast<std::int32_t>(cs64);
    const std::int32_t ce = static_cast<std::int32_t>(ce64);
    if (cp_substr(example.context, cs, ce) != gold.text) return {};
    for (std::int32_t i = 0; i < n; ++i) {
      if (context[i].end > cs && context[i].start < ce) {
        if (ans_first < 0) ans_first = i;
        ans_last = i;
      }
    }
    if (ans_first < 0) return {};  // answer erased by normalization
  }

  const Vocab& vocab = encoder.vocab();
  const std::int32_t q_len = static_cast<std::int32_t>(question.size());
  std::vector<QaFeature> features;
  std::int32_t ws = 0;
  while (true) {
    const std::int32_t we =
        static_cast<std::int32_t>(std::min<std::int64_t>(ws + avail, n));
    QaFeature f;
    f.example_id = example.id;
    f.context = example.context;
    f.ids.reserve(static_cast<std::size_t>(max_len));
    auto push = [&](std::int32_t id, std::int32_t seg, std::uint8_t mask, std::int32_t cb,
                    std::int32_t ce2) {
      f.ids.push_back(id);
      f.segments.push_back(seg);
      f.attention_mask.push_back(mask);
      f.char_begin.push_back(cb);
      f.char_end.push_back(ce2);
    };
    push(vocab.cls(), 0, 1, -1, -1);
    for (const auto& p : question) push(p.id, 0, 1, -1, -1);
    push(vocab.sep(), 0, 1, -1, -1);
    f.context_first = 2 + q_len;
    f.context_last = we > ws ? f.context_first + (we - ws) - 1 : -1;
    for (std::int32_t k = ws; k < we; ++k) {
      push(context[static_cast<std::size_t>(k)].id, 1, 1,
           context[static_cast<std::size_t>(k)].start, context[static_cast<std::size_t>(k)].end);
    }
    push(vocab.sep(), 1, 1, -1, -1);
    while (f.ids.size() < static_cast<std::size_t>(max_len)) push(vocab.pad(), 0, 0, -1, -1);
    if (has_gold && ans_first >= ws && ans_last < we) {
      f.start_position = f.context_first + (ans_first - ws);
      f.end_position = f.context_first + (ans_last - ws);
    }
    features.push_back(std::move(f));
    if (we >= n) break;
    ws += stride;
  }
  return features;
}

QaDataset build_qa_dataset(const std::vector<QaExample>& examples,
                           const WordPieceEncoder& encoder, std::int32_t max_len,
                           std::int32_t stride) {
  QaDataset out;
  out.report.total = examples.size();
  for (const auto& example : examples) {
    std::vector<QaFeature> feats = build_qa_features(example, encoder, max_len, stride);
    if (feats.empty()) {
      ++out.report.dropped;
      out.report.notes.push_back("dropped " + example.id + ": gold answer not recoverable");
      continue;
    }
    ++out.report.kept;
    for (auto& f : feats) out.features.push_back(std::move(f));
  }
  return out;
}

SpanPrediction predict_span(const std::vector<float>& start_logits,
                            const std::vector<float>& end_logits, const QaFeature& feature,
                            std::int32_t max_answer_len, std::int32_t n_best) {
  const std::size_t len = feature.ids.size();
  if (start_logits.size() != len || end_logits.size() != len) {
    throw std::invalid_argument("predict_span: logits must match the feature length");
  }
  if (max_answer_len < 1) throw std::invalid_argument("predict_span: max_answer_len must be positive");
  if (n_best < 1) throw std::invalid_argument("predict_span: n_best must be positive");

  struct Raw {
    double score;
    std::int32_t start;
    std::int32_t end;
  };
  std::vector<Raw> raws;
  raws.push_back({static_cast<double>(start_logits[0]) + static_cast<double>(end_logits[0]), 0, 0});
  for (std::int32_t i = feature.context_first; i >= 0 && i <= feature.context_last; ++i) {
    const std::int32_t j_max = std::min(feature.context_last, i + max_answer_len - 1);
    for (std::int32_t j = i; j <= j_max; ++j) {
      raws.push_back({static_cast<double>(start_logits[static_cast<std::size_t>(i)]) +
                          static_cast<double>(end_logits[static_cast<std::size_t>(j)]),
                      i, j});
    }
  }
  auto better = [](const Raw& a, const Raw& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  };
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(n_best), raws.size());
  std::partial_sort(raws.begin(), raws.begin() + static_cast<std::ptrdiff_t>(keep), raws.end(),
                    better);

  SpanPrediction out;
  for (std::size_t k = 0; k < keep; ++k) {
    SpanCandidate c;
    c.score = raws[k].score;
    c.start = raws[k].start;
    c.end = raws[k].end;
    if (c.start != 0 || c.end != 0) {
      c.text = cp_substr(feature.context, feature.char_begin[static_cast<std::size_t>(c.start)],
                         feature.char_end[static_cast<std::size_t>(c.end)]);
    }
    out.candidates.push_back(std::move(c));
  }
  out.text = out.candidates.front().text;
  out.score = out.candidates.front().score;
  return out;
}

namespace {

TokenBatch fill_batch(const std::vector<const QaFeature*>& feats) {
  TokenBatch batch;
  batch.batch = feats.size();
  batch.seq_len = feats.front()->ids.size();
  batch.ids.reserve(batch.batch * batch.seq_len);
  for (const QaFeature* f : feats) {
    batch.ids.insert(batch.ids.end(), f->ids.begin(), f->ids.end());
    batch.segments.insert(batch.segments.end(), f->segments.begin(), f->segments.end());
    batch.attention_mask.insert(batch.attention_mask.end(), f->attention_mask.begin(),
                                f->attention_mask.end());
  }
  return batch;
}

std::size_t checked_feature_len(const std::vector<QaFeature>& features, const char* who) {
  const std::size_t len = features.front().ids.size();
  for (const auto& f : features) {
    if (f.ids.size() != len) {
      throw std::invalid_argument(std::string(who) + ": features have mixed lengths");
    }
  }
  return len;
}

struct ScorePair {
  double em = std::numeric_limits<double>::quiet_NaN();
  double f1 = std::numeric_limits<double>::quiet_NaN();
};

ScorePair score_predictions(const std::vector<QaPrediction>& predictions,
                            const std::vector<QaExample>& examples) {
  std::unordered_map<std::string, const QaExample*> by_id;
  for (const auto& ex : examples) by_id.emplace(ex.id, &ex);
  double em = 0.0, f1 = 0.0;
  std::size_t scored = 0;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.example_id);
    if (it == by_id.end() || it->second->answers.empty()) continue;
    std::vector<std::string> golds;
    golds.reserve(it->second->answers.size());
    for (const auto& a : it->second->answers) golds.push_back(a.text);
    em += squad_em(p.text, golds);
    f1 += squad_f1(p.text, golds);
    ++scored;
  }
  if (scored == 0) return {};
  return {em / static_cast<double>(scored), f1 / static_cast<double>(scored)};
}

}  // namespace

std::vector<QaPrediction> predict_qa(EncoderModel<float>& model, SpanHead<float>& head,
                                     const std::vector<QaFeature>& features,
                                     const FinetuneConfig& config) {
  config.validate();
  if (features.empty()) return {};
  const std::size_t len = checked_feature_len(features, "predict_qa");

  std::vector<QaPrediction> out;
  std::unordered_map<std::string, std::size_t> slot;
  const std::size_t chunk = static_cast<std::size_t>(config.batch_size);
  for (std::size_t off = 0; off < features.size(); off += chunk) {
    const std::size_t count = std::min(chunk, features.size() - off);
    std::vector<const QaFeature*> feats(count);
    for (std::size_t b = 0; b < count; ++b) feats[b] = &features[off + b];
    Tensor<float> logits = head.forward(model.encode(fill_batch(feats)));
    const auto& v = logits.values();
    for (std::size_t b = 0; b < count; ++b) {
      std::vector<float> starts(len), ends(len);
      for (std::size_t i = 0; i < len; ++i) {
        starts[i] = v[(b * len + i) * 2];
        ends[i] = v[(b * len + i) * 2 + 1];
      }
      SpanPrediction sp =
          predict_span(starts, ends, *feats[b], config.max_answer_len, config.n_best);
      auto it = slot.find(feats[b]->example_id);
      if (it == slot.end()) {
        slot.emplace(feats[b]->example_id, out.size());
        out.push_back({feats[b]->example_id, sp.text, sp.score});
      } else if (sp.score > out[it->second].score) {
        out[it->second].text = sp.text;
        out[it->second].score = sp.score;
      }
    }
  }
  return out;
}

std::vector<QaEpochMetrics> finetune_qa(EncoderModel<float>& model, SpanHead<float>& head,
                                        const std::vector<QaFeature>& train,
                                        const std::vector<QaExample>& dev,
                                        const WordPieceEncoder& encoder,
                                        const FinetuneConfig& config) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("finetune_qa: no training features");
  const std::size_t len = checked_feature_len(train, "finetune_qa");
  const ftloop::StepPlan plan = ftloop::make_plan(train.size(), config);

  NamedParams<float> params = prefixed(model.params().all(), "model.");
  NamedParams<float> head_params = prefixed(head.params().all(), "head.");
  params.insert(params.end(), head_params.begin(), head_params.end());
  Adam<float> optimizer(params);

  QaDataset devset;
  if (!dev.empty()) {
    devset = build_qa_dataset(dev, encoder, config.max_seq_len, config.doc_stride);
  }

  std::vector<QaEpochMetrics> history;
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
      std::vector<const QaFeature*> feats(count);
      std::vector<std::int32_t> targets(count * 2);
      for (std::size_t b = 0; b < count; ++b) {
        const QaFeature& f = train[static_cast<std::size_t>(order[off + b])];
        feats[b] = &f;
        targets[b * 2] = f.start_position;
        targets[b * 2 + 1] = f.end_position;
      }

      Rng drop_rng(derive_seed(config.seed, ftloop::kDropTag, static_cast<std::uint64_t>(step)));
      ForwardOptions<float> opts;
      opts.training = true;
      opts.dropout_rng = &drop_rng;

      Tensor<float> logits = head.forward(model.encode(fill_batch(feats), opts));
      logits = reshape(logits, {count, len, 2});
      logits = transpose(logits, 1, 2);
      logits = reshape(logits, {count * 2, len});
      Tensor<float> loss = cross_entropy(logits, targets);

      optimizer.zero_grad();
      backward(loss);
      optimizer.step(linear_lr(step, config.learning_rate, plan.warmup, plan.total));
      loss_sum += ftloop::checked_loss(static_cast<double>(loss.item()), step);
      ++epoch_steps;
    }

    QaEpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(epoch_steps);
    if (devset.features.empty()) {
      m.dev_em = std::numeric_limits<double>::quiet_NaN();
      m.dev_f1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      const ScorePair s = score_predictions(predict_qa(model, head, devset.features, config), dev);
      m.dev_em = s.em;
      m.dev_f1 = s.f1;
    }
    history.push_back(m);
  }
  return history;
}

QaEval evaluate_qa(EncoderModel<float>& model, SpanHead<float>& head,
                   const std::vector<QaExample>& examples, const WordPieceEncoder& encoder,
                   const FinetuneConfig& config) {
  config.validate();
  QaEval out;
  QaDataset ds = build_qa_dataset(examples, encoder, config.max_seq_len, config.doc_stride);
  out.predictions = predict_qa(model, head, ds.features, config);
  const ScorePair s = score_predictions(out.predictions, examples);
  out.em = s.em;
  out.f1 = s.f1;
  return out;
}

}  // namespace rtdlab
