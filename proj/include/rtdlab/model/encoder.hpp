#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtdlab/core/adam.hpp"
#include "rtdlab/core/ops.hpp"
#include "rtdlab/core/rng.hpp"
#include "rtdlab/core/tensor.hpp"
#include "rtdlab/model/config.hpp"

namespace rtdlab {

// One batch of id sequences, row-major [batch, seq_len]. attention_mask is 1
// at real tokens and 0 exactly at [PAD].
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> segments;
  std::vector<std::uint8_t> attention_mask;
};

template <class S>
struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training and dropout > 0
  // when set, receives one [batch*heads, seq, seq] probability tensor per layer
  std::vector<Tensor<S>>* attention_probs = nullptr;
};

inline std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Named parameter storage shared by models and heads: tensors created from
// specs, initialized from per-name derived streams so results do not depend
// on enumeration order, and re-bindable for weight tying.
template <class S>
class ParamStore {
 public:
  void create(const std::vector<ParamSpec>& specs) {
    for (const auto& spec : specs) {
      if (index_.count(spec.name)) {
        throw std::invalid_argument("ParamStore: duplicate parameter " + spec.name);
      }
      Tensor<S> t = Tensor<S>::zeros(spec.shape);
      t.set_requires_grad(true);
      index_.emplace(spec.name, params_.size());
      params_.push_back({spec.name, std::move(t)});
      specs_.push_back(spec);
    }
  }

  // Truncated normal (0, 0.02) clipped at 2 sigma for weights, zeros for
  // biases, ones for normalization gains; stream derived from (seed, name).
  void init(std::uint64_t seed) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<S>& t = params_[i].tensor;
      switch (specs_[i].init) {
        case ParamSpec::Init::zeros:
          std::fill(t.values().begin(), t.values().end(), S(0));
          break;
        case ParamSpec::Init::ones:
          std::fill(t.values().begin(), t.values().end(), S(1));
          break;
        case ParamSpec::Init::normal: {
          Rng rng(derive_seed(seed, name_hash(params_[i].name)));
          for (auto& v : t.values()) v = static_cast<S>(rng.truncated_normal(0.02, 2.0));
          break;
        }
      }
    }
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<S>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
    return params_[it->second].tensor;
  }
  const Tensor<S>& get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
  }

  // Replace the named tensor with another model's storage (weight tying).
  void bind(const std::string& name, const Tensor<S>& shared) {
    Tensor<S>& mine = get(name);
    if (mine.shape() != shared.shape()) {
      throw std::invalid_argument("ParamStore: cannot tie " + name + ": shape " +
                                  shape_str(mine.shape()) + " vs " + shape_str(shared.shape()));
    }
    mine = shared;
  }

  NamedParams<S>& all() { return params_; }
  const NamedParams<S>& all() const { return params_; }

 private:
  NamedParams<S> params_;
  std::vector<ParamSpec> specs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Bidirectional transformer encoder, post-layer-norm ordering. Forward
// returns the final hidden states flattened to [batch*seq_len, hidden].
template <class S>
class EncoderModel {
 public:
  static constexpr S kLayerNormEps = S(1e-12);

  explicit EncoderModel(EncoderConfig config) : config_(config) {
    config_.validate();
    store_.create(encoder_param_specs(config_));
  }

  const EncoderConfig& config() const { return config_; }
  ParamStore<S>& params() { return store_; }
  const ParamStore<S>& params() const { return store_; }

  void init(std::uint64_t seed) { store_.init(seed); }

  // Borrow embedding tables from a host model (generator/discriminator
  // sharing). `token` ties the token table; `all` also ties position and
  // segment tables.
  void share_embeddings_from(EncoderModel& host, EmbeddingSharing which) {
    if (which == EmbeddingSharing::none) return;
    store_.bind("embeddings.token", host.params().get("embeddings.token"));
    if (which == EmbeddingSharing::all) {
      store_.bind("embeddings.position", host.params().get("embeddings.position"));
      store_.bind("embeddings.segment", host.params().get("embeddings.segment"));
    }
  }

  Tensor<S> encode(const TokenBatch& batch, const ForwardOptions<S>& opts = {}) {
    validate_batch(batch);
    const auto B = batch.batch;
    const auto L = batch.seq_len;
    const auto H = static_cast<std::size_t>(config_.hidden_size);
    const auto nh = static_cast<std::size_t>(config_.num_heads);
    const auto dh = H / nh;

    std::vector<std::int32_t> pos_ids(B * L), seg_ids(batch.segments);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < L; ++i) pos_ids[b * L + i] = static_cast<std::int32_t>(i);
    }

    Tensor<S> x = rtdlab::add(
        rtdlab::add(gather_rows(store_.get("embeddings.token"), batch.ids),
                    gather_rows(store_.get("embeddings.position"), pos_ids)),
        gather_rows(store_.get("embeddings.segment"), seg_ids));
    x = layer_norm(x, store_.get("embeddings.norm.gain"), store_.get("embeddings.norm.bias"),
                   kLayerNormEps);
    x = apply_dropout(x, opts);
    if (config_.needs_projection()) {
      x = linear(x, store_.get("embeddings.proj.weight"), store_.get("embeddings.proj.bias"));
    }

    // per-(batch,head) key mask, repeated head-wise
    std::vector<std::uint8_t> key_mask(B * nh * L);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < nh; ++h) {
        std::copy(batch.attention_mask.begin() + static_cast<std::ptrdiff_t>(b * L),
                  batch.attention_mask.begin() + static_cast<std::ptrdiff_t>((b + 1) * L),
                  key_mask.begin() + static_cast<std::ptrdiff_t>((b * nh + h) * L));
      }
    }

    for (std::int32_t layer = 0; layer < config_.num_layers; ++layer) {
      const std::string p = "layers." + std::to_string(layer) + ".";
      auto split_heads = [&](Tensor<S> t) {
        t = rtdlab::reshape(t, {B, L, nh, dh});
        t = rtdlab::transpose(t, 1, 2);
        return rtdlab::reshape(t, {B * nh, L, dh});
      };
      Tensor<S> q = split_heads(
          linear(x, store_.get(p + "attn.query.weight"), store_.get(p + "attn.query.bias")));
      Tensor<S> k = split_heads(
          linear(x, store_.get(p + "attn.key.weight"), store_.get(p + "attn.key.bias")));
      Tensor<S> v = split_heads(
          linear(x, store_.get(p + "attn.value.weight"), store_.get(p + "attn.value.bias")));

      Tensor<S> scores = rtdlab::scale(rtdlab::matmul(q, rtdlab::transpose(k, 1, 2)),
                                       static_cast<S>(1.0 / std::sqrt(double(dh))));
      Tensor<S> probs = masked_softmax(scores, key_mask);
      if (opts.attention_probs) opts.attention_probs->push_back(probs);
      probs = apply_dropout(probs, opts);

      Tensor<S> ctx = rtdlab::matmul(probs, v);  // [B*nh, L, dh]
      ctx = rtdlab::reshape(ctx, {B, nh, L, dh});
      ctx = rtdlab::transpose(ctx, 1, 2);
      ctx = rtdlab::reshape(ctx, {B * L, H});
      Tensor<S> attn_out =
          linear(ctx, store_.get(p + "attn.output.weight"), store_.get(p + "attn.output.bias"));
      attn_out = apply_dropout(attn_out, opts);
      x = layer_norm(rtdlab::add(x, attn_out), store_.get(p + "attn.norm.gain"),
                     store_.get(p + "attn.norm.bias"), kLayerNormEps);

      Tensor<S> inner = rtdlab::gelu(
          linear(x, store_.get(p + "ffn.inner.weight"), store_.get(p + "ffn.inner.bias")));
      Tensor<S> ffn_out =
          linear(inner, store_.get(p + "ffn.output.weight"), store_.get(p + "ffn.output.bias"));
      ffn_out = apply_dropout(ffn_out, opts);
      x = layer_norm(rtdlab::add(x, ffn_out), store_.get(p + "ffn.norm.gain"),
                     store_.get(p + "ffn.norm.bias"), kLayerNormEps);
    }
    return x;  // [B*L, H]
  }

 private:
  void validate_batch(const TokenBatch& batch) const {
    const std::size_t n = batch.batch * batch.seq_len;
    if (batch.batch == 0 || batch.seq_len == 0) {
      throw std::invalid_argument("encode: empty batch");
    }
    if (batch.seq_len > static_cast<std::size_t>(config_.max_positions)) {
      throw std::invalid_argument("encode: seq_len " + std::to_string(batch.seq_len) +
                                  " exceeds max_positions " +
                                  std::to_string(config_.max_positions));
    }
    if (batch.ids.size() != n || batch.segments.size() != n ||
        batch.attention_mask.size() != n) {
      throw std::invalid_argument("encode: ids/segments/mask must all have batch*seq_len entries");
    }
    for (std::int32_t id : batch.ids) {
      if (id < 0 || id >= config_.vocab_size) {
        throw std::invalid_argument("encode: token id " + std::to_string(id) +
                                    " outside vocab of size " +
                                    std::to_string(config_.vocab_size));
      }
    }
    for (std::int32_t s : batch.segments) {
      if (s < 0 || s > 1) {
        throw std::invalid_argument("encode: segment ids must be 0 or 1");
      }
    }
  }

  Tensor<S> apply_dropout(Tensor<S> t, const ForwardOptions<S>& opts) {
    if (!opts.training || config_.dropout <= 0.0) return t;
    if (opts.dropout_rng == nullptr) {
      throw std::invalid_argument("encode: training forward needs a dropout rng");
    }
    return dropout(t, config_.dropout, opts.dropout_rng);
  }

  EncoderConfig config_;
  ParamStore<S> store_;
};

// Prefix every parameter name; used to register several models in one
// optimizer without collisions.
template <class S>
NamedParams<S> prefixed(const NamedParams<S>& params, const std::string& prefix) {
  NamedParams<S> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({prefix + p.name, p.tensor});
  return out;
}

}  // namespace rtdlab
