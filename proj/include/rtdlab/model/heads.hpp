#pragma once

#include <cstdint>
#include <string>

#include "rtdlab/core/ops.hpp"
#include "rtdlab/model/config.hpp"
#include "rtdlab/model/encoder.hpp"

// Prediction heads over encoder hidden states [N, hidden]. Each owns its
// parameters in a ParamStore; the MLM head's output matrix is the tied token
// embedding table, passed in at forward time.

namespace rtdlab {

// hidden -> embedding-space transform (dense + gelu + layer norm), then
// logits against the transposed token table plus a per-token output bias.
template <class S>
class MlmHead {
 public:
  explicit MlmHead(const EncoderConfig& config) {
    store_.create(head_param_specs({HeadSpec::Kind::mlm}, config, ""));
  }

  void init(std::uint64_t seed) { store_.init(seed); }
  ParamStore<S>& params() { return store_; }

  // hidden [N, H], token_table [V, E] -> logits [N, V]
  Tensor<S> forward(const Tensor<S>& hidden, const Tensor<S>& token_table) {
    Tensor<S> t = rtdlab::gelu(
        linear(hidden, store_.get("transform.weight"), store_.get("transform.bias")));
    t = layer_norm(t, store_.get("norm.gain"), store_.get("norm.bias"), S(1e-12));
    return rtdlab::add(rtdlab::matmul(t, rtdlab::transpose(token_table)),
                       store_.get("output_bias"));
  }

 private:
  ParamStore<S> store_;
};

// Per-token scalar logit: original vs replaced.
template <class S>
class RtdHead {
 public:
  explicit RtdHead(const EncoderConfig& config) {
    store_.create(head_param_specs({HeadSpec::Kind::rtd}, config, ""));
  }

  void init(std::uint64_t seed) { store_.init(seed); }
  ParamStore<S>& params() { return store_; }

  // hidden [N, H] -> logits [N]
  Tensor<S> forward(const Tensor<S>& hidden) {
    Tensor<S> t =
        rtdlab::gelu(linear(hidden, store_.get("dense.weight"), store_.get("dense.bias")));
    Tensor<S> logits = linear(t, store_.get("logit.weight"), store_.get("logit.bias"));
    return rtdlab::reshape(logits, {hidden.dim(0)});
  }

 private:
  ParamStore<S> store_;
};

// Per-token start/end logits for extractive QA.
template <class S>
class SpanHead {
 public:
  explicit SpanHead(const EncoderConfig& config) {
    store_.create(head_param_specs({HeadSpec::Kind::span}, config, ""));
  }

  void init(std::uint64_t seed) { store_.init(seed); }
  ParamStore<S>& params() { return store_; }

  // hidden [N, H] -> [N, 2] (column 0 start, column 1 end)
  Tensor<S> forward(const Tensor<S>& hidden) {
    return linear(hidden, store_.get("weight"), store_.get("bias"));
  }

 private:
  ParamStore<S> store_;
};

// Single-vector classifier over the [CLS] representation.
template <class S>
class ClsHead {
 public:
  ClsHead(const EncoderConfig& config, std::int32_t classes) {
    store_.create(head_param_specs({HeadSpec::Kind::cls, classes}, config, ""));
  }

  void init(std::uint64_t seed) { store_.init(seed); }
  ParamStore<S>& params() { return store_; }

  // pooled [N, H] -> [N, K]
  Tensor<S> forward(const Tensor<S>& pooled) {
    return linear(pooled, store_.get("weight"), store_.get("bias"));
  }

 private:
  ParamStore<S> store_;
};

// Per-token tag classifier.
template <class S>
class TokenHead {
 public:
  TokenHead(const EncoderConfig& config, std::int32_t tags) {
    store_.create(head_param_specs({HeadSpec::Kind::token, tags}, config, ""));
  }

  void init(std::uint64_t seed) { store_.init(seed); }
  ParamStore<S>& params() { return store_; }

  // hidden [N, H] -> [N, T]
  Tensor<S> forward(const Tensor<S>& hidden) {
    return linear(hidden, store_.get("weight"), store_.get("bias"));
  }

 private:
  ParamStore<S> store_;
};

}  // namespace rtdlab
