#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtdlab/core/tensor.hpp"

namespace rtdlab {

struct EncoderConfig {
  std::int32_t num_layers = 12;
  std::int32_t num_heads = 12;
  std::int32_t hidden_size = 768;
  std::int32_t ffn_size = 3072;  // 4x hidden by convention
  std::int32_t vocab_size = 64000;
  std::int32_t max_positions = 512;
  std::int32_t embedding_size = 768;  // may differ from hidden_size
  double dropout = 0.1;

  void validate() const;
  bool needs_projection() const { return embedding_size != hidden_size; }
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Which embedding tables a model borrows from a host model instead of owning.
enum class EmbeddingSharing { none, token, all };

struct ParamSpec {
  enum class Init { normal, zeros, ones };
  std::string name;
  Shape shape;
  Init init;
};

// Every encoder parameter in a fixed, documented order. Names:
//   embeddings.token / .position / .segment, embeddings.norm.gain|bias,
//   embeddings.proj.weight|bias (only when embedding_size != hidden_size),
//   layers.<i>.attn.{query,key,value,output}.{weight,bias},
//   layers.<i>.attn.norm.{gain,bias},
//   layers.<i>.ffn.{inner,output}.{weight,bias}, layers.<i>.ffn.norm.{gain,bias}
std::vector<ParamSpec> encoder_param_specs(const EncoderConfig& config);

struct HeadSpec {
  enum class Kind { mlm, rtd, span, cls, token } kind;
  std::int32_t classes = 0;  // cls/token heads only
};

// Parameters a head owns, given the encoder it sits on. The MLM head's output
// matrix is the tied token table and is never counted here.
std::vector<ParamSpec> head_param_specs(const HeadSpec& head, const EncoderConfig& config,
                                        const std::string& prefix);

// Exact number of trainable scalars for one model: encoder + heads, minus any
// embedding tables borrowed from a host model (tied storage counts once, at
// its owner).
std::int64_t count_parameters(const EncoderConfig& config, const std::vector<HeadSpec>& heads,
                              EmbeddingSharing borrowed = EmbeddingSharing::none);

}  // namespace rtdlab
