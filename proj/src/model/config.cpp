#include "rtdlab/model/config.hpp"

#include <stdexcept>

namespace rtdlab {

void EncoderConfig::validate() const {
  auto positive = [](std::int32_t v, const char* what) {
    if (v <= 0) {
      throw std::invalid_argument(std::string("EncoderConfig: ") + what + " must be positive, got " +
                                  std::to_string(v));
    }
  };
  positive(num_layers, "num_layers");
  positive(num_heads, "num_heads");
  positive(hidden_size, "hidden_size");
  positive(ffn_size, "ffn_size");
  positive(vocab_size, "vocab_size");
  positive(max_positions, "max_positions");
  positive(embedding_size, "embedding_size");
  if (hidden_size % num_heads != 0) {
    throw std::invalid_argument("EncoderConfig: hidden_size " + std::to_string(hidden_size) +
                                " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("EncoderConfig: dropout must be in [0, 1), got " +
                                std::to_string(dropout));
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"hidden_size", c.hidden_size},
                     {"ffn_size", c.ffn_size},
                     {"vocab_size", c.vocab_size},
                     {"max_positions", c.max_positions},
                     {"embedding_size", c.embedding_size},
                     {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("num_layers").get_to(c.num_layers);
  j.at("num_heads").get_to(c.num_heads);
  j.at("hidden_size").get_to(c.hidden_size);
  j.at("ffn_size").get_to(c.ffn_size);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("max_positions").get_to(c.max_positions);
  j.at("embedding_size").get_to(c.embedding_size);
  j.at("dropout").get_to(c.dropout);
}

std::vector<ParamSpec> encoder_param_specs(const EncoderConfig& config) {
  config.validate();
  using Init = ParamSpec::Init;
  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto E = static_cast<std::size_t>(config.embedding_size);
  const auto H = static_cast<std::size_t>(config.hidden_size);
  const auto F = static_cast<std::size_t>(config.ffn_size);
  const auto P = static_cast<std::size_t>(config.max_positions);

  std::vector<ParamSpec> specs;
  specs.push_back({"embeddings.token", {V, E}, Init::normal});
  specs.push_back({"embeddings.position", {P, E}, Init::normal});
  specs.push_back({"embeddings.segment", {2, E}, Init::normal});
  specs.push_back({"embeddings.norm.gain", {E}, Init::ones});
  specs.push_back({"embeddings.norm.bias", {E}, Init::zeros});
  if (config.needs_projection()) {
    specs.push_back({"embeddings.proj.weight", {E, H}, Init::normal});
    specs.push_back({"embeddings.proj.bias", {H}, Init::zeros});
  }
  for (std::int32_t layer = 0; layer < config.num_layers; ++layer) {
    const std::string p = "layers." + std::to_string(layer) + ".";
    for (const char* part : {"query", "key", "value", "output"}) {
      specs.push_back({p + "attn." + part + ".weight", {H, H}, Init::normal});
      specs.push_back({p + "attn." + part + ".bias", {H}, Init::zeros});
    }
    specs.push_back({p + "attn.norm.gain", {H}, Init::ones});
    specs.push_back({p + "attn.norm.bias", {H}, Init::zeros});
    specs.push_back({p + "ffn.inner.weight", {H, F}, Init::normal});
    specs.push_back({p + "ffn.inner.bias", {F}, Init::zeros});
    specs.push_back({p + "ffn.output.weight", {F, H}, Init::normal});
    specs.push_back({p + "ffn.output.bias", {H}, Init::zeros});
    specs.push_back({p + "ffn.norm.gain", {H}, Init::ones});
    specs.push_back({p + "ffn.norm.bias", {H}, Init::zeros});
  }
  return specs;
}

std::vector<ParamSpec> head_param_specs(const HeadSpec& head, const EncoderConfig& config,
                                        const std::string& prefix) {
  using Init = ParamSpec::Init;
  const auto E = static_cast<std::size_t>(config.embedding_size);
  const auto H = static_cast<std::size_t>(config.hidden_size);
  const auto V = static_cast<std::size_t>(config.vocab_size);
  std::vector<ParamSpec> specs;
  switch (head.kind) {
    case HeadSpec::Kind::mlm:
      specs.push_back({prefix + "transform.weight", {H, E}, Init::normal});
      specs.push_back({prefix + "transform.bias", {E}, Init::zeros});
      specs.push_back({prefix + "norm.gain", {E}, Init::ones});
      specs.push_back({prefix + "norm.bias", {E}, Init::zeros});
      specs.push_back({prefix + "output_bias", {V}, Init::zeros});
      break;
    case HeadSpec::Kind::rtd:
      specs.push_back({prefix + "dense.weight", {H, H}, Init::normal});
      specs.push_back({prefix + "dense.bias", {H}, Init::zeros});
      specs.push_back({prefix + "logit.weight", {H, 1}, Init::normal});
      specs.push_back({prefix + "logit.bias", {1}, Init::zeros});
      break;
    case HeadSpec::Kind::span:
      specs.push_back({prefix + "weight", {H, 2}, Init::normal});
      specs.push_back({prefix + "bias", {2}, Init::zeros});
      break;
    case HeadSpec::Kind::cls:
    case HeadSpec::Kind::token: {
      if (head.classes <= 0) {
        throw std::invalid_argument("head_param_specs: class count must be positive");
      }
      const auto K = static_cast<std::size_t>(head.classes);
      specs.push_back({prefix + "weight", {H, K}, Init::normal});
      specs.push_back({prefix + "bias", {K}, Init::zeros});
      break;
    }
  }
  return specs;
}

std::int64_t count_parameters(const EncoderConfig& config, const std::vector<HeadSpec>& heads,
                              EmbeddingSharing borrowed) {
  std::int64_t total = 0;
  for (const auto& spec : encoder_param_specs(config)) {
    if (borrowed != EmbeddingSharing::none && spec.name == "embeddings.token") continue;
    if (borrowed == EmbeddingSharing::all &&
        (spec.name == "embeddings.position" || spec.name == "embeddings.segment")) {
      continue;
    }
    total += static_cast<std::int64_t>(numel(spec.shape));
  }
  for (const auto& head : heads) {
    for (const auto& spec : head_param_specs(head, config, "")) {
      total += static_cast<std::int64_t>(numel(spec.shape));
    }
  }
  return total;
}

}  // namespace rtdlab
