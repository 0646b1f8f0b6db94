#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rtdlab/core/adam.hpp"
#include "rtdlab/core/tensor.hpp"

// Checkpoint directory format: manifest.json (step, configs, tensor table,
// tie aliases) plus params.bin (raw little-endian float32, concatenated in
// manifest order). Round-trips are bit-exact.

namespace rtdlab {

class CheckpointWriter {
 public:
  void set_step(std::int64_t step) { step_ = step; }
  void set_config(const std::string& key, nlohmann::json config);
  void set_extra(const std::string& key, nlohmann::json value);

  // Records one tensor. Tensors whose storage was already added under another
  // name become aliases and are not written twice.
  void add(const std::string& name, const Shape& shape, const float* data, std::size_t count);
  void add_params(const NamedParams<float>& params);

  // Optimizer moments as optim.m.<param> / optim.v.<param> plus the step
  // counter in the manifest.
  void add_optimizer(const Adam<float>& optim);

  void write(const std::string& dir) const;

 private:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<float> data;
  };
  std::int64_t step_ = 0;
  std::int64_t optimizer_step_ = -1;
  nlohmann::json configs_ = nlohmann::json::object();
  nlohmann::json extra_ = nlohmann::json::object();
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<const void*, std::string> by_storage_;
  std::map<std::string, std::string> aliases_;
};

class Checkpoint {
 public:
  static Checkpoint load(const std::string& dir);

  std::int64_t step() const;
  std::int64_t optimizer_step() const;
  bool has_config(const std::string& key) const;
  nlohmann::json config(const std::string& key) const;
  nlohmann::json extra(const std::string& key) const;

  bool has(const std::string& name) const;
  // Validates the stored shape before handing out the data.
  const std::vector<float>& tensor(const std::string& name, const Shape& expect) const;

  // Copies stored values into every listed parameter by name.
  void load_params(NamedParams<float>& params) const;
  void restore_optimizer(Adam<float>& optim) const;

  nlohmann::json manifest;

 private:
  struct Stored {
    Shape shape;
    std::vector<float> data;
  };
  const Stored& resolve(const std::string& name) const;
  std::unordered_map<std::string, Stored> tensors_;
  std::unordered_map<std::string, std::string> aliases_;
};

}  // namespace rtdlab
