#include "rtdlab/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace rtdlab {

void CheckpointWriter::set_config(const std::string& key, nlohmann::json config) {
  configs_[key] = std::move(config);
}

void CheckpointWriter::set_extra(const std::string& key, nlohmann::json value) {
  extra_[key] = std::move(value);
}

void CheckpointWriter::add(const std::string& name, const Shape& shape, const float* data,
                           std::size_t count) {
  if (numel(shape) != count) {
    throw std::invalid_argument("checkpoint: tensor " + name + " shape " + shape_str(shape) +
                                " does not match " + std::to_string(count) + " values");
  }
  if (by_name_.count(name) || aliases_.count(name)) {
    throw std::invalid_argument("checkpoint: duplicate tensor name " + name);
  }
  auto storage = by_storage_.find(static_cast<const void*>(data));
  if (storage != by_storage_.end()) {
    aliases_[name] = storage->second;
    return;
  }
  by_storage_.emplace(static_cast<const void*>(data), name);
  by_name_.emplace(name, entries_.size());
  entries_.push_back({name, shape, std::vector<float>(data, data + count)});
}

void CheckpointWriter::add_params(const NamedParams<float>& params) {
  for (const auto& p : params) {
    add(p.name, p.tensor.shape(), p.tensor.data(), p.tensor.size());
  }
}

void CheckpointWriter::add_optimizer(const Adam<float>& optim) {
  optimizer_step_ = optim.step_count();
  for (std::size_t i = 0; i < optim.slot_count(); ++i) {
    auto mv = optim.moments(i);
    add("optim.m." + mv.name, {mv.m.size()}, mv.m.data(), mv.m.size());
    add("optim.v." + mv.name, {mv.v.size()}, mv.v.data(), mv.v.size());
  }
}

void CheckpointWriter::write(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["step"] = step_;
  if (optimizer_step_ >= 0) manifest["optimizer_step"] = optimizer_step_;
  manifest["configs"] = configs_;
  manifest["extra"] = extra_;
  manifest["aliases"] = aliases_;

  nlohmann::json tensor_list = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : entries_) {
    tensor_list.push_back({{"name", e.name},
                           {"shape", e.shape},
                           {"offset", offset},
                           {"count", e.data.size()}});
    offset += e.data.size() * sizeof(float);
  }
  manifest["tensors"] = std::move(tensor_list);

  const fs::path bin_path = fs::path(dir) / "params.bin";
  {
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("checkpoint: cannot write " + bin_path.string());
    for (const auto& e : entries_) {
      bin.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    }
    bin.flush();
    if (!bin) throw std::runtime_error("checkpoint: write failed for " + bin_path.string());
  }
  const fs::path man_path = fs::path(dir) / "manifest.json";
  std::ofstream man(man_path, std::ios::binary | std::ios::trunc);
  if (!man) throw std::runtime_error("checkpoint: cannot write " + man_path.string());
  man << manifest.dump(2) << '\n';
  man.flush();
  if (!man) throw std::runtime_error("checkpoint: write failed for " + man_path.string());
}

Checkpoint Checkpoint::load(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path man_path = fs::path(dir) / "manifest.json";
  std::ifstream man(man_path, std::ios::binary);
  if (!man) throw std::runtime_error("checkpoint: cannot read " + man_path.string());

  Checkpoint ckpt;
  try {
    man >> ckpt.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint: invalid manifest " + man_path.string() + ": " +
                             e.what());
  }
  if (ckpt.manifest.value("format_version", 0) != 1) {
    throw std::runtime_error("checkpoint: unsupported format_version in " + man_path.string());
  }

  const fs::path bin_path = fs::path(dir) / "params.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("checkpoint: cannot read " + bin_path.string());
  bin.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(bin.tellg());

  for (const auto& t : ckpt.manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    Stored stored;
    stored.shape = t.at("shape").get<Shape>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto count = t.at("count").get<std::uint64_t>();
    if (count != numel(stored.shape)) {
      throw std::runtime_error("checkpoint: tensor " + name + " count disagrees with shape");
    }
    if (offset + count * sizeof(float) > file_size) {
      throw std::runtime_error("checkpoint: params.bin truncated at tensor " + name + " (need " +
                               std::to_string(offset + count * sizeof(float)) + " bytes, have " +
                               std::to_string(file_size) + ")");
    }
    stored.data.resize(count);
    bin.seekg(static_cast<std::streamoff>(offset));
    bin.read(reinterpret_cast<char*>(stored.data.data()),
             static_cast<std::streamsize>(count * sizeof(float)));
    if (!bin) throw std::runtime_error("checkpoint: read failed for tensor " + name);
    ckpt.tensors_.emplace(name, std::move(stored));
  }
  if (ckpt.manifest.contains("aliases")) {
    for (const auto& [alias, target] : ckpt.manifest.at("aliases").items()) {
      ckpt.aliases_.emplace(alias, target.get<std::string>());
    }
  }
  return ckpt;
}

std::int64_t Checkpoint::step() const { return manifest.value("step", std::int64_t{0}); }

std::int64_t Checkpoint::optimizer_step() const {
  return manifest.value("optimizer_step", std::int64_t{0});
}

bool Checkpoint::has_config(const std::string& key) const {
  return manifest.contains("configs") && manifest.at("configs").contains(key);
}

nlohmann::json Checkpoint::config(const std::string& key) const {
  if (!has_config(key)) throw std::runtime_error("checkpoint: no config entry \"" + key + "\"");
  return manifest.at("configs").at(key);
}

nlohmann::json Checkpoint::extra(const std::string& key) const {
  if (!manifest.contains("extra") || !manifest.at("extra").contains(key)) {
    throw std::runtime_error("checkpoint: no extra entry \"" + key + "\"");
  }
  return manifest.at("extra").at(key);
}

const Checkpoint::Stored& Checkpoint::resolve(const std::string& name) const {
  auto alias = aliases_.find(name);
  const std::string& target = alias == aliases_.end() ? name : alias->second;
  auto it = tensors_.find(target);
  if (it == tensors_.end()) {
    throw std::runtime_error("checkpoint: no tensor named \"" + name + "\"");
  }
  return it->second;
}

bool Checkpoint::has(const std::string& name) const {
  return tensors_.count(name) || aliases_.count(name);
}

const std::vector<float>& Checkpoint::tensor(const std::string& name, const Shape& expect) const {
  const Stored& stored = resolve(name);
  if (stored.shape != expect) {
    throw std::runtime_error("checkpoint: tensor " + name + " has shape " +
                             shape_str(stored.shape) + ", model expects " + shape_str(expect));
  }
  return stored.data;
}

void Checkpoint::load_params(NamedParams<float>& params) const {
  for (auto& p : params) {
    const auto& data = tensor(p.name, p.tensor.shape());
    std::memcpy(p.tensor.data(), data.data(), data.size() * sizeof(float));
  }
}

void Checkpoint::restore_optimizer(Adam<float>& optim) const {
  for (std::size_t i = 0; i < optim.slot_count(); ++i) {
    const std::string name = optim.moments(i).name;
    const auto& m = resolve("optim.m." + name);
    const auto& v = resolve("optim.v." + name);
    optim.restore(optimizer_step(), name, m.data, v.data);
  }
}

}  // namespace rtdlab
