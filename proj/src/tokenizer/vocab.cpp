#include "rtdlab/tokenizer/vocab.hpp"

#include <fstream>
#include <stdexcept>

namespace rtdlab {

std::vector<std::string> Vocab::special_tokens() {
  return {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.id_to_token_ = std::move(tokens);
  v.token_to_id_.reserve(v.id_to_token_.size());
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    const std::string& tok = v.id_to_token_[i];
    if (!v.token_to_id_.emplace(tok, static_cast<std::int32_t>(i)).second) {
      throw std::runtime_error("Vocab: duplicate token \"" + tok + "\" at id " +
                               std::to_string(i));
    }
  }
  auto find = [&](const char* tok) {
    auto it = v.token_to_id_.find(tok);
    if (it == v.token_to_id_.end()) {
      throw std::runtime_error(std::string("Vocab: missing special token ") + tok);
    }
    return it->second;
  };
  v.pad_ = find(kPadToken);
  v.unk_ = find(kUnkToken);
  v.cls_ = find(kClsToken);
  v.sep_ = find(kSepToken);
  v.mask_ = find(kMaskToken);
  if (v.pad_ != 0) {
    throw std::runtime_error("Vocab: [PAD] must have id 0, found id " + std::to_string(v.pad_));
  }
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    if (v.id_to_token_[i].empty()) {
      throw std::runtime_error("Vocab: empty token at id " + std::to_string(i));
    }
  }
  return v;
}

std::int32_t Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? -1 : it->second;
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range("Vocab: id " + std::to_string(id) + " out of range for size " +
                            std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("Vocab: cannot write " + path);
  for (const auto& tok : id_to_token_) out << tok << '\n';
  out.flush();
  if (!out) throw std::runtime_error("Vocab: write failed for " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("Vocab: cannot read " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> first_seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto it = first_seen.find(line);
    if (it != first_seen.end()) {
      throw std::runtime_error("Vocab: duplicate token on line " + std::to_string(line_no) +
                               " (first on line " + std::to_string(it->second) + "): \"" + line +
                               "\"");
    }
    first_seen.emplace(line, line_no);
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

}  // namespace rtdlab
