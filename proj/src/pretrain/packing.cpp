#include "rtdlab/pretrain/packing.hpp"

#include <stdexcept>

namespace rtdlab {

std::vector<std::vector<std::int32_t>> encode_documents(
    const WordPieceEncoder& encoder, const std::vector<std::string>& documents) {
  std::vector<std::vector<std::int32_t>> out;
  out.reserve(documents.size());
  for (const auto& doc : documents) {
    std::vector<std::int32_t> ids;
    for (const auto& word : encoder.tokenize_words(doc)) {
      for (const auto& piece : word.pieces) ids.push_back(piece.id);
    }
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

std::vector<std::vector<std::int32_t>> pack_sequences(
    const std::vector<std::vector<std::int32_t>>& documents, const Vocab& vocab,
    std::int32_t seq_len) {
  if (seq_len < 2) throw std::invalid_argument("pack_sequences: seq_len must be at least 2");
  std::vector<std::int32_t> stream;
  for (const auto& doc : documents) {
    if (doc.empty()) continue;
    stream.insert(stream.end(), doc.begin(), doc.end());
    stream.push_back(vocab.sep());
  }

  const std::size_t body = static_cast<std::size_t>(seq_len) - 1;
  std::vector<std::vector<std::int32_t>> sequences;
  for (std::size_t pos = 0; pos < stream.size(); pos += body) {
    std::vector<std::int32_t> seq;
    seq.reserve(static_cast<std::size_t>(seq_len));
    seq.push_back(vocab.cls());
    const std::size_t take = std::min(body, stream.size() - pos);
    seq.insert(seq.end(), stream.begin() + static_cast<std::ptrdiff_t>(pos),
               stream.begin() + static_cast<std::ptrdiff_t>(pos + take));
    seq.resize(static_cast<std::size_t>(seq_len), vocab.pad());
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

}  // namespace rtdlab
