#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtdlab/tokenizer/wordpiece.hpp"

// Turns a document corpus into fixed-length pretraining sequences.  Documents
// are tokenized, joined into one stream with a [SEP] after each document, and
// the stream is cut into chunks of seq_len - 1 ids; each chunk gets a leading
// [CLS] and the final short chunk is padded with [PAD] up to seq_len.

namespace rtdlab {

// Piece ids of one document, no specials.  Empty documents yield no ids and
// are dropped from the stream.
std::vector<std::vector<std::int32_t>> encode_documents(const WordPieceEncoder& encoder,
                                                        const std::vector<std::string>& documents);

// Packs encoded documents into sequences of exactly seq_len ids each.
std::vector<std::vector<std::int32_t>> pack_sequences(
    const std::vector<std::vector<std::int32_t>>& documents, const Vocab& vocab,
    std::int32_t seq_len);

}  // namespace rtdlab
