#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rtdlab/tokenizer/normalize.hpp"
#include "rtdlab/tokenizer/vocab.hpp"

// WordPiece training (likelihood-scored merges) and greedy longest-match
// encoding. Offsets are code-point indices into the source text a token came
// from; the pieces of a word tile the word's source range exactly, so
// concatenating the covered substrings reconstructs the word.

namespace rtdlab {

struct WordPieceTrainConfig {
  std::size_t target_size = 8192;
  std::size_t min_frequency = 1;
  std::size_t max_word_chars = 100;
};

// Vocabulary from normalized word frequencies: specials, then the positional
// character alphabet (word-initial chars plain, continuations as "##c") with
// frequency >= min_frequency, then merges best-score first. Merge score is
// pair_count / (left_count * right_count). Stops at target_size or when no
// pair reaches min_frequency.
Vocab train_vocab(const std::unordered_map<std::string, std::int64_t>& word_counts,
                  const WordPieceTrainConfig& config);

// Same, counting whitespace words of the (normalized) stream first.
Vocab train_vocab(std::istream& corpus, const WordPieceTrainConfig& config);

struct TokenPiece {
  std::int32_t id;
  std::string token;
  std::int32_t start;  // source code-point offsets, half-open
  std::int32_t end;
};

struct TokenizedWord {
  std::int32_t src_start;
  std::int32_t src_end;
  std::vector<TokenPiece> pieces;  // single [UNK] piece when uncovered
};

struct Encoding {
  std::vector<std::int32_t> ids;
  std::vector<std::string> tokens;
  std::vector<std::pair<std::int32_t, std::int32_t>> word_offsets;
  std::vector<std::int32_t> word_index;      // originating word, -1 for specials
  std::vector<std::int32_t> segments;        // 0 for first text, 1 for the pair
  std::vector<std::uint8_t> attention_mask;  // 0 exactly at [PAD]
};

class WordPieceEncoder {
 public:
  explicit WordPieceEncoder(Vocab vocab, std::size_t max_word_chars = 100);

  const Vocab& vocab() const { return vocab_; }

  // Normalizes, splits on whitespace, and greedily matches each word against
  // the vocabulary, longest piece first.
  std::vector<TokenizedWord> tokenize_words(const std::string& text) const;

  // [CLS] text [SEP], truncated and padded to exactly max_len ids.
  Encoding encode(const std::string& text, std::size_t max_len) const;

  // [CLS] a [SEP] b [SEP]; over-length pairs shed tokens from the longer
  // segment first. Offsets of the second segment index into `b`.
  Encoding encode(const std::string& a, const std::string& b, std::size_t max_len) const;

  // Pieces of one already-normalized word (no specials, no framing).
  std::vector<TokenPiece> word_pieces(const NormWord& word) const;

 private:
  Encoding assemble(const std::vector<TokenizedWord>* a, const std::vector<TokenizedWord>* b,
                    std::size_t max_len) const;

  Vocab vocab_;
  std::size_t max_word_chars_;
};

// Specials dropped, "##" continuations glued to the previous piece, words
// separated by single spaces. Throws on out-of-range ids.
std::string decode(const std::vector<std::int32_t>& ids, const Vocab& vocab);

}  // namespace rtdlab
