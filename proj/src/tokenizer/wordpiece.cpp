#include "rtdlab/tokenizer/wordpiece.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <stdexcept>

namespace rtdlab {

namespace {

struct TrainWord {
  std::vector<std::int32_t> seg;  // current segmentation, trainer token ids
  std::int64_t freq;
};

using Pair = std::pair<std::int32_t, std::int32_t>;

struct PairHash {
  std::size_t operator()(const Pair& p) const {
    return std::hash<std::uint64_t>{}((std::uint64_t(std::uint32_t(p.first)) << 32) |
                                      std::uint32_t(p.second));
  }
};

// Exact comparison of c1/(l1*r1) vs c2/(l2*r2) by cross-multiplication.
int compare_scores(std::int64_t c1, std::int64_t l1, std::int64_t r1, std::int64_t c2,
                   std::int64_t l2, std::int64_t r2) {
  const __int128 lhs = static_cast<__int128>(c1) * l2 * r2;
  const __int128 rhs = static_cast<__int128>(c2) * l1 * r1;
  if (lhs < rhs) return -1;
  if (lhs > rhs) return 1;
  return 0;
}

}  // namespace

Vocab train_vocab(const std::unordered_map<std::string, std::int64_t>& word_counts,
                  const WordPieceTrainConfig& config) {
  const std::int64_t minf = static_cast<std::int64_t>(std::max<std::size_t>(config.min_frequency, 1));

  // Positional alphabet: word-initial characters plain, the rest as "##c".
  std::map<std::string, std::int64_t> alpha_counts;  // ordered for determinism
  std::vector<std::pair<std::vector<char32_t>, std::int64_t>> words;
  for (const auto& [word, freq] : word_counts) {
    if (freq <= 0) continue;
    auto cps = decode_utf8(word);
    if (cps.empty() || cps.size() > config.max_word_chars) continue;
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string form = i == 0 ? encode_utf8(cps[i]) : "##" + encode_utf8(cps[i]);
      alpha_counts[form] += freq;
    }
    words.push_back({std::move(cps), freq});
  }
  if (words.empty()) throw std::invalid_argument("train_vocab: corpus has no usable words");

  std::vector<std::string> tokens = Vocab::special_tokens();
  std::unordered_map<std::string, std::int32_t> token_ids;
  auto register_token = [&](const std::string& t) {
    const auto id = static_cast<std::int32_t>(tokens.size());
    tokens.push_back(t);
    token_ids.emplace(t, id);
    return id;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) token_ids.emplace(tokens[i], i);

  std::size_t alphabet_size = 0;
  for (const auto& [form, count] : alpha_counts) {
    if (count < minf) continue;
    register_token(form);
    ++alphabet_size;
  }
  if (config.target_size <= Vocab::special_tokens().size() + alphabet_size) {
    throw std::invalid_argument(
        "train_vocab: target_size " + std::to_string(config.target_size) +
        " cannot hold the specials plus a " + std::to_string(alphabet_size) +
        "-character alphabet");
  }

  // Seed segmentations; words touching a below-threshold character cannot be
  // segmented and are left out of the merge corpus (they encode to [UNK]).
  std::vector<TrainWord> train;
  train.reserve(words.size());
  for (auto& [cps, freq] : words) {
    TrainWord tw;
    tw.freq = freq;
    bool ok = true;
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string form = i == 0 ? encode_utf8(cps[i]) : "##" + encode_utf8(cps[i]);
      auto it = token_ids.find(form);
      if (it == token_ids.end()) {
        ok = false;
        break;
      }
      tw.seg.push_back(it->second);
    }
    if (ok) train.push_back(std::move(tw));
  }

  std::unordered_map<std::int32_t, std::int64_t> token_count;
  std::unordered_map<Pair, std::int64_t, PairHash> pair_count;
  auto add_word = [&](const TrainWord& w, std::int64_t sign) {
    for (std::size_t i = 0; i < w.seg.size(); ++i) {
      token_count[w.seg[i]] += sign * w.freq;
      if (i + 1 < w.seg.size()) pair_count[{w.seg[i], w.seg[i + 1]}] += sign * w.freq;
    }
  };
  for (const auto& w : train) add_word(w, +1);

  while (tokens.size() < config.target_size) {
    // best pair by score; ties broken toward the lexicographically smaller one
    bool found = false;
    Pair best{};
    std::int64_t best_c = 0, best_l = 0, best_r = 0;
    for (const auto& [pair, count] : pair_count) {
      if (count < minf) continue;
      const std::int64_t cl = token_count[pair.first];
      const std::int64_t cr = token_count[pair.second];
      if (!found) {
        best = pair;
        best_c = count;
        best_l = cl;
        best_r = cr;
        found = true;
        continue;
      }
      const int cmp = compare_scores(count, cl, cr, best_c, best_l, best_r);
      const auto lex = [&] {
        const std::string& bl = tokens[static_cast<std::size_t>(best.first)];
        const std::string& nl = tokens[static_cast<std::size_t>(pair.first)];
        if (nl != bl) return nl < bl;
        return tokens[static_cast<std::size_t>(pair.second)] <
               tokens[static_cast<std::size_t>(best.second)];
      };
      if (cmp > 0 || (cmp == 0 && lex())) {
        best = pair;
        best_c = count;
        best_l = cl;
        best_r = cr;
      }
    }
    if (!found) break;

    const std::string merged = tokens[static_cast<std::size_t>(best.first)] +
                               tokens[static_cast<std::size_t>(best.second)].substr(2);
    // a merge can reproduce an existing token (corpora containing literal
    // "#" runs); reuse its id instead of minting a duplicate
    const auto existing = token_ids.find(merged);
    const std::int32_t merged_id =
        existing != token_ids.end() ? existing->second : register_token(merged);

    for (auto& w : train) {
      bool contains = false;
      for (std::size_t i = 0; i + 1 < w.seg.size(); ++i) {
        if (w.seg[i] == best.first && w.seg[i + 1] == best.second) {
          contains = true;
          break;
        }
      }
      if (!contains) continue;
      add_word(w, -1);
      std::vector<std::int32_t> next;
      next.reserve(w.seg.size());
      for (std::size_t i = 0; i < w.seg.size();) {
        if (i + 1 < w.seg.size() && w.seg[i] == best.first && w.seg[i + 1] == best.second) {
          next.push_back(merged_id);
          i += 2;
        } else {
          next.push_back(w.seg[i]);
          ++i;
        }
      }
      w.seg = std::move(next);
      add_word(w, +1);
    }
    pair_count.erase(best);
  }

  return Vocab::from_tokens(std::move(tokens));
}

Vocab train_vocab(std::istream& corpus, const WordPieceTrainConfig& config) {
  std::unordered_map<std::string, std::int64_t> counts;
  std::string line;
  while (std::getline(corpus, line)) {
    for (const auto& w : normalize_words(line)) {
      std::string key;
      for (const auto& c : w.chars) key += encode_utf8(c.cp);
      ++counts[key];
    }
  }
  return train_vocab(counts, config);
}

WordPieceEncoder::WordPieceEncoder(Vocab vocab, std::size_t max_word_chars)
    : vocab_(std::move(vocab)), max_word_chars_(max_word_chars) {}

std::vector<TokenPiece> WordPieceEncoder::word_pieces(const NormWord& word) const {
  const auto& chars = word.chars;
  auto unk = [&] {
    return std::vector<TokenPiece>{
        {vocab_.unk(), kUnkToken, word.src_start, word.src_end}};
  };
  if (chars.size() > max_word_chars_) return unk();

  std::vector<TokenPiece> pieces;
  std::size_t pos = 0;
  while (pos < chars.size()) {
    std::int32_t match_id = -1;
    std::size_t match_len = 0;
    std::string prefix = pos == 0 ? "" : "##";
    for (std::size_t len = chars.size() - pos; len >= 1; --len) {
      std::string cand = prefix;
      for (std::size_t i = 0; i < len; ++i) cand += encode_utf8(chars[pos + i].cp);
      const std::int32_t id = vocab_.id(cand);
      if (id >= 0) {
        match_id = id;
        match_len = len;
        break;
      }
    }
    if (match_id < 0) return unk();
    const std::size_t next = pos + match_len;
    TokenPiece piece;
    piece.id = match_id;
    piece.token = vocab_.token(match_id);
    piece.start = pieces.empty() ? word.src_start : pieces.back().end;
    piece.end = next < chars.size() ? chars[next].src_start : word.src_end;
    pieces.push_back(std::move(piece));
    pos = next;
  }
  return pieces;
}

std::vector<TokenizedWord> WordPieceEncoder::tokenize_words(const std::string& text) const {
  std::vector<TokenizedWord> out;
  for (const auto& w : normalize_words(text)) {
    out.push_back({w.src_start, w.src_end, word_pieces(w)});
  }
  return out;
}

Encoding WordPieceEncoder::assemble(const std::vector<TokenizedWord>* a,
                                    const std::vector<TokenizedWord>* b,
                                    std::size_t max_len) const {
  if (max_len < 3) {
    throw std::invalid_argument("encode: max_len " + std::to_string(max_len) +
                                " leaves no room for the special tokens");
  }
  struct Flat {
    TokenPiece piece;
    std::int32_t word;
  };
  auto flatten = [](const std::vector<TokenizedWord>& words) {
    std::vector<Flat> flat;
    for (std::size_t wi = 0; wi < words.size(); ++wi) {
      for (const auto& p : words[wi].pieces) {
        flat.push_back({p, static_cast<std::int32_t>(wi)});
      }
    }
    return flat;
  };
  std::vector<Flat> fa = flatten(*a);
  std::vector<Flat> fb = b ? flatten(*b) : std::vector<Flat>{};

  const std::size_t specials = b ? 3 : 2;
  const std::size_t avail = max_len - specials;
  if (b) {
    // longest-first: shed trailing tokens from whichever side is longer
    while (fa.size() + fb.size() > avail) {
      if (fa.size() >= fb.size()) {
        fa.pop_back();
      } else {
        fb.pop_back();
      }
    }
  } else if (fa.size() > avail) {
    fa.resize(avail);
  }

  Encoding enc;
  const auto reserve = max_len;
  enc.ids.reserve(reserve);
  enc.tokens.reserve(reserve);
  enc.word_offsets.reserve(reserve);
  enc.word_index.reserve(reserve);
  enc.segments.reserve(reserve);
  enc.attention_mask.reserve(reserve);

  auto push = [&](std::int32_t id, const std::string& tok, std::int32_t start, std::int32_t end,
                  std::int32_t word, std::int32_t segment, std::uint8_t attend) {
    enc.ids.push_back(id);
    enc.tokens.push_back(tok);
    enc.word_offsets.push_back({start, end});
    enc.word_index.push_back(word);
    enc.segments.push_back(segment);
    enc.attention_mask.push_back(attend);
  };

  push(vocab_.cls(), kClsToken, 0, 0, -1, 0, 1);
  std::int32_t cursor = 0;
  for (const auto& f : fa) {
    push(f.piece.id, f.piece.token, f.piece.start, f.piece.end, f.word, 0, 1);
    cursor = f.piece.end;
  }
  push(vocab_.sep(), kSepToken, cursor, cursor, -1, 0, 1);
  if (b) {
    cursor = 0;
    for (const auto& f : fb) {
      push(f.piece.id, f.piece.token, f.piece.start, f.piece.end, f.word, 1, 1);
      cursor = f.piece.end;
    }
    push(vocab_.sep(), kSepToken, cursor, cursor, -1, 1, 1);
  }
  const std::int32_t pad_at = cursor;
  while (enc.ids.size() < max_len) {
    push(vocab_.pad(), kPadToken, pad_at, pad_at, -1, 0, 0);
  }
  return enc;
}

Encoding WordPieceEncoder::encode(const std::string& text, std::size_t max_len) const {
  const auto words = tokenize_words(text);
  return assemble(&words, nullptr, max_len);
}

Encoding WordPieceEncoder::encode(const std::string& a, const std::string& b,
                                  std::size_t max_len) const {
  const auto wa = tokenize_words(a);
  const auto wb = tokenize_words(b);
  return assemble(&wa, &wb, max_len);
}

std::string decode(const std::vector<std::int32_t>& ids, const Vocab& vocab) {
  std::string out;
  for (std::int32_t id : ids) {
    const std::string& tok = vocab.token(id);  // validates range
    if (vocab.is_special(id)) continue;
    if (tok.size() > 2 && tok[0] == '#' && tok[1] == '#') {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out.push_back(' ');
      out += tok;
    }
  }
  return out;
}

}  // namespace rtdlab
