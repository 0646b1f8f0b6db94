#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Text normalization applied before any tokenization: UTF-8 decoding, a
// targeted Arabic composition pass (hamza/madda forms), removal of tashkeel
// and tatweel, and ASCII lowercasing. Every normalized character remembers
// the code-point range of the source text it came from, so subword offsets
// can always be mapped back to the original string.

namespace rtdlab {

// One normalized character and the half-open source code-point range that
// produced it.
struct NormChar {
  char32_t cp;
  std::int32_t src_start;
  std::int32_t src_end;
};

// A maximal run of non-whitespace source characters with at least one
// surviving normalized character.
struct NormWord {
  std::vector<NormChar> chars;
  std::int32_t src_start;  // code-point index of the run's first source char
  std::int32_t src_end;    // one past the run's last source char
};

std::vector<char32_t> decode_utf8(const std::string& text);
std::string encode_utf8(const std::vector<char32_t>& cps);
std::string encode_utf8(char32_t cp);

// Substring of `text` by code-point indices, re-encoded as UTF-8.
std::string cp_substr(const std::string& text, std::int32_t start, std::int32_t end);

bool is_space_cp(char32_t cp);
bool is_tashkeel(char32_t cp);

// Normalize a decoded string; the i-th input position appears in the output's
// source ranges even when characters merge or vanish at word level.
std::vector<NormChar> normalize_cps(const std::vector<char32_t>& src);

// Normalize and split into whitespace-delimited words. Runs that normalize to
// nothing (pure tatweel or diacritics) produce no word.
std::vector<NormWord> normalize_words(const std::string& text);

// The normalized text as a plain string (words joined by single spaces).
std::string normalize_text(const std::string& text);

}  // namespace rtdlab
