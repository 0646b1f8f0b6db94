#include "rtdlab/tokenizer/normalize.hpp"

namespace rtdlab {

std::vector<char32_t> decode_utf8(const std::string& text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  while (i < n) {
    const unsigned char b0 = s[i];
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 >> 5) == 0x6 && i + 1 < n && (s[i + 1] & 0xC0) == 0x80) {
      cp = (char32_t(b0 & 0x1F) << 6) | (s[i + 1] & 0x3F);
      len = 2;
      if (cp < 0x80) cp = 0xFFFD;  // overlong
    } else if ((b0 >> 4) == 0xE && i + 2 < n && (s[i + 1] & 0xC0) == 0x80 &&
               (s[i + 2] & 0xC0) == 0x80) {
      cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
      len = 3;
      if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    } else if ((b0 >> 3) == 0x1E && i + 3 < n && (s[i + 1] & 0xC0) == 0x80 &&
               (s[i + 2] & 0xC0) == 0x80 && (s[i + 3] & 0xC0) == 0x80) {
      cp = (char32_t(b0 & 0x07) << 18) | (char32_t(s[i + 1] & 0x3F) << 12) |
           (char32_t(s[i + 2] & 0x3F) << 6) | (s[i + 3] & 0x3F);
      len = 4;
      if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) out += encode_utf8(cp);
  return out;
}

std::string cp_substr(const std::string& text, std::int32_t start, std::int32_t end) {
  const auto cps = decode_utf8(text);
  std::string out;
  for (std::int32_t i = start; i < end && i < static_cast<std::int32_t>(cps.size()); ++i) {
    if (i >= 0) out += encode_utf8(cps[static_cast<std::size_t>(i)]);
  }
  return out;
}

bool is_space_cp(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case 0x000B:
    case 0x000C:
    case 0x0085:
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return (cp >= 0x2000 && cp <= 0x200A);
  }
}

// Arabic diacritical marks dropped during normalization.
bool is_tashkeel(char32_t cp) {
  return (cp >= 0x0610 && cp <= 0x061A) || (cp >= 0x064B && cp <= 0x065F) || cp == 0x0670 ||
         (cp >= 0x06D6 && cp <= 0x06DC) || (cp >= 0x06DF && cp <= 0x06E8) ||
         (cp >= 0x06EA && cp <= 0x06ED);
}

namespace {

constexpr char32_t kTatweel = 0x0640;

// Composition of decomposed hamza/madda sequences into their precomposed
// letters; the only combining sequences Arabic text commonly carries.
char32_t compose_arabic(char32_t base, char32_t mark) {
  if (base == 0x0627 && mark == 0x0653) return 0x0622;  // alef + madda
  if (base == 0x0627 && mark == 0x0654) return 0x0623;  // alef + hamza above
  if (base == 0x0627 && mark == 0x0655) return 0x0625;  // alef + hamza below
  if (base == 0x0648 && mark == 0x0654) return 0x0624;  // waw + hamza above
  if (base == 0x064A && mark == 0x0654) return 0x0626;  // yeh + hamza above
  return 0;
}

char32_t fold_case(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  return cp;
}

}  // namespace

std::vector<NormChar> normalize_cps(const std::vector<char32_t>& src) {
  std::vector<NormChar> out;
  out.reserve(src.size());
  const auto n = static_cast<std::int32_t>(src.size());
  std::int32_t i = 0;
  while (i < n) {
    const char32_t cp = src[static_cast<std::size_t>(i)];
    if (i + 1 < n) {
      const char32_t composed = compose_arabic(cp, src[static_cast<std::size_t>(i) + 1]);
      if (composed != 0) {
        out.push_back({composed, i, i + 2});
        i += 2;
        continue;
      }
    }
    if (cp == kTatweel || is_tashkeel(cp)) {
      ++i;
      continue;
    }
    out.push_back({fold_case(cp), i, i + 1});
    ++i;
  }
  return out;
}

std::vector<NormWord> normalize_words(const std::string& text) {
  const auto src = decode_utf8(text);
  std::vector<NormWord> words;
  const auto n = static_cast<std::int32_t>(src.size());
  std::int32_t i = 0;
  while (i < n) {
    while (i < n && is_space_cp(src[static_cast<std::size_t>(i)])) ++i;
    if (i >= n) break;
    const std::int32_t run_start = i;
    while (i < n && !is_space_cp(src[static_cast<std::size_t>(i)])) ++i;
    const std::int32_t run_end = i;
    std::vector<char32_t> run(src.begin() + run_start, src.begin() + run_end);
    auto chars = normalize_cps(run);
    if (chars.empty()) continue;
    for (auto& c : chars) {
      c.src_start += run_start;
      c.src_end += run_start;
    }
    words.push_back({std::move(chars), run_start, run_end});
  }
  return words;
}

std::string normalize_text(const std::string& text) {
  std::string out;
  for (const auto& w : normalize_words(text)) {
    if (!out.empty()) out.push_back(' ');
    for (const auto& c : w.chars) out += encode_utf8(c.cp);
  }
  return out;
}

}  // namespace rtdlab
