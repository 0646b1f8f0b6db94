#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "rtdlab/core/rng.hpp"
#include "rtdlab/tokenizer/normalize.hpp"
#include "rtdlab/tokenizer/vocab.hpp"
#include "rtdlab/tokenizer/wordpiece.hpp"

using rtdlab::Encoding;
using rtdlab::Vocab;
using rtdlab::WordPieceEncoder;
using rtdlab::WordPieceTrainConfig;

namespace {

Vocab make_vocab(std::vector<std::string> extra) {
  auto tokens = Vocab::special_tokens();
  for (auto& t : extra) tokens.push_back(std::move(t));
  return Vocab::from_tokens(std::move(tokens));
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("normalization strips tashkeel and tatweel and composes hamza forms") {
    // "كِتَاب" with kasra and fatha -> "كتاب"
    const std::string marked = "كِتَاب";
    CHECK(rtdlab::normalize_text(marked) == "كتاب");
    // tatweel elongation dropped
    CHECK(rtdlab::normalize_text("كــت") == "كت");
    // decomposed alef + hamza above composes to the precomposed letter
    CHECK(rtdlab::normalize_text("أحب") == "أحب");
    CHECK(rtdlab::normalize_text("Hello WORLD") == "hello world");
    CHECK(rtdlab::normalize_text("  a\t\nb  ") == "a b");
    CHECK(rtdlab::normalize_text("ـَ") == "");  // nothing survives
  }

  TEST_CASE("normalized characters keep source code-point ranges") {
    // compose at positions 0-1, strip mark at position 2
    const std::string text = "أَب";
    auto words = rtdlab::normalize_words(text);
    REQUIRE(words.size() == 1);
    REQUIRE(words[0].chars.size() == 2);
    CHECK(words[0].chars[0].cp == U'أ');
    CHECK(words[0].chars[0].src_start == 0);
    CHECK(words[0].chars[0].src_end == 2);
    CHECK(words[0].chars[1].src_start == 3);
    CHECK(words[0].src_start == 0);
    CHECK(words[0].src_end == 4);
  }

  TEST_CASE("training on 'ab ab ab' yields the single likelihood merge") {
    std::istringstream corpus("ab ab ab");
    WordPieceTrainConfig cfg;
    cfg.target_size = 9;  // specials + 4
    Vocab v = rtdlab::train_vocab(corpus, cfg);
    CHECK(v.contains("a"));
    CHECK(v.contains("##b"));
    CHECK(v.contains("ab"));
    CHECK(v.size() == 8);  // merges exhausted below target
    CHECK(v.token(0) == "[PAD]");
  }

  TEST_CASE("single repeated character trains to specials plus that character") {
    std::istringstream corpus("x x x x");
    WordPieceTrainConfig cfg;
    cfg.target_size = 10;
    Vocab v = rtdlab::train_vocab(corpus, cfg);
    CHECK(v.size() == 6);
    CHECK(v.contains("x"));
  }

  TEST_CASE("merge order follows pair likelihood, not raw frequency") {
    // ("a","##b") appears 10 times but "a" is common: score 10/(100*10)
    // ("c","##d") appears 5 times with rare parts: score 5/(5*5)
    std::unordered_map<std::string, std::int64_t> counts{{"ab", 10}, {"a", 90}, {"cd", 5}};
    WordPieceTrainConfig cfg;
    cfg.target_size = 12;
    Vocab v = rtdlab::train_vocab(counts, cfg);
    REQUIRE(v.contains("cd"));
    REQUIRE(v.contains("ab"));
    CHECK(v.id("cd") < v.id("ab"));
  }

  TEST_CASE("hapax characters below min_frequency drop to [UNK] at encode time") {
    std::istringstream corpus("aa aa aa q");
    WordPieceTrainConfig cfg;
    cfg.target_size = 64;
    cfg.min_frequency = 2;
    Vocab v = rtdlab::train_vocab(corpus, cfg);
    CHECK_FALSE(v.contains("q"));
    WordPieceEncoder enc(v);
    auto words = enc.tokenize_words("q");
    REQUIRE(words.size() == 1);
    REQUIRE(words[0].pieces.size() == 1);
    CHECK(words[0].pieces[0].id == v.unk());
  }

  TEST_CASE("trainer rejects empty corpora and undersized targets") {
    std::istringstream empty("   \n  ");
    WordPieceTrainConfig cfg;
    CHECK_THROWS_AS((void)rtdlab::train_vocab(empty, cfg), std::invalid_argument);

    std::istringstream corpus("abc abc");
    WordPieceTrainConfig tiny;
    tiny.target_size = 7;  // 5 specials + 3-character alphabet cannot fit
    CHECK_THROWS_AS((void)rtdlab::train_vocab(corpus, tiny), std::invalid_argument);
  }

  TEST_CASE("greedy longest match reproduces the classic segmentation") {
    Vocab v = make_vocab({"un", "##aff", "##able", "u", "##n", "##a", "##f", "##b", "##l", "##e"});
    WordPieceEncoder enc(v);
    auto words = enc.tokenize_words("unaffable");
    REQUIRE(words.size() == 1);
    REQUIRE(words[0].pieces.size() == 3);
    CHECK(words[0].pieces[0].token == "un");
    CHECK(words[0].pieces[1].token == "##aff");
    CHECK(words[0].pieces[2].token == "##able");
  }

  TEST_CASE("each piece is the longest vocabulary match at its position") {
    rtdlab::Rng rng(404);
    // random vocab over a tiny alphabet, plus the mandatory single chars
    std::vector<std::string> extra = {"a", "b", "c", "##a", "##b", "##c"};
    for (int i = 0; i < 40; ++i) {
      std::string t = i % 2 ? "" : "##";
      const int len = 2 + static_cast<int>(rng.uniform_below(3));
      for (int j = 0; j < len; ++j) t.push_back(static_cast<char>('a' + rng.uniform_below(3)));
      extra.push_back(t);
    }
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    Vocab v = make_vocab(extra);
    WordPieceEncoder enc(v);

    for (int trial = 0; trial < 200; ++trial) {
      std::string word;
      const int len = 1 + static_cast<int>(rng.uniform_below(10));
      for (int j = 0; j < len; ++j) word.push_back(static_cast<char>('a' + rng.uniform_below(3)));
      auto words = enc.tokenize_words(word);
      REQUIRE(words.size() == 1);
      std::size_t pos = 0;
      for (const auto& piece : words[0].pieces) {
        const std::string body =
            piece.token.rfind("##", 0) == 0 ? piece.token.substr(2) : piece.token;
        // brute force: no longer vocab entry matches at pos
        for (std::size_t longer = body.size() + 1; pos + longer <= word.size(); ++longer) {
          std::string cand = (pos == 0 ? "" : "##") + word.substr(pos, longer);
          CHECK(v.id(cand) < 0);
        }
        CHECK(word.substr(pos, body.size()) == body);
        pos += body.size();
      }
      CHECK(pos == word.size());
    }
  }

  TEST_CASE("encode frames, truncates, and pads to max_len") {
    Vocab v = make_vocab({"a", "b", "##a", "##b", "ab"});
    WordPieceEncoder enc(v);

    Encoding e = enc.encode("ab ab ab", 5);
    CHECK(e.ids.size() == 5);
    CHECK(e.tokens[0] == "[CLS]");
    CHECK(e.tokens[1] == "ab");
    CHECK(e.tokens[2] == "ab");
    CHECK(e.tokens[3] == "ab");
    CHECK(e.tokens[4] == "[SEP]");

    Encoding t = enc.encode("ab ab ab", 4);  // truncation keeps [SEP] last
    CHECK(t.tokens == std::vector<std::string>{"[CLS]", "ab", "ab", "[SEP]"});

    Encoding p = enc.encode("ab", 6);
    CHECK(p.tokens == std::vector<std::string>{"[CLS]", "ab", "[SEP]", "[PAD]", "[PAD]", "[PAD]"});
    CHECK(p.attention_mask == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0});
    CHECK(p.word_index == std::vector<std::int32_t>{-1, 0, -1, -1, -1, -1});

    Encoding empty = enc.encode("", 4);
    CHECK(empty.tokens == std::vector<std::string>{"[CLS]", "[SEP]", "[PAD]", "[PAD]"});

    CHECK_THROWS_AS((void)enc.encode("ab", 2), std::invalid_argument);
  }

  TEST_CASE("unknown words become one [UNK] spanning the whole word") {
    Vocab v = make_vocab({"a", "##a"});
    WordPieceEncoder enc(v);
    Encoding e = enc.encode("aa zz aa", 16);
    // [CLS] a ##a [UNK] a ##a [SEP] ...
    CHECK(e.tokens[3] == "[UNK]");
    CHECK(e.word_offsets[3].first == 3);
    CHECK(e.word_offsets[3].second == 5);
    CHECK(e.word_index[3] == 1);
  }

  TEST_CASE("pair encoding lays out segments and truncates the longer side first") {
    Vocab v = make_vocab({"a", "b", "##a", "##b"});
    WordPieceEncoder enc(v);
    Encoding e = enc.encode("a a a a", "b b", 12);
    // [CLS] a a a a [SEP] b b [SEP] [PAD]*3
    CHECK(e.tokens[0] == "[CLS]");
    CHECK(e.tokens[5] == "[SEP]");
    CHECK(e.tokens[8] == "[SEP]");
    CHECK(e.segments ==
          std::vector<std::int32_t>{0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0});

    Encoding t = enc.encode("a a a a", "b b", 8);  // room for 5 tokens
    // longest-first: a-side sheds until 3 vs 2
    CHECK(t.tokens ==
          std::vector<std::string>{"[CLS]", "a", "a", "a", "[SEP]", "b", "b", "[SEP]"});

    Encoding u = enc.encode("a", "b b b b", 8);
    CHECK(u.tokens ==
          std::vector<std::string>{"[CLS]", "a", "[SEP]", "b", "b", "b", "b", "[SEP]"});
  }

  TEST_CASE("offsets tile each source word even with stripped diacritics") {
    std::istringstream corpus("كتاب كتاب كت");
    WordPieceTrainConfig cfg;
    cfg.target_size = 32;
    Vocab v = rtdlab::train_vocab(corpus, cfg);
    WordPieceEncoder enc(v);

    // marked-up variant of the same words
    const std::string text = "كِتَاب كـت";
    auto words = enc.tokenize_words(text);
    REQUIRE(words.size() == 2);
    for (const auto& w : words) {
      REQUIRE(!w.pieces.empty());
      std::string rebuilt;
      std::int32_t cursor = w.src_start;
      for (const auto& p : w.pieces) {
        CHECK(p.start == cursor);
        rebuilt += rtdlab::cp_substr(text, p.start, p.end);
        cursor = p.end;
      }
      CHECK(cursor == w.src_end);
      CHECK(rebuilt == rtdlab::cp_substr(text, w.src_start, w.src_end));
    }
  }

  TEST_CASE("decode joins continuations and drops specials") {
    Vocab v = make_vocab({"un", "##aff", "##able", "ab"});
    CHECK(rtdlab::decode({v.id("un"), v.id("##aff"), v.id("##able")}, v) == "unaffable");
    CHECK(rtdlab::decode({v.cls(), v.sep()}, v) == "");
    CHECK(rtdlab::decode({v.cls(), v.id("un"), v.id("ab"), v.sep(), v.pad()}, v) == "un ab");
    CHECK_THROWS_AS((void)rtdlab::decode({static_cast<std::int32_t>(v.size())}, v),
                    std::out_of_range);
  }

  TEST_CASE("decode(encode(w)) round-trips vocabulary-covered text") {
    std::istringstream corpus("abc abd bca cab abc abd");
    WordPieceTrainConfig cfg;
    cfg.target_size = 40;
    Vocab v = rtdlab::train_vocab(corpus, cfg);
    WordPieceEncoder enc(v);
    for (const std::string text : {"abc", "abd bca", "cab abc abd", "abc   abd"}) {
      Encoding e = enc.encode(text, 32);
      CHECK(rtdlab::decode(e.ids, v) == rtdlab::normalize_text(text));
    }
  }

  TEST_CASE("vocab save/load round-trips and validates") {
    std::istringstream corpus("ab ab cd cd");
    WordPieceTrainConfig cfg;
    cfg.target_size = 16;
    Vocab v = rtdlab::train_vocab(corpus, cfg);
    const std::string path = temp_path("rtdlab_vocab_roundtrip.txt");
    v.save(path);
    Vocab w = Vocab::load(path);
    CHECK(w.tokens() == v.tokens());
    std::remove(path.c_str());

    const std::string dup = temp_path("rtdlab_vocab_dup.txt");
    {
      std::ofstream out(dup);
      out << "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\na\na\n";
    }
    CHECK_THROWS_WITH_AS((void)Vocab::load(dup), doctest::Contains("line 7"), std::runtime_error);
    std::remove(dup.c_str());

    const std::string empty = temp_path("rtdlab_vocab_empty.txt");
    {
      std::ofstream out(empty);
    }
    CHECK_THROWS_WITH_AS((void)Vocab::load(empty), doctest::Contains("[PAD]"),
                         std::runtime_error);
    std::remove(empty.c_str());

    CHECK_THROWS_WITH_AS(
        (void)Vocab::from_tokens({"[UNK]", "[PAD]", "[CLS]", "[SEP]", "[MASK]"}),
        doctest::Contains("id 0"), std::runtime_error);
  }

  TEST_CASE("long words fall back to [UNK]") {
    Vocab v = make_vocab({"a", "##a"});
    WordPieceEncoder enc(v, 100);
    std::string longword(101, 'a');
    auto words = enc.tokenize_words(longword);
    REQUIRE(words.size() == 1);
    CHECK(words[0].pieces.size() == 1);
    CHECK(words[0].pieces[0].id == v.unk());

    std::string okword(100, 'a');
    auto ok = enc.tokenize_words(okword);
    CHECK(ok[0].pieces.size() == 100);
  }
}
