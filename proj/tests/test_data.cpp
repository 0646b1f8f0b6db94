#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rtdlab/data/readers.hpp"
#include "rtdlab/data/synthetic.hpp"

using rtdlab::SyntheticLangSpec;

namespace {

namespace fs = std::filesystem;

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / ("rtdlab_data_" + name);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  return p;
}

const char* kMinimalSquad = R"({
  "data": [
    {"paragraphs": [
      {"context": "The capital of France is Paris.",
       "qas": [
         {"id": "q1", "question": "What is the capital of France?",
          "answers": [{"text": "Paris", "answer_start": 25}]}
       ]}
    ]}
  ]
})";

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("minimal QA file yields one validated example") {
    auto path = write_temp("squad_min.json", kMinimalSquad);
    auto got = rtdlab::read_squad_json(path.string());
    REQUIRE(got.examples.size() == 1);
    CHECK(got.report.total == 1);
    CHECK(got.report.kept == 1);
    CHECK(got.report.dropped == 0);
    const auto& ex = got.examples[0];
    CHECK(ex.id == "q1");
    CHECK(ex.answers.size() == 1);
    CHECK(ex.answers[0].text == "Paris");
    CHECK(ex.answers[0].char_start == 25);
  }

  TEST_CASE("mismatched answer_start is dropped and reported") {
    std::string body = kMinimalSquad;
    const std::string needle = "\"answer_start\": 25";
    body.replace(body.find(needle), needle.size(), "\"answer_start\": 3");
    auto path = write_temp("squad_bad.json", body);
    auto got = rtdlab::read_squad_json(path.string());
    CHECK(got.examples.empty());
    CHECK(got.report.total == 1);
    CHECK(got.report.kept == 0);
    CHECK(got.report.dropped == 1);
    REQUIRE(got.report.notes.size() == 1);
    CHECK(got.report.notes[0].find("answers[0]") != std::string::npos);
    CHECK(got.report.kept + got.report.dropped == got.report.total);
  }

  TEST_CASE("answer offsets are code points, not bytes") {
    // the two-codepoint Arabic prefix shifts byte offsets but not cp offsets
    auto path = write_temp("squad_cp.json", R"({
      "data": [{"paragraphs": [{
        "context": "مع Paris",
        "qas": [{"id": "q", "question": "?", "answers": [{"text": "Paris", "answer_start": 3}]}]
      }]}]
    })");
    auto got = rtdlab::read_squad_json(path.string());
    REQUIRE(got.examples.size() == 1);
    CHECK(got.examples[0].answers.size() == 1);
  }

  TEST_CASE("two paragraphs with two questions each give four examples") {
    auto path = write_temp("squad4.json", R"({
      "data": [{"paragraphs": [
        {"context": "alpha beta",
         "qas": [
           {"id": "a", "question": "?", "answers": [{"text": "alpha", "answer_start": 0}]},
           {"id": "b", "question": "?", "answers": [{"text": "beta", "answer_start": 6}]}
         ]},
        {"context": "gamma delta",
         "qas": [
           {"id": "c", "question": "?", "answers": [{"text": "gamma", "answer_start": 0}]},
           {"id": "d", "question": "?", "answers": [{"text": "delta", "answer_start": 6}]}
         ]}
      ]}]
    })");
    auto got = rtdlab::read_squad_json(path.string());
    CHECK(got.examples.size() == 4);
    CHECK(got.report.total == 4);
    // order preserved
    CHECK(got.examples[0].id == "a");
    CHECK(got.examples[3].id == "d");
  }

  TEST_CASE("structural QA errors name the path into the document") {
    auto missing = write_temp("squad_missing.json", R"({
      "data": [{"paragraphs": [{"context": "x", "qas": [{"id": "q", "answers": []}]}]}]
    })");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_squad_json(missing.string()),
                         doctest::Contains("$.data[0].paragraphs[0].qas[0].question"),
                         std::runtime_error);

    auto broken = write_temp("squad_broken.json", "{ not json");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_squad_json(broken.string()),
                         doctest::Contains("malformed JSON"), std::runtime_error);
  }

  TEST_CASE("conll reader splits sentences and keeps word counts") {
    auto path = write_temp("two.conll",
                           "John B-PER\n"
                           "lives O\n"
                           "here O\n"
                           "\n"
                           "Acme B-ORG\n"
                           "Corp I-ORG\n");
    auto got = rtdlab::read_conll(path.string());
    REQUIRE(got.size() == 2);
    CHECK(got[0].words.size() == 3);
    CHECK(got[0].tags == std::vector<std::string>{"B-PER", "O", "O"});
    CHECK(got[1].words == std::vector<std::string>{"Acme", "Corp"});
    CHECK(got[1].tags == std::vector<std::string>{"B-ORG", "I-ORG"});

    // trailing blank line must not change the result
    auto with_blank = write_temp("two_blank.conll",
                                 "John B-PER\nlives O\nhere O\n\nAcme B-ORG\nCorp I-ORG\n\n");
    auto again = rtdlab::read_conll(with_blank.string());
    REQUIRE(again.size() == 2);
    CHECK(again[1].tags == got[1].tags);
  }

  TEST_CASE("bare tags are normalized to IOB2 by span position") {
    auto path = write_temp("bare.conll",
                           "Cairo LOC\n"
                           "city LOC\n"
                           "is O\n"
                           "big LOC\n");
    auto got = rtdlab::read_conll(path.string());
    REQUIRE(got.size() == 1);
    CHECK(got[0].tags == std::vector<std::string>{"B-LOC", "I-LOC", "O", "B-LOC"});
  }

  TEST_CASE("span-opening I- tags and the PERS alias are normalized") {
    auto path = write_temp("repair.conll",
                           "Ahmed I-PERS\n"
                           "Ali I-PERS\n"
                           "visited O\n"
                           "Cairo I-LOC\n");
    auto got = rtdlab::read_conll(path.string());
    REQUIRE(got.size() == 1);
    CHECK(got[0].tags == std::vector<std::string>{"B-PER", "I-PER", "O", "B-LOC"});
  }

  TEST_CASE("conll rejects ragged lines and unknown tags with line numbers") {
    auto ragged = write_temp("ragged.conll", "word B-PER extra\n");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_conll(ragged.string()), doctest::Contains(":1:"),
                         std::runtime_error);

    auto unknown = write_temp("unknown.conll", "ok O\nword B-ANIMAL\n");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_conll(unknown.string()),
                         doctest::Contains("ANIMAL"), std::runtime_error);
    CHECK_THROWS_WITH_AS((void)rtdlab::read_conll(unknown.string()), doctest::Contains(":2:"),
                         std::runtime_error);
  }

  TEST_CASE("tsv reader accepts integers and declared label names") {
    auto numeric = write_temp("five.tsv",
                              "text\tlabel\n"
                              "terrible\t0\n"
                              "bad\t1\n"
                              "meh\t2\n"
                              "good\t3\n"
                              "great\t4\n");
    auto got = rtdlab::read_tsv_classification(numeric.string());
    REQUIRE(got.size() == 5);
    for (std::int32_t i = 0; i < 5; ++i) CHECK(got[static_cast<std::size_t>(i)].label == i);
    CHECK(got[0].text == "terrible");

    auto named = write_temp("named.tsv",
                            "text\tlabel:very_negative,negative,neutral,positive,very_positive\n"
                            "meh\tneutral\n"
                            "great\tvery_positive\n"
                            "also fine\t3\n");
    auto by_name = rtdlab::read_tsv_classification(named.string());
    REQUIRE(by_name.size() == 3);
    CHECK(by_name[0].label == 2);
    CHECK(by_name[1].label == 4);
    CHECK(by_name[2].label == 3);
  }

  TEST_CASE("tsv reader rejects bad labels and extra tabs with line numbers") {
    auto out_of_range = write_temp("oor.tsv", "text\tlabel\nfine\t1\nbroken\t6\n");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_tsv_classification(out_of_range.string()),
                         doctest::Contains(":3:"), std::runtime_error);

    auto tabbed = write_temp("tabbed.tsv", "text\tlabel\na\tb\t2\n");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_tsv_classification(tabbed.string()),
                         doctest::Contains("two tab-separated columns"), std::runtime_error);

    auto bad_header = write_temp("head.tsv", "content\tlabel\nx\t0\n");
    CHECK_THROWS_WITH_AS((void)rtdlab::read_tsv_classification(bad_header.string()),
                         doctest::Contains(":1:"), std::runtime_error);
  }

  TEST_CASE("corpus documents split on blank lines") {
    auto path = write_temp("corpus.txt",
                           "first doc line one\nline two\n\n\nsecond doc\n\nthird doc\n");
    auto docs = rtdlab::read_corpus_documents(path.string());
    REQUIRE(docs.size() == 3);
    CHECK(docs[0] == "first doc line one\nline two");
    CHECK(docs[1] == "second doc");
    CHECK(docs[2] == "third doc");
  }

  TEST_CASE("sentiment conversion keeps text and maps the five labels") {
    auto csv = write_temp("arsentd.csv",
                          "Tweet,Country,Topic,Sentiment,Sentiment_Target\n"
                          "\"good, really good\",lb,sports,positive,none\n"
                          "awful day,sy,weather,very_negative,day\n"
                          "\"quoted \"\"word\"\"\",jo,politics,neutral,none\n");
    auto tsv = fs::temp_directory_path() / "rtdlab_data_arsentd.tsv";
    CHECK(rtdlab::convert_arsentd(csv.string(), tsv.string()) == 3);

    auto got = rtdlab::read_tsv_classification(tsv.string());
    REQUIRE(got.size() == 3);
    CHECK(got[0].text == "good, really good");
    CHECK(got[0].label == 3);
    CHECK(got[1].label == 0);
    CHECK(got[2].text == "quoted \"word\"");
    CHECK(got[2].label == 2);

    auto bad = write_temp("arsentd_bad.csv", "Tweet,Sentiment\nx,angry\n");
    CHECK_THROWS_WITH_AS((void)rtdlab::convert_arsentd(bad.string(), tsv.string()),
                         doctest::Contains("angry"), std::runtime_error);
  }

  TEST_CASE("same spec generates identical corpora") {
    SyntheticLangSpec spec;
    spec.vocab_size = 64;
    spec.doc_length = 32;
    spec.planted_pairs = 4;
    spec.seed = 9;
    auto a = rtdlab::gen_synthetic_corpus(spec, 40);
    auto b = rtdlab::gen_synthetic_corpus(spec, 40);
    CHECK(a.train_docs == b.train_docs);
    CHECK(a.heldout_docs == b.heldout_docs);
    CHECK(a.planted == b.planted);
    CHECK(a.train_docs.size() == 38);
    CHECK(a.heldout_docs.size() == 2);

    spec.seed = 10;
    auto c = rtdlab::gen_synthetic_corpus(spec, 40);
    CHECK(c.train_docs != a.train_docs);
    CHECK(c.planted == a.planted);  // the language, not the sample, owns the pairs

    spec.dialect_salt = 3;
    auto d = rtdlab::gen_synthetic_corpus(spec, 40);
    CHECK(d.planted == a.planted);
  }

  TEST_CASE("planted bigrams always fire") {
    SyntheticLangSpec spec;
    spec.vocab_size = 64;
    spec.doc_length = 64;
    spec.planted_pairs = 6;
    spec.seed = 4;
    auto corpus = rtdlab::gen_synthetic_corpus(spec, 200);

    std::map<std::int32_t, std::int32_t> partner;
    std::set<std::int32_t> members;
    for (auto [l, r] : corpus.planted) {
      partner[l] = r;
      members.insert(l);
      members.insert(r);
    }
    CHECK(members.size() == 12);  // pairs never share tokens

    std::size_t seen = 0;
    auto check_docs = [&](const std::vector<std::vector<std::int32_t>>& docs) {
      for (const auto& doc : docs) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
          auto it = partner.find(doc[i]);
          if (it == partner.end()) continue;
          REQUIRE(i + 1 < doc.size());  // never document-final
          CHECK(doc[i + 1] == it->second);
          seen += 1;
        }
      }
    };
    check_docs(corpus.train_docs);
    check_docs(corpus.heldout_docs);
    CHECK(seen > 100);  // the signal actually occurs
  }

  TEST_CASE("unigram distribution of unplanted tokens tracks the uniform base") {
    SyntheticLangSpec spec;
    spec.vocab_size = 64;
    spec.doc_length = 250;
    spec.planted_pairs = 4;
    spec.seed = 77;
    auto corpus = rtdlab::gen_synthetic_corpus(spec, 4000);  // one million tokens

    std::set<std::int32_t> planted;
    for (auto [l, r] : corpus.planted) {
      planted.insert(l);
      planted.insert(r);
    }

    std::vector<std::int64_t> counts(static_cast<std::size_t>(spec.vocab_size), 0);
    std::int64_t unplanted_total = 0;
    for (const auto* docs : {&corpus.train_docs, &corpus.heldout_docs}) {
      for (const auto& doc : *docs) {
        for (std::int32_t t : doc) {
          counts[static_cast<std::size_t>(t)] += 1;
          if (!planted.count(t)) unplanted_total += 1;
        }
      }
    }
    REQUIRE(unplanted_total > 500000);
    const double base = 1.0 / double(spec.vocab_size - 8);  // renormalized uniform
    for (std::int32_t t = 0; t < spec.vocab_size; ++t) {
      if (planted.count(t)) continue;
      const double p = double(counts[static_cast<std::size_t>(t)]) / double(unplanted_total);
      CHECK(std::fabs(p - base) < 0.01);
    }
  }

  TEST_CASE("dialect salt changes transitions but not unigram statistics") {
    SyntheticLangSpec spec;
    spec.vocab_size = 64;
    spec.doc_length = 200;
    spec.planted_pairs = 0;
    spec.seed = 5;
    auto a = rtdlab::gen_synthetic_corpus(spec, 500);
    spec.dialect_salt = 1;
    auto b = rtdlab::gen_synthetic_corpus(spec, 500);
    CHECK(a.train_docs != b.train_docs);

    auto unigrams = [&](const rtdlab::SyntheticCorpus& c) {
      std::vector<double> freq(static_cast<std::size_t>(spec.vocab_size), 0.0);
      double total = 0;
      for (const auto& doc : c.train_docs) {
        for (std::int32_t t : doc) {
          freq[static_cast<std::size_t>(t)] += 1;
          total += 1;
        }
      }
      for (auto& f : freq) f /= total;
      return freq;
    };
    auto fa = unigrams(a), fb = unigrams(b);
    for (std::size_t t = 0; t < fa.size(); ++t) CHECK(std::fabs(fa[t] - fb[t]) < 0.01);
  }

  TEST_CASE("rendered corpus round-trips through the raw reader") {
    SyntheticLangSpec spec;
    spec.vocab_size = 32;
    spec.doc_length = 8;
    spec.planted_pairs = 2;
    auto corpus = rtdlab::gen_synthetic_corpus(spec, 6);
    auto path = fs::temp_directory_path() / "rtdlab_data_synth.txt";
    rtdlab::write_corpus_text(path.string(), corpus.train_docs);

    auto docs = rtdlab::read_corpus_documents(path.string());
    REQUIRE(docs.size() == corpus.train_docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::string expect;
      for (std::size_t i = 0; i < corpus.train_docs[d].size(); ++i) {
        if (i) expect += ' ';
        expect += rtdlab::render_token(corpus.train_docs[d][i]);
      }
      CHECK(docs[d] == expect);
    }
    CHECK(rtdlab::render_token(0) == "aaa");
    CHECK(rtdlab::render_token(27) == "abb");
    CHECK_THROWS_AS((void)rtdlab::render_token(26 * 26 * 26), std::invalid_argument);
  }

  TEST_CASE("spec validation enforces the documented bounds") {
    SyntheticLangSpec spec;
    spec.vocab_size = 15;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    spec.planted_pairs = spec.vocab_size;  // would cover the whole vocabulary
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    spec.follow_prob = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    CHECK_NOTHROW(spec.validate());
  }
}
