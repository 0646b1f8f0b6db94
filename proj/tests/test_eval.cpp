#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "rtdlab/core/rng.hpp"
#include "rtdlab/eval/metrics.hpp"
#include "rtdlab/tokenizer/normalize.hpp"

using rtdlab::EntitySpan;
using rtdlab::NormalizationRules;
using rtdlab::PrfMetrics;
using rtdlab::Rng;

namespace {

std::string tag_type(const std::string& tag) { return tag.substr(2); }

bool starts_span(const std::vector<std::string>& tags, std::size_t i, const std::string& type) {
  if (tags[i] == "B-" + type) return true;
  if (tags[i] != "I-" + type) return false;
  return i == 0 || tags[i - 1] == "O" || tag_type(tags[i - 1]) != type;
}

// Quadratic re-derivation of the decoded span set: a candidate (s, e, type) is
// a span iff s starts one, every later word continues it with I-type, and the
// following word does not extend it further.
std::vector<EntitySpan> brute_force_spans(const std::vector<std::string>& tags) {
  static const std::vector<std::string> types = {"ORG", "PER", "LOC", "MISC"};
  std::vector<EntitySpan> spans;
  for (std::size_t s = 0; s < tags.size(); ++s) {
    for (const std::string& type : types) {
      if (!starts_span(tags, s, type)) continue;
      for (std::size_t e = s; e < tags.size(); ++e) {
        if (e > s && tags[e] != "I-" + type) break;
        if (e + 1 < tags.size() && tags[e + 1] == "I-" + type) continue;
        spans.push_back({type, static_cast<std::int32_t>(s), static_cast<std::int32_t>(e)});
      }
    }
  }
  return spans;
}

std::vector<std::string> random_tags(Rng& rng, std::size_t len) {
  std::vector<std::string> tags;
  tags.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    tags.push_back(rtdlab::ner_tag_names()[rng.uniform_below(9)]);
  }
  return tags;
}

// Strings mixing Arabic letters, diacritics, Latin words (articles included),
// digits, punctuation, and erratic spacing.
std::string random_text(Rng& rng) {
  static const std::vector<std::string> atoms = {
      "كتاب", "مدينة", "القاهرة", "عاصمة", "مِصْرَ", "ـكبيرـ", "أحمد", "إلى", "آفاق", "جامعة",
      "the",  "The",   "a",       "an",    "data",  "Model",  "42",   "3.5",  ",",    ".",
      "!",    "؟",     "،",       "(x)",   "«y»",   " ",      "  ",   "\t",   "ة",    "ه"};
  std::string out;
  const std::size_t n = 1 + rng.uniform_below(8);
  for (std::size_t i = 0; i < n; ++i) {
    out += atoms[rng.uniform_below(atoms.size())];
    if (rng.uniform_below(2)) out += ' ';
  }
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("normalization strips punctuation and diacritics by default") {
    CHECK(rtdlab::normalize_answer("الجواب.") == "الجواب");
    CHECK(rtdlab::normalize_answer("مِصْرَ") == "مصر");
    CHECK(rtdlab::normalize_answer("كتـــاب") == "كتاب");
    CHECK(rtdlab::normalize_answer("  The  Answer ") == "answer");
    CHECK(rtdlab::normalize_answer("«quoted», (text)!") == "quoted text");
  }

  TEST_CASE("alef and ta-marbuta folds apply only when enabled") {
    NormalizationRules fold;
    fold.fold_alef = true;
    fold.fold_ta_marbuta = true;
    CHECK(rtdlab::normalize_answer("أحمد") == "أحمد");
    CHECK(rtdlab::normalize_answer("أحمد", fold) == "احمد");
    CHECK(rtdlab::normalize_answer("آفاق", fold) == "افاق");
    CHECK(rtdlab::normalize_answer("إلى", fold) == "الى");
    CHECK(rtdlab::normalize_answer("مدينة") == "مدينة");
    CHECK(rtdlab::normalize_answer("مدينة", fold) == "مدينه");
  }

  TEST_CASE("normalization is idempotent under every rule combination") {
    std::vector<NormalizationRules> combos(4);
    combos[1].fold_alef = combos[1].fold_ta_marbuta = true;
    combos[2].latin_articles = false;
    combos[2].collapse_whitespace = false;
    combos[3].strip_diacritics = false;
    combos[3].strip_punctuation = false;
    Rng rng(2024);
    for (int trial = 0; trial < 400; ++trial) {
      const std::string text = random_text(rng);
      for (const auto& rules : combos) {
        const std::string once = rtdlab::normalize_answer(text, rules);
        CHECK(rtdlab::normalize_answer(once, rules) == once);
      }
    }
  }

  TEST_CASE("exact match ignores normalization-invisible differences") {
    CHECK(rtdlab::squad_em("الجواب.", {"الجواب"}) == 1);
    CHECK(rtdlab::squad_em("", {"الجواب"}) == 0);
    CHECK(rtdlab::squad_em("x", {"y", "x."}) == 1);
    CHECK_THROWS_AS((void)rtdlab::squad_em("x", {}), std::invalid_argument);
  }

  TEST_CASE("token-bag f1 matches hand-computed overlaps") {
    CHECK(rtdlab::squad_f1("القاهرة عاصمة", {"عاصمة مصر"}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rtdlab::squad_f1("نفس الجواب", {"نفس الجواب"}) == 1.0);
    // duplicates count with multiplicity: P=1/2, R=1, F1=2/3
    CHECK(rtdlab::squad_f1("ب ب", {"ب"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    NormalizationRules keep_articles;
    keep_articles.latin_articles = false;
    CHECK(rtdlab::squad_f1("a a", {"a"}, keep_articles) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // under default rules the article "a" is stripped from both sides
    CHECK(rtdlab::squad_f1("a a", {"a"}) == 1.0);
    CHECK(rtdlab::squad_f1("", {""}) == 1.0);
    CHECK(rtdlab::squad_f1("x", {""}) == 0.0);
    CHECK(rtdlab::squad_f1("", {"x"}) == 0.0);
    CHECK(rtdlab::squad_f1("b c", {"z", "b"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS((void)rtdlab::squad_f1("x", {}), std::invalid_argument);
  }

  TEST_CASE("em never exceeds f1 and single-gold f1 is symmetric") {
    Rng rng(55);
    for (int trial = 0; trial < 300; ++trial) {
      const std::string a = random_text(rng);
      const std::string b = random_text(rng);
      const double f1 = rtdlab::squad_f1(a, {b});
      CHECK(rtdlab::squad_em(a, {b}) <= f1 + 1e-12);
      CHECK(f1 == rtdlab::squad_f1(b, {a}));
      CHECK(f1 >= 0.0);
      CHECK(f1 <= 1.0);
    }
  }

  TEST_CASE("macro f1 matches the hand-built confusion matrix") {
    CHECK(rtdlab::macro_f1({0, 0, 1, 1}, {0, 1, 1, 1}, 2) ==
          doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    CHECK(rtdlab::macro_f1({0, 1, 2}, {0, 1, 2}, 3) == 1.0);
    // class 2 appears nowhere: contributes F1 = 1 by convention
    CHECK(rtdlab::macro_f1({0, 1}, {0, 1}, 3) == 1.0);
    CHECK(rtdlab::macro_f1({0, 0}, {1, 1}, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS((void)rtdlab::macro_f1({0}, {0, 1}, 2), std::invalid_argument);
    CHECK_THROWS_AS((void)rtdlab::macro_f1({0, 5}, {0, 1}, 2), std::invalid_argument);
  }

  TEST_CASE("macro and weighted f1 agree with a brute-force oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 500; ++trial) {
      const std::int32_t classes = 2 + static_cast<std::int32_t>(rng.uniform_below(5));
      const std::size_t n = 1 + rng.uniform_below(40);
      std::vector<std::int32_t> gold(n), pred(n);
      for (std::size_t i = 0; i < n; ++i) {
        gold[i] = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(classes)));
        pred[i] = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(classes)));
      }
      double macro_sum = 0.0, weighted_sum = 0.0;
      std::int64_t total_gold = 0;
      for (std::int32_t c = 0; c < classes; ++c) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
          tp += gold[i] == c && pred[i] == c;
          fp += gold[i] != c && pred[i] == c;
          fn += gold[i] == c && pred[i] != c;
        }
        double f1;
        if (tp + fp + fn == 0) {
          f1 = 1.0;
        } else if (tp == 0) {
          f1 = 0.0;
        } else {
          const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
          const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
          f1 = 2.0 * p * r / (p + r);
        }
        macro_sum += f1;
        weighted_sum += (tp + fp + fn == 0 ? 0.0 : f1) * static_cast<double>(tp + fn);
        total_gold += tp + fn;
      }
      CHECK(rtdlab::macro_f1(gold, pred, classes) ==
            doctest::Approx(macro_sum / classes).epsilon(1e-12));
      CHECK(rtdlab::weighted_f1(gold, pred, classes) ==
            doctest::Approx(weighted_sum / static_cast<double>(total_gold)).epsilon(1e-12));
    }
  }

  TEST_CASE("iob2 decoding handles starts, continuations, and repairs") {
    using Spans = std::vector<EntitySpan>;
    CHECK(rtdlab::decode_iob2({"O", "O"}) == Spans{});
    CHECK(rtdlab::decode_iob2({"B-PER", "I-PER", "O", "B-LOC"}) ==
          Spans{{"PER", 0, 1}, {"LOC", 3, 3}});
    // repair: orphan continuation starts its own span
    CHECK(rtdlab::decode_iob2({"O", "I-PER"}) == Spans{{"PER", 1, 1}});
    CHECK(rtdlab::decode_iob2({"B-ORG", "I-LOC"}) == Spans{{"ORG", 0, 0}, {"LOC", 1, 1}});
    CHECK(rtdlab::decode_iob2({"B-PER", "B-PER"}) == Spans{{"PER", 0, 0}, {"PER", 1, 1}});
    CHECK_THROWS_AS((void)rtdlab::decode_iob2({"B-XYZ"}), std::invalid_argument);
    CHECK_THROWS_AS((void)rtdlab::ner_tag_id("PER"), std::invalid_argument);
    CHECK(rtdlab::ner_tag_names().size() == 9);
    CHECK(rtdlab::ner_tag_names()[0] == "O");
    for (std::int32_t t = 0; t < 9; ++t) {
      CHECK(rtdlab::ner_tag_id(rtdlab::ner_tag_names()[static_cast<std::size_t>(t)]) == t);
    }
  }

  TEST_CASE("entity f1 matches hand counts and conventions") {
    const std::vector<std::vector<std::string>> gold = {{"B-PER", "I-PER", "O", "O"}};
    const std::vector<std::vector<std::string>> pred = {{"B-PER", "I-PER", "O", "B-LOC"}};
    const PrfMetrics m = rtdlab::entity_f1(gold, pred);
    CHECK(m.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    CHECK(rtdlab::entity_f1({{"O", "B-PER"}}, {{"O", "I-PER"}}).f1 == 1.0);
    CHECK(rtdlab::entity_f1({{"O"}}, {{"O"}}).f1 == 1.0);
    CHECK(rtdlab::entity_f1({{"B-PER"}}, {{"O"}}).f1 == 0.0);
    CHECK_THROWS_AS((void)rtdlab::entity_f1({{"O"}}, {{"O", "O"}}), std::invalid_argument);
    CHECK_THROWS_AS((void)rtdlab::entity_f1({{"O"}}, {}), std::invalid_argument);

    // per-type macro: PER caught, LOC missed, ORG and MISC absent
    const std::vector<std::vector<std::string>> g2 = {{"B-PER", "O", "B-LOC"}};
    const std::vector<std::vector<std::string>> p2 = {{"B-PER", "O", "O"}};
    CHECK(rtdlab::entity_f1_macro(g2, p2).f1 == doctest::Approx(0.75).epsilon(1e-12));
  }

  TEST_CASE("entity f1 equals the brute-force oracle on random tag sequences") {
    Rng rng(4242);
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      const std::size_t len = 1 + rng.uniform_below(12);
      const std::vector<std::string> gold_tags = random_tags(rng, len);
      const std::vector<std::string> pred_tags = random_tags(rng, len);

      auto gold = brute_force_spans(gold_tags);
      auto pred = brute_force_spans(pred_tags);
      CHECK(rtdlab::decode_iob2(gold_tags) == gold);
      CHECK(rtdlab::decode_iob2(pred_tags) == pred);
      for (const EntitySpan& s : gold) {
        CHECK(s.start <= s.end);
        CHECK(s.end < static_cast<std::int32_t>(len));
      }

      std::int64_t match = 0;
      for (const EntitySpan& p : pred) {
        match += std::find(gold.begin(), gold.end(), p) != gold.end();
      }
      tp += match;
      fp += static_cast<std::int64_t>(pred.size()) - match;
      fn += static_cast<std::int64_t>(gold.size()) - match;

      const PrfMetrics one = rtdlab::entity_f1({gold_tags}, {pred_tags});
      const double p1 = pred.empty() && gold.empty() ? 1.0
                        : pred.empty()               ? 0.0
                                                     : static_cast<double>(match) / pred.size();
      const double r1 = pred.empty() && gold.empty() ? 1.0
                        : gold.empty()               ? 0.0
                                                     : static_cast<double>(match) / gold.size();
      CHECK(one.precision == doctest::Approx(p1).epsilon(1e-12));
      CHECK(one.recall == doctest::Approx(r1).epsilon(1e-12));
    }
    // micro-aggregated counts reproduce the batched result
    Rng replay(4242);
    std::vector<std::vector<std::string>> golds, preds;
    for (int trial = 0; trial < 10000; ++trial) {
      const std::size_t len = 1 + replay.uniform_below(12);
      golds.push_back(random_tags(replay, len));
      preds.push_back(random_tags(replay, len));
    }
    const PrfMetrics all = rtdlab::entity_f1(golds, preds);
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    CHECK(all.precision == doctest::Approx(p).epsilon(1e-12));
    CHECK(all.recall == doctest::Approx(r).epsilon(1e-12));
    CHECK(all.f1 == doctest::Approx(2.0 * p * r / (p + r)).epsilon(1e-12));
  }
}
