#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Task metrics: exact-match and token-bag F1 for extractive QA (with
// Arabic-aware answer normalization), macro/weighted F1 for classification,
// and entity-level F1 over IOB2 tag sequences. All functions are pure.

namespace rtdlab {

// Answer normalization applied to predictions and golds before comparison.
// Defaults keep diacritic and tatweel stripping on but leave the alef and
// ta-marbuta folds off; both folds are exposed for looser matching.
struct NormalizationRules {
  bool strip_punctuation = true;
  bool strip_diacritics = true;  // tashkeel marks and tatweel
  bool fold_alef = false;        // alef-with-hamza/madda variants to bare alef
  bool fold_ta_marbuta = false;  // ta marbuta to ha
  bool collapse_whitespace = true;
  bool latin_articles = true;  // lowercase Latin letters, drop a/an/the
};

// Idempotent: normalize_answer(normalize_answer(s)) == normalize_answer(s).
// Dropping article words canonicalizes word separators to single spaces, so
// latin_articles implies whitespace collapsing for strings that contain
// articles either way.
std::string normalize_answer(const std::string& text, const NormalizationRules& rules = {});

// 1 iff the normalized prediction equals any normalized gold. Throws
// std::invalid_argument when golds is empty.
int squad_em(const std::string& prediction, const std::vector<std::string>& golds,
             const NormalizationRules& rules = {});

// Max over golds of the token-bag F1 between normalized whitespace tokens,
// counting duplicates with multiplicity. Both sides empty -> 1, exactly one
// empty -> 0. Throws when golds is empty.
double squad_f1(const std::string& prediction, const std::vector<std::string>& golds,
                const NormalizationRules& rules = {});

// Unweighted mean over the `classes` per-class F1 scores. A class absent from
// both gold and prediction contributes F1 = 1. Throws on length mismatch or a
// label outside [0, classes).
double macro_f1(const std::vector<std::int32_t>& gold, const std::vector<std::int32_t>& pred,
                std::int32_t classes);

// Same confusion matrix, classes weighted by their gold frequency; classes
// with no gold occurrences carry zero weight.
double weighted_f1(const std::vector<std::int32_t>& gold, const std::vector<std::int32_t>& pred,
                   std::int32_t classes);

struct EntitySpan {
  std::string label;       // ORG, PER, LOC, MISC
  std::int32_t start = 0;  // inclusive word indices
  std::int32_t end = 0;
};

bool operator==(const EntitySpan& a, const EntitySpan& b);

// The 9 token tags: O first, then B-/I- per entity type.
const std::vector<std::string>& ner_tag_names();
std::int32_t ner_tag_id(const std::string& tag);  // throws on unknown tags

// IOB2 span decoding with the standard repair: I-X continues an open X span;
// after O, start of sentence, or a different type it starts a new X span.
// Throws on tags outside ner_tag_names().
std::vector<EntitySpan> decode_iob2(const std::vector<std::string>& tags);

struct PrfMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged exact-match span F1 over all sentences. Sentence lists must
// have equal shapes. No gold and no predicted spans at all -> all three
// metrics are 1 by convention.
PrfMetrics entity_f1(const std::vector<std::vector<std::string>>& gold_tags,
                     const std::vector<std::vector<std::string>>& pred_tags);

// Mean over the four entity types of the per-type span F1 (same conventions).
PrfMetrics entity_f1_macro(const std::vector<std::vector<std::string>>& gold_tags,
                           const std::vector<std::vector<std::string>>& pred_tags);

}  // namespace rtdlab
