#include "rtdlab/eval/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "rtdlab/tokenizer/normalize.hpp"

namespace rtdlab {

namespace {

constexpr char32_t kTatweel = 0x0640;

bool is_stripped_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') || (cp >= '[' && cp <= '`') ||
           (cp >= '{' && cp <= '~');
  }
  switch (cp) {
    case 0x00AB: case 0x00BB:               // guillemets
    case 0x060C: case 0x061B: case 0x061F:  // Arabic comma, semicolon, question mark
    case 0x066A: case 0x066B: case 0x066C:  // Arabic percent and separators
    case 0x06D4:                            // Arabic full stop
      return true;
    default:
      return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E);
  }
}

bool is_article(const std::string& word) {
  return word == "a" || word == "an" || word == "the";
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

struct PrfCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

PrfMetrics to_metrics(const PrfCounts& c) {
  PrfMetrics m;
  if (c.tp + c.fp + c.fn == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  return m;
}

PrfCounts count_span_matches(const std::vector<std::vector<std::string>>& gold_tags,
                             const std::vector<std::vector<std::string>>& pred_tags,
                             const std::string& only_label) {
  if (gold_tags.size() != pred_tags.size()) {
    throw std::invalid_argument("entity_f1: gold and prediction sentence counts differ");
  }
  PrfCounts counts;
  for (std::size_t s = 0; s < gold_tags.size(); ++s) {
    if (gold_tags[s].size() != pred_tags[s].size()) {
      throw std::invalid_argument("entity_f1: sentence " + std::to_string(s) +
                                  " has mismatched tag counts");
    }
    auto gold = decode_iob2(gold_tags[s]);
    auto pred = decode_iob2(pred_tags[s]);
    if (!only_label.empty()) {
      std::erase_if(gold, [&](const EntitySpan& e) { return e.label != only_label; });
      std::erase_if(pred, [&](const EntitySpan& e) { return e.label != only_label; });
    }
    for (const EntitySpan& p : pred) {
      if (std::find(gold.begin(), gold.end(), p) != gold.end()) {
        counts.tp += 1;
      } else {
        counts.fp += 1;
      }
    }
    for (const EntitySpan& g : gold) {
      if (std::find(pred.begin(), pred.end(), g) == pred.end()) counts.fn += 1;
    }
  }
  return counts;
}

struct F1Row {
  double f1 = 0.0;
  std::int64_t gold_count = 0;
  bool absent = false;
};

std::vector<F1Row> per_class_f1(const std::vector<std::int32_t>& gold,
                                const std::vector<std::int32_t>& pred, std::int32_t classes,
                                const char* caller) {
  if (classes <= 0) {
    throw std::invalid_argument(std::string(caller) + ": classes must be positive");
  }
  if (gold.size() != pred.size()) {
    throw std::invalid_argument(std::string(caller) + ": gold and prediction lengths differ");
  }
  std::vector<PrfCounts> counts(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= classes || pred[i] < 0 || pred[i] >= classes) {
      throw std::invalid_argument(std::string(caller) + ": label outside [0, classes) at index " +
                                  std::to_string(i));
    }
    if (gold[i] == pred[i]) {
      counts[static_cast<std::size_t>(gold[i])].tp += 1;
    } else {
      counts[static_cast<std::size_t>(pred[i])].fp += 1;
      counts[static_cast<std::size_t>(gold[i])].fn += 1;
    }
  }
  std::vector<F1Row> rows(static_cast<std::size_t>(classes));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    rows[c].gold_count = counts[c].tp + counts[c].fn;
    rows[c].absent = counts[c].tp + counts[c].fp + counts[c].fn == 0;
    rows[c].f1 = to_metrics(counts[c]).f1;
  }
  return rows;
}

}  // namespace

std::string normalize_answer(const std::string& text, const NormalizationRules& rules) {
  std::vector<char32_t> kept;
  for (char32_t cp : decode_utf8(text)) {
    if (rules.strip_diacritics && (cp == kTatweel || is_tashkeel(cp))) continue;
    if (rules.strip_punctuation && is_stripped_punct(cp)) continue;
    if (rules.fold_alef && (cp == 0x0622 || cp == 0x0623 || cp == 0x0625)) cp = 0x0627;
    if (rules.fold_ta_marbuta && cp == 0x0629) cp = 0x0647;
    if (rules.latin_articles && cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
    kept.push_back(cp);
  }
  std::string flat = encode_utf8(kept);
  if (rules.latin_articles || rules.collapse_whitespace) {
    std::vector<std::string> words = split_words(flat);
    if (rules.latin_articles) {
      std::erase_if(words, [](const std::string& w) { return is_article(w); });
    }
    std::string joined;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) joined += ' ';
      joined += words[i];
    }
    return joined;
  }
  return flat;
}

int squad_em(const std::string& prediction, const std::vector<std::string>& golds,
             const NormalizationRules& rules) {
  if (golds.empty()) throw std::invalid_argument("squad_em: need at least one gold answer");
  const std::string pred = normalize_answer(prediction, rules);
  for (const std::string& gold : golds) {
    if (pred == normalize_answer(gold, rules)) return 1;
  }
  return 0;
}

double squad_f1(const std::string& prediction, const std::vector<std::string>& golds,
                const NormalizationRules& rules) {
  if (golds.empty()) throw std::invalid_argument("squad_f1: need at least one gold answer");
  const std::vector<std::string> pred = split_words(normalize_answer(prediction, rules));
  double best = 0.0;
  for (const std::string& raw : golds) {
    const std::vector<std::string> gold = split_words(normalize_answer(raw, rules));
    double f1;
    if (pred.empty() || gold.empty()) {
      f1 = pred.empty() && gold.empty() ? 1.0 : 0.0;
    } else {
      std::unordered_map<std::string, std::int64_t> bag;
      for (const std::string& t : gold) bag[t] += 1;
      std::int64_t overlap = 0;
      for (const std::string& t : pred) {
        auto it = bag.find(t);
        if (it != bag.end() && it->second > 0) {
          it->second -= 1;
          overlap += 1;
        }
      }
      if (overlap == 0) {
        f1 = 0.0;
      } else {
        const double p = static_cast<double>(overlap) / static_cast<double>(pred.size());
        const double r = static_cast<double>(overlap) / static_cast<double>(gold.size());
        f1 = 2.0 * p * r / (p + r);
      }
    }
    best = std::max(best, f1);
  }
  return best;
}

double macro_f1(const std::vector<std::int32_t>& gold, const std::vector<std::int32_t>& pred,
                std::int32_t classes) {
  const auto rows = per_class_f1(gold, pred, classes, "macro_f1");
  double sum = 0.0;
  for (const F1Row& row : rows) sum += row.absent ? 1.0 : row.f1;
  return sum / static_cast<double>(rows.size());
}

double weighted_f1(const std::vector<std::int32_t>& gold, const std::vector<std::int32_t>& pred,
                   std::int32_t classes) {
  const auto rows = per_class_f1(gold, pred, classes, "weighted_f1");
  double sum = 0.0;
  std::int64_t total = 0;
  for (const F1Row& row : rows) {
    sum += row.f1 * static_cast<double>(row.gold_count);
    total += row.gold_count;
  }
  return total > 0 ? sum / static_cast<double>(total) : 0.0;
}

bool operator==(const EntitySpan& a, const EntitySpan& b) {
  return a.label == b.label && a.start == b.start && a.end == b.end;
}

const std::vector<std::string>& ner_tag_names() {
  static const std::vector<std::string> names = {"O",     "B-ORG", "I-ORG", "B-PER", "I-PER",
                                                 "B-LOC", "I-LOC", "B-MISC", "I-MISC"};
  return names;
}

std::int32_t ner_tag_id(const std::string& tag) {
  const auto& names = ner_tag_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == tag) return static_cast<std::int32_t>(i);
  }
  throw std::invalid_argument("ner_tag_id: unknown tag \"" + tag + "\"");
}

std::vector<EntitySpan> decode_iob2(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  std::string open;  // type of the span currently being extended
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    ner_tag_id(tag);
    if (tag == "O") {
      open.clear();
      continue;
    }
    const std::string type = tag.substr(2);
    if (tag[0] == 'I' && type == open) {
      spans.back().end = static_cast<std::int32_t>(i);
    } else {
      spans.push_back({type, static_cast<std::int32_t>(i), static_cast<std::int32_t>(i)});
      open = type;
    }
  }
  return spans;
}

PrfMetrics entity_f1(const std::vector<std::vector<std::string>>& gold_tags,
                     const std::vector<std::vector<std::string>>& pred_tags) {
  return to_metrics(count_span_matches(gold_tags, pred_tags, ""));
}

PrfMetrics entity_f1_macro(const std::vector<std::vector<std::string>>& gold_tags,
                           const std::vector<std::vector<std::string>>& pred_tags) {
  static const std::vector<std::string> types = {"ORG", "PER", "LOC", "MISC"};
  PrfMetrics mean;
  for (const std::string& type : types) {
    const PrfMetrics m = to_metrics(count_span_matches(gold_tags, pred_tags, type));
    mean.precision += m.precision / static_cast<double>(types.size());
    mean.recall += m.recall / static_cast<double>(types.size());
    mean.f1 += m.f1 / static_cast<double>(types.size());
  }
  return mean;
}

}  // namespace rtdlab
