#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtdlab/data/examples.hpp"

// File ingestion for the four external formats: SQuAD-style QA JSON, CoNLL
// two-column NER, text<TAB>label classification TSV, and raw pretraining
// corpora with blank-line document boundaries. Readers are deterministic,
// order-preserving, and never mutate example text; dirty rows are dropped and
// surfaced in a quality report instead of repaired.

namespace rtdlab {

struct SquadData {
  std::vector<QaExample> examples;
  QualityReport report;
};

// Nested data/paragraphs/qas structure. Every answer is checked to occur at
// its code-point char_start; answers that do not match are dropped, and a
// question whose answers all fail is dropped and counted.
SquadData read_squad_json(const std::string& path);

// Whitespace-separated word/tag lines, blank line between sentences. Tags are
// normalized to IOB2: bare type names get a B-/I- prefix by span position,
// the ANERcorp spelling PERS becomes PER, and I-X opening a span becomes B-X.
// Unknown tag strings are an error naming the line.
std::vector<NerExample> read_conll(
    const std::string& path,
    const std::vector<std::string>& entity_types = {"PER", "LOC", "ORG", "MISC"});

// Header line `text<TAB>label`, optionally `text<TAB>label:name0,...` to
// declare label names; rows are text<TAB>label with an integer in [0, classes)
// or a declared name. Tabs inside text are a format error.
std::vector<ClsExample> read_tsv_classification(const std::string& path,
                                                std::int32_t classes = 5);

// Raw corpus: UTF-8 text, blank line between documents. One document never
// spans files.
std::vector<std::string> read_corpus_documents(const std::string& path);

// Reduces the upstream sentiment release (CSV with Tweet and Sentiment
// columns among others) to the two-column TSV above, mapping the five
// sentiment names onto labels 0..4 from most negative to most positive.
// Returns the number of converted rows.
std::size_t convert_arsentd(const std::string& csv_path, const std::string& tsv_path);

}  // namespace rtdlab
