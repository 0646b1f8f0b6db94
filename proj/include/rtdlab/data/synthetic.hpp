#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Desk-scale stand-in for a pretraining corpus: an order-2 Markov token
// stream with planted deterministic bigrams (whenever token a appears, token
// b always follows), giving both the masked-token and replaced-token
// objectives a learnable signal. The language structure (planted pairs and
// transition tables) is fixed by vocabulary shape and dialect_salt alone;
// spec.seed only drives the sampling, so different seeds draw different
// streams from the same language. dialect_salt reshapes transitions while
// leaving the unigram distribution untouched, which makes dialect identity
// invisible to bag-of-tokens statistics and visible only to models that read
// context.

namespace rtdlab {

struct SyntheticLangSpec {
  std::int32_t vocab_size = 2000;
  std::int32_t doc_length = 128;    // documents may run one token longer, see below
  std::int32_t planted_pairs = 32;  // deterministic a -> b bigrams
  double follow_prob = 0.7;         // weight of the context-driven branch
  std::uint64_t seed = 1;
  std::uint32_t dialect_salt = 0;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<std::vector<std::int32_t>> train_docs;
  std::vector<std::vector<std::int32_t>> heldout_docs;  // every 20th document
  std::vector<std::pair<std::int32_t, std::int32_t>> planted;
};

// Token-id documents, split 95/5 by document index. A document that would end
// on a planted left-hand token is extended by its partner so the planted rule
// never has an unseen exception.
SyntheticCorpus gen_synthetic_corpus(const SyntheticLangSpec& spec, std::size_t num_docs);

// The bigrams a spec plants; identical for every seed and dialect_salt.
std::vector<std::pair<std::int32_t, std::int32_t>> planted_pairs_for(
    const SyntheticLangSpec& spec);

// Token id as a three-letter lowercase word, distinct per id.
std::string render_token(std::int32_t id);

// One line of space-separated rendered words per document, blank line
// between documents (the raw-corpus format the readers accept).
void write_corpus_text(const std::string& path,
                       const std::vector<std::vector<std::int32_t>>& docs);

}  // namespace rtdlab
