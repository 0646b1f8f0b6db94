#include "rtdlab/data/synthetic.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "rtdlab/core/rng.hpp"

namespace rtdlab {

namespace {

constexpr std::uint64_t kPlantTag = 0x706c616e74ULL;  // planted-pair stream
constexpr std::uint64_t kGrammarTag = 0x6772616dULL;  // transition tables
constexpr std::uint64_t kDocTag = 0x646f63ULL;        // per-document sampling

std::uint64_t language_key(const SyntheticLangSpec& spec) {
  return derive_seed(kPlantTag, static_cast<std::uint64_t>(spec.vocab_size),
                     static_cast<std::uint64_t>(spec.planted_pairs));
}

// Four candidate continuations per (prev2, prev1) context, fixed by the
// language, weighted 0.4/0.3/0.2/0.1.
std::int32_t transition(const SyntheticLangSpec& spec, std::uint64_t grammar,
                        std::int32_t prev2, std::int32_t prev1, double u) {
  const std::uint64_t ctx =
      derive_seed(grammar, static_cast<std::uint64_t>(prev2) + 1,
                  static_cast<std::uint64_t>(prev1) + 1);
  int j = u < 0.4 ? 0 : u < 0.7 ? 1 : u < 0.9 ? 2 : 3;
  const std::uint64_t pick = splitmix64(ctx + static_cast<std::uint64_t>(j));
  return static_cast<std::int32_t>(pick % static_cast<std::uint64_t>(spec.vocab_size));
}

}  // namespace

void SyntheticLangSpec::validate() const {
  if (vocab_size < 16) {
    throw std::invalid_argument("SyntheticLangSpec: vocab_size must be at least 16, got " +
                                std::to_string(vocab_size));
  }
  if (vocab_size > 26 * 26 * 26) {
    throw std::invalid_argument("SyntheticLangSpec: vocab_size exceeds the renderable 17576");
  }
  if (doc_length < 4) {
    throw std::invalid_argument("SyntheticLangSpec: doc_length must be at least 4");
  }
  if (planted_pairs < 0 || 4 * planted_pairs > vocab_size) {
    throw std::invalid_argument(
        "SyntheticLangSpec: planted pairs may cover at most half the vocabulary");
  }
  if (follow_prob < 0.0 || follow_prob > 1.0) {
    throw std::invalid_argument("SyntheticLangSpec: follow_prob must be in [0, 1]");
  }
}

std::vector<std::pair<std::int32_t, std::int32_t>> planted_pairs_for(
    const SyntheticLangSpec& spec) {
  spec.validate();
  Rng rng(language_key(spec));
  const auto members = rng.sample_without_replacement(spec.vocab_size, 2 * spec.planted_pairs);
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(spec.planted_pairs));
  for (std::int32_t i = 0; i < spec.planted_pairs; ++i) {
    pairs.emplace_back(members[static_cast<std::size_t>(i)],
                       members[static_cast<std::size_t>(i + spec.planted_pairs)]);
  }
  return pairs;
}

SyntheticCorpus gen_synthetic_corpus(const SyntheticLangSpec& spec, std::size_t num_docs) {
  spec.validate();
  SyntheticCorpus out;
  out.planted = planted_pairs_for(spec);

  std::unordered_map<std::int32_t, std::int32_t> partner;
  for (const auto& [left, right] : out.planted) partner.emplace(left, right);

  const std::uint64_t grammar = derive_seed(language_key(spec), kGrammarTag, spec.dialect_salt);

  for (std::size_t d = 0; d < num_docs; ++d) {
    Rng rng(derive_seed(spec.seed, kDocTag, d));
    std::vector<std::int32_t> doc;
    doc.reserve(static_cast<std::size_t>(spec.doc_length) + 1);

    std::int32_t prev2 = -1, prev1 = -1;
    while (doc.size() < static_cast<std::size_t>(spec.doc_length)) {
      std::int32_t next;
      auto forced = partner.find(prev1);
      if (forced != partner.end()) {
        next = forced->second;
      } else if (prev1 >= 0 && prev2 >= 0 && rng.uniform() < spec.follow_prob) {
        next = transition(spec, grammar, prev2, prev1, rng.uniform());
      } else {
        next = static_cast<std::int32_t>(
            rng.uniform_below(static_cast<std::uint64_t>(spec.vocab_size)));
      }
      doc.push_back(next);
      prev2 = prev1;
      prev1 = next;
    }
    auto forced = partner.find(prev1);
    if (forced != partner.end()) doc.push_back(forced->second);

    if (d % 20 == 19) {
      out.heldout_docs.push_back(std::move(doc));
    } else {
      out.train_docs.push_back(std::move(doc));
    }
  }
  return out;
}

std::string render_token(std::int32_t id) {
  if (id < 0 || id >= 26 * 26 * 26) {
    throw std::invalid_argument("render_token: id " + std::to_string(id) + " not renderable");
  }
  std::string word(3, 'a');
  word[0] = static_cast<char>('a' + id / (26 * 26));
  word[1] = static_cast<char>('a' + (id / 26) % 26);
  word[2] = static_cast<char>('a' + id % 26);
  return word;
}

void write_corpus_text(const std::string& path,
                       const std::vector<std::vector<std::int32_t>>& docs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& doc : docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (i) out << ' ';
      out << render_token(doc[i]);
    }
    out << "\n\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace rtdlab
