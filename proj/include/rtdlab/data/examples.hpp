#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rtdlab {

struct QaAnswer {
  std::string text;
  std::int64_t char_start = 0;  // code-point offset into the context
};

struct QaExample {
  std::string id;
  std::string question;
  std::string context;
  std::vector<QaAnswer> answers;
};

struct ClsExample {
  std::string id;
  std::string text;
  std::int32_t label = 0;
};

struct NerExample {
  std::string id;
  std::vector<std::string> words;
  std::vector<std::string> tags;  // IOB2, aligned with words
};

using TaskExample = std::variant<QaExample, ClsExample, NerExample>;

// Ingest bookkeeping: every encountered row is either kept or dropped with a
// note; nothing is repaired silently.
struct QualityReport {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::vector<std::string> notes;
};

}  // namespace rtdlab
