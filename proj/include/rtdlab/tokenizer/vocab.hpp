#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

// Token vocabulary with the five special tokens required by masking and the
// fine-tuning input layouts. Immutable once constructed; lookups are safe for
// concurrent use.

namespace rtdlab {

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";

class Vocab {
 public:
  Vocab() = default;

  // Builds from id-ordered tokens. Validates: no duplicates, no empty
  // non-special entries, all five specials present, [PAD] at id 0.
  static Vocab from_tokens(std::vector<std::string> tokens);

  // The five specials followed by nothing else; seed for the trainer.
  static std::vector<std::string> special_tokens();

  std::size_t size() const { return id_to_token_.size(); }

  // -1 when the token is absent.
  std::int32_t id(const std::string& token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(const std::string& token) const { return id(token) >= 0; }

  std::int32_t pad() const { return pad_; }
  std::int32_t unk() const { return unk_; }
  std::int32_t cls() const { return cls_; }
  std::int32_t sep() const { return sep_; }
  std::int32_t mask() const { return mask_; }
  bool is_special(std::int32_t id) const {
    return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
  }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // One token per line, id = zero-based line number.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::int32_t pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1, mask_ = -1;
};

}  // namespace rtdlab
