#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace schemex {

using TokenId = std::int32_t;

namespace special {
inline constexpr TokenId kPrompt = 0;  // [P]
inline constexpr TokenId kEntity = 1;  // [E]
inline constexpr TokenId kChild = 2;   // [C]
inline constexpr TokenId kLabel = 3;   // [L]
inline constexpr TokenId kSep = 4;     // [SEP]
inline constexpr TokenId kUnk = 5;     // [UNK]
inline constexpr TokenId kPad = 6;     // [PAD]
inline constexpr TokenId kCount = 7;
}  // namespace special

/// Byte offsets into the UTF-8 source, half-open.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

class Vocabulary {
 public:
  /// Only the seven special tokens.
  Vocabulary();

  /// From an explicit token list; the first seven entries must be the specials.
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

const std::vector<std::string>& special_token_names();

struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<CharSpan> offsets;
  std::string source;

  std::size_t size() const { return ids.size(); }
  std::string_view surface(std::size_t i) const {
    return std::string_view(source).substr(offsets[i].start, offsets[i].end - offsets[i].start);
  }
};

/// Splits on Unicode whitespace and isolates every ASCII punctuation
/// character as its own piece. Returns byte ranges into `text`.
std::vector<CharSpan> split_pieces(std::string_view text);

/// Vocabulary of the 7 specials, then `reserved` (in order), then the most
/// frequent corpus tokens (ties lexicographic) until `max_size` entries.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size,
                       std::span<const std::string> reserved = {});

TokenSeq tokenize(const Vocabulary& vocab, std::string_view text);

}  // namespace schemex
