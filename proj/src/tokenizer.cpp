#include "schemex/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace schemex {

namespace {

// Decodes one UTF-8 code point starting at `i`. Invalid sequences decode as
// a single byte so tokenization never fails.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto bits = [&](std::size_t k) { return static_cast<char32_t>(s[i + k] & 0x3F); };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0 && cont(1)) return {((b0 & 0x1Fu) << 6) | bits(1), 2};
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    return {((b0 & 0x0Fu) << 12) | (bits(1) << 6) | bits(2), 3};
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    return {((b0 & 0x07u) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3), 4};
  }
  return {0xFFFD, 1};
}

bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_ascii_punct(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

}  // namespace

const std::vector<std::string>& special_token_names() {
  static const std::vector<std::string> names = {"[P]", "[E]",   "[C]",  "[L]",
                                                 "[SEP]", "[UNK]", "[PAD]"};
  return names;
}

Vocabulary::Vocabulary() : Vocabulary(special_token_names()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
  const auto& specials = special_token_names();
  if (id_to_token_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), id_to_token_.begin())) {
    throw std::invalid_argument("vocabulary must start with the special tokens");
  }
  token_to_id_.reserve(id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + id_to_token_[i] + "'");
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? special::kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

std::vector<CharSpan> split_pieces(std::string_view text) {
  std::vector<CharSpan> out;
  std::size_t word_start = 0;
  bool in_word = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto [cp, len] = decode_utf8(text, i);
    if (is_unicode_space(cp) || is_ascii_punct(cp)) {
      if (in_word) out.push_back({word_start, i});
      in_word = false;
      if (is_ascii_punct(cp)) out.push_back({i, i + len});
    } else if (!in_word) {
      in_word = true;
      word_start = i;
    }
    i += len;
  }
  if (in_word) out.push_back({word_start, text.size()});
  return out;
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size,
                       std::span<const std::string> reserved) {
  if (max_size < 8) throw std::invalid_argument("max_size must be at least 8");

  std::vector<std::string> tokens = special_token_names();
  for (const auto& r : reserved) {
    if (tokens.size() >= max_size) break;
    if (std::find(tokens.begin(), tokens.end(), r) == tokens.end()) tokens.push_back(r);
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (const auto& piece : split_pieces(text)) {
      ++counts[text.substr(piece.start, piece.end - piece.start)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort keeps that tie order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::unordered_set<std::string> taken(tokens.begin(), tokens.end());
  for (const auto& [token, _] : ranked) {
    if (tokens.size() >= max_size) break;
    if (taken.insert(token).second) tokens.push_back(token);
  }
  return Vocabulary(std::move(tokens));
}

TokenSeq tokenize(const Vocabulary& vocab, std::string_view text) {
  TokenSeq seq;
  seq.source = std::string(text);
  seq.offsets = split_pieces(text);
  seq.ids.reserve(seq.offsets.size());
  for (const auto& span : seq.offsets) {
    seq.ids.push_back(vocab.id(text.substr(span.start, span.end - span.start)));
  }
  return seq;
}

}  // namespace schemex
