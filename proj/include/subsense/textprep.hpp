#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "subsense/comment.hpp"

namespace subsense::textprep {

// A token produced by the word splitter together with its byte range
// [begin, end) in the original text.
struct TokenSpan {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

bool is_punct(char c);
bool is_punct_token(std::string_view token);

// Lowercases, splits on whitespace and peels leading/trailing ASCII
// punctuation off each chunk as single-character tokens. Internal
// punctuation ("isn't", "jew-ish") stays inside the word.
std::vector<TokenSpan> word_split_spans(std::string_view text);
std::vector<std::string> word_split(std::string_view text);

class Vocab {
 public:
  static constexpr std::int32_t kCls = 0;
  static constexpr std::int32_t kSep = 1;
  static constexpr std::int32_t kPad = 2;
  static constexpr std::int32_t kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  // Specials only.
  Vocab();
  // Specials followed by `tokens` in order. Throws ContractError on
  // duplicates or if a token collides with a special name.
  explicit Vocab(std::span<const std::string> tokens);

  std::int32_t id(std::string_view token) const;  // kUnk when absent
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
};

// Keeps the (max_size - 4) most frequent tokens whose frequency is at least
// min_freq; ties go to the lexicographically smaller token. Tokens listed
// in `exclude` never enter the vocabulary and encode as UNK.
Vocab build_vocab(std::span<const Comment> corpus, std::size_t max_size,
                  std::size_t min_freq,
                  const std::unordered_set<std::string>& exclude = {});

struct EncodedExample {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  std::size_t n_real = 0;

  std::size_t max_len() const { return ids.size(); }
};

// [CLS] t1..tk [SEP] [PAD]...; k = min(|tokens|, max_len - 2).
EncodedExample encode(std::span<const std::string> tokens, const Vocab& vocab,
                      std::size_t max_len);

// Non-special ids mapped back to tokens (UNK decodes as "[UNK]").
std::vector<std::string> decode(const EncodedExample& encoded,
                                const Vocab& vocab);

}  // namespace subsense::textprep
