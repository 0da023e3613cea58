#include "subsense/textprep.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <utility>

#include "subsense/error.hpp"

namespace subsense::textprep {

namespace {

const std::string kSpecialNames[Vocab::kNumSpecials] = {"[CLS]", "[SEP]",
                                                        "[PAD]", "[UNK]"};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

char to_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

bool is_punct_token(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), is_punct);
}

std::vector<TokenSpan> word_split_spans(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    while (pos < n && is_space(text[pos])) ++pos;
    if (pos >= n) break;
    std::size_t chunk_end = pos;
    while (chunk_end < n && !is_space(text[chunk_end])) ++chunk_end;

    std::size_t lo = pos;
    std::size_t hi = chunk_end;
    while (lo < hi && is_punct(text[lo])) {
      out.push_back({std::string(1, text[lo]), lo, lo + 1});
      ++lo;
    }
    std::vector<TokenSpan> trailing;
    while (hi > lo && is_punct(text[hi - 1])) {
      trailing.push_back({std::string(1, text[hi - 1]), hi - 1, hi});
      --hi;
    }
    if (lo < hi) {
      std::string word(text.substr(lo, hi - lo));
      std::transform(word.begin(), word.end(), word.begin(), to_lower);
      out.push_back({std::move(word), lo, hi});
    }
    out.insert(out.end(), std::make_move_iterator(trailing.rbegin()),
               std::make_move_iterator(trailing.rend()));
    pos = chunk_end;
  }
  return out;
}

std::vector<std::string> word_split(std::string_view text) {
  auto spans = word_split_spans(text);
  std::vector<std::string> out;
  out.reserve(spans.size());
  for (auto& s : spans) out.push_back(std::move(s.text));
  return out;
}

Vocab::Vocab() {
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    id_to_token_.push_back(kSpecialNames[i]);
    token_to_id_.emplace(kSpecialNames[i], static_cast<std::int32_t>(i));
  }
}

Vocab::Vocab(std::span<const std::string> tokens) : Vocab() {
  for (const auto& t : tokens) {
    if (t.empty()) throw ContractError("vocab: empty token");
    const auto next = static_cast<std::int32_t>(id_to_token_.size());
    if (!token_to_id_.emplace(t, next).second) {
      throw ContractError("vocab: duplicate token '" + t + "'");
    }
    id_to_token_.push_back(t);
  }
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw ContractError("vocab: id out of range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot write vocab: " + path.string());
  for (const auto& t : id_to_token_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read vocab: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < kNumSpecials) {
    throw SchemaError("vocab file too short: " + path.string());
  }
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (lines[i] != kSpecialNames[i]) {
      throw SchemaError("vocab file: special token mismatch at line " +
                        std::to_string(i));
    }
  }
  return Vocab(std::span<const std::string>(lines).subspan(kNumSpecials));
}

Vocab build_vocab(std::span<const Comment> corpus, std::size_t max_size,
                  std::size_t min_freq,
                  const std::unordered_set<std::string>& exclude) {
  if (corpus.empty()) throw EmptyDatasetError("build_vocab: empty corpus");
  if (max_size <= Vocab::kNumSpecials) {
    throw ContractError("build_vocab: max_size must exceed 4");
  }
  if (min_freq < 1) throw ContractError("build_vocab: min_freq must be >= 1");

  std::map<std::string, std::size_t> counts;
  for (const auto& c : corpus) {
    for (auto& t : word_split(c.text)) {
      if (exclude.count(t)) continue;
      ++counts[std::move(t)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    bool special = false;
    for (const auto& s : kSpecialNames) special = special || tok == s;
    if (!special) ranked.emplace_back(tok, n);
  }
  // `counts` is ordered, so stable_sort keeps lexicographic order on ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t room = max_size - Vocab::kNumSpecials;
  if (ranked.size() > room) ranked.resize(room);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocab(tokens);
}

EncodedExample encode(std::span<const std::string> tokens, const Vocab& vocab,
                      std::size_t max_len) {
  if (max_len < 3) throw ContractError("encode: max_len must be >= 3");
  EncodedExample ex;
  ex.ids.assign(max_len, Vocab::kPad);
  ex.mask.assign(max_len, 0);
  const std::size_t k = std::min(tokens.size(), max_len - 2);
  ex.ids[0] = Vocab::kCls;
  ex.mask[0] = 1;
  for (std::size_t i = 0; i < k; ++i) {
    ex.ids[i + 1] = vocab.id(tokens[i]);
    ex.mask[i + 1] = 1;
  }
  ex.ids[k + 1] = Vocab::kSep;
  ex.mask[k + 1] = 1;
  ex.n_real = k + 2;
  return ex;
}

std::vector<std::string> decode(const EncodedExample& encoded,
                                const Vocab& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < encoded.ids.size(); ++i) {
    const auto id = encoded.ids[i];
    if (id == Vocab::kCls || id == Vocab::kSep || id == Vocab::kPad) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace subsense::textprep
