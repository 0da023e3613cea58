#include "subsense/identity.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "subsense/error.hpp"

namespace subsense::identity {

namespace {

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char to_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Round-half-up of with/total at `decimals` places using integer arithmetic.
std::string fixed_ratio(std::size_t num, std::size_t den, int decimals, int scale) {
  if (den == 0) return "0";
  unsigned long long pow10 = 1;
  for (int i = 0; i < decimals; ++i) pow10 *= 10;
  const unsigned long long scaled =
      (static_cast<unsigned long long>(num) * pow10 * static_cast<unsigned long long>(scale) * 2 + den) /
      (2ULL * den);
  const unsigned long long whole = scaled / pow10;
  const unsigned long long frac = scaled % pow10;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%llu.%0*llu", whole, decimals, frac);
  return buf;
}

}  // namespace

IdentityLexicon::IdentityLexicon(std::span<const std::string> terms,
                                 std::string source_label)
    : source_label_(std::move(source_label)) {
  for (const auto& t : terms) add(t);
}

void IdentityLexicon::add(std::string_view term) {
  std::string t(trim(term));
  std::transform(t.begin(), t.end(), t.begin(), to_lower);
  if (t.empty()) throw ContractError("identity term is empty");
  if (t.find_first_of(" \t\r\n") != std::string::npos) {
    throw ContractError("identity term contains whitespace: '" + t + "'");
  }
  if (lookup_.insert(t).second) terms_.push_back(std::move(t));
}

bool IdentityLexicon::contains(std::string_view term) const {
  std::string t(term);
  std::transform(t.begin(), t.end(), t.begin(), to_lower);
  return lookup_.count(t) != 0;
}

IdentityLexicon IdentityLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read identity term list: " + path.string());
  IdentityLexicon lex;
  lex.source_label_ = path.filename().string();
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    lex.add(t);
  }
  return lex;
}

const IdentityLexicon& default_terms() {
  static const IdentityLexicon lex = [] {
    const std::vector<std::string> terms = {
        "muslim",  "jew",       "jews",   "white",      "islam",
        "blacks",  "muslims",   "women",  "whites",     "gay",
        "black",   "democat",   "islamic", "allah",     "jewish",
        "lesbian", "transgender", "race", "brown",      "woman",
        "mexican", "religion",  "homosexual", "homosexuality", "africans"};
    return IdentityLexicon(terms, "default-25");
  }();
  return lex;
}

IdentityMatch detect(std::string_view text, const IdentityLexicon& lexicon) {
  IdentityMatch out;
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), to_lower);
  for (const auto& term : lexicon.terms()) {
    std::size_t pos = lowered.find(term);
    while (pos != std::string::npos) {
      const std::size_t end = pos + term.size();
      const bool left_ok = pos == 0 || !is_alnum(lowered[pos - 1]);
      const bool right_ok = end == lowered.size() || !is_alnum(lowered[end]);
      if (left_ok && right_ok) out.matches.push_back({term, pos, end});
      pos = lowered.find(term, pos + 1);
    }
  }
  std::sort(out.matches.begin(), out.matches.end(),
            [](const TermMatch& a, const TermMatch& b) {
              return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
            });
  out.present = !out.matches.empty();
  return out;
}

std::string Coverage::percent_text() const {
  return fixed_ratio(with_terms, total, 2, 100) + "%";
}

std::string Coverage::ratio_text() const { return fixed_ratio(with_terms, total, 4, 1); }

Coverage coverage(std::span<const Comment> comments, const IdentityLexicon& lexicon) {
  if (comments.empty()) throw EmptyDatasetError("coverage: no comments");
  Coverage c;
  c.total = comments.size();
  for (const auto& comment : comments) {
    if (detect(comment.text, lexicon).present) ++c.with_terms;
  }
  return c;
}

}  // namespace subsense::identity
