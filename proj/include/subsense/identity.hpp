#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "subsense/comment.hpp"

namespace subsense::identity {

// Ordered (insertion order), deduplicated list of lowercase single-word terms.
class IdentityLexicon {
 public:
  IdentityLexicon() = default;
  IdentityLexicon(std::span<const std::string> terms, std::string source_label);

  // Throws ContractError for empty terms or terms with internal whitespace.
  void add(std::string_view term);

  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& source_label() const { return source_label_; }
  std::size_t size() const { return terms_.size(); }
  bool contains(std::string_view term) const;

  // One term per line; '#' lines and blank lines are ignored.
  static IdentityLexicon load(const std::filesystem::path& path);

 private:
  std::vector<std::string> terms_;
  std::unordered_set<std::string> lookup_;
  std::string source_label_;
};

// The 25-term list used in the original bias analysis, verbatim
// (including "democat").
const IdentityLexicon& default_terms();

struct TermMatch {
  std::string term;
  std::size_t begin = 0;  // byte offsets into the raw text
  std::size_t end = 0;
};

struct IdentityMatch {
  bool present = false;
  std::vector<TermMatch> matches;  // ordered by position
};

// Case-insensitive whole-word matching on ASCII alphanumeric boundaries.
IdentityMatch detect(std::string_view text, const IdentityLexicon& lexicon);

struct Coverage {
  std::size_t with_terms = 0;
  std::size_t total = 0;

  double ratio() const {
    return total == 0 ? 0.0 : static_cast<double>(with_terms) / static_cast<double>(total);
  }
  // Percentage with two decimals, e.g. "21.20%".
  std::string percent_text() const;
  // Ratio with four decimals, e.g. "0.2120".
  std::string ratio_text() const;
};

// Throws EmptyDatasetError when `comments` is empty.
Coverage coverage(std::span<const Comment> comments, const IdentityLexicon& lexicon);

}  // namespace subsense::identity
