#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace subsense::subjectivity {

// One word sense. Forms may span several words ("used to").
struct LexiconEntry {
  std::string form;
  std::optional<std::string> pos_tag;
  double subjectivity = 0.0;
  double polarity = 0.0;
  double intensity = 1.0;
};

// Checks the field ranges; returns an explanation when invalid.
std::optional<std::string> validate(const LexiconEntry& entry);

// Sense-averaged view of one form, used during matching.
struct FormScore {
  double subjectivity = 0.0;
  double polarity = 0.0;
  double intensity = 1.0;
  std::size_t n_words = 1;
};

class SubjectivityLexicon {
 public:
  SubjectivityLexicon() = default;

  // Adds a sense; lowercases the form. Throws ContractError if invalid.
  void add(LexiconEntry entry);
  void add_negation(std::string word);

  std::size_t entry_count() const { return n_entries_; }
  std::size_t form_count() const { return senses_.size(); }
  std::size_t max_form_words() const { return max_form_words_; }
  bool empty() const { return n_entries_ == 0; }

  std::span<const LexiconEntry> senses(std::string_view form) const;
  const FormScore* find(std::string_view form) const;
  bool is_negation(std::string_view word) const;
  const std::unordered_set<std::string>& negations() const { return negations_; }

 private:
  std::unordered_map<std::string, std::vector<LexiconEntry>> senses_;
  std::unordered_map<std::string, FormScore> averaged_;
  std::unordered_set<std::string> negations_;
  std::size_t n_entries_ = 0;
  std::size_t max_form_words_ = 0;
};

struct LoadResult {
  SubjectivityLexicon lexicon;
  std::size_t skipped = 0;  // malformed records
};

inline const std::vector<std::string> kDefaultNegations = {"no", "not", "n't",
                                                           "never"};

// XML lexicon: one <word form=".." pos=".." polarity=".." subjectivity=".."
// intensity=".."/> element per line. Negations come from a companion
// one-word-per-line file; the built-in list is used when none is given.
// Files ending in .tsv are read as form<TAB>subjectivity<TAB>polarity<TAB>
// intensity instead.
LoadResult load_lexicon(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& negations = {});
LoadResult load_lexicon_xml(const std::filesystem::path& path);
LoadResult load_lexicon_tsv(const std::filesystem::path& path);
std::vector<std::string> load_negations(const std::filesystem::path& path);

// Bundled lexicon; $SUBSENSE_LEXICON overrides the path.
std::filesystem::path default_lexicon_path();
std::filesystem::path default_negations_path();
const SubjectivityLexicon& reference_lexicon();

struct Assessment {
  std::size_t first = 0;  // token index of the modifier or match start
  std::size_t last = 0;   // one past the final matched token
  double subjectivity = 0.0;
  double polarity = 0.0;
};

// Left-to-right longest-match scan over pre-split lowercase word tokens.
// A match directly preceded by a matched entry with intensity != 1 absorbs
// that entry: the modifier's own assessment is replaced by the match's
// subjectivity times the modifier intensity, clamped to [0, 1].
std::vector<Assessment> assess(std::span<const std::string> tokens,
                               const SubjectivityLexicon& lexicon);

struct SubjectivityScore {
  double value = 0.0;
  std::size_t matched_count = 0;
};

SubjectivityScore score(std::string_view text, const SubjectivityLexicon& lexicon);

}  // namespace subsense::subjectivity
