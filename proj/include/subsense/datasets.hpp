#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "subsense/comment.hpp"
#include "subsense/csv.hpp"
#include "subsense/subjectivity.hpp"

namespace subsense::datasets {

enum class DatasetKind { WS, Twitter18k, Twitter42k, Wiki, Synthetic };

std::string_view kind_name(DatasetKind kind);  // "ws", "twitter18k", ...
std::optional<DatasetKind> parse_kind(std::string_view name);
// Encoder length used when none is configured: 400 for Wiki, 128 otherwise.
int default_max_len(DatasetKind kind);

struct ConversionReport {
  std::size_t rows_in = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::size_t toxic = 0;
  std::size_t nontoxic() const { return kept - toxic; }
};
nlohmann::json to_json(const ConversionReport& report);

struct Conversion {
  std::vector<Comment> comments;
  ConversionReport report;
};

// Per-kind schemas (column names are case-insensitive):
//   ws          text,label   hate | nohate
//   twitter18k  text,label   racism | sexism | both | neither
//   twitter42k  text,label   abusive | hateful | normal | spam (dropped)
//   wiki        text or comment_text, plus toxic, severe_toxic, obscene,
//               threat, insult, identity_hate as 0/1
//   synthetic   canonical id,text,label
// Labels are compared after lowercasing and removing non-alphanumerics.
// An optional id column is used when present; otherwise ids are
// "<kind>-<data row number>". Throws SchemaError on missing columns, unknown
// labels (naming the row) or duplicate ids.
Conversion convert(DatasetKind kind, const csv::Table& table);
// Tab-separated when the file ends in .tsv.
Conversion convert_file(DatasetKind kind, const std::filesystem::path& path);

// Canonical CSV: id,text,label with label toxic | nontoxic.
void write_canonical(std::ostream& out, std::span<const Comment> comments);
void write_canonical(const std::filesystem::path& path, std::span<const Comment> comments);
std::vector<Comment> read_canonical(const std::filesystem::path& path);

struct Split {
  std::vector<Comment> train, val, test;
};

// Stratified 80/10/10. Totals are floor(0.8 n), floor(0.1 n) and the rest;
// each class is apportioned across the three parts by largest remainder.
// Throws ContractError for n < 10 and StratificationError when a class has
// fewer than 3 examples.
Split split(std::span<const Comment> comments, std::uint64_t seed);

struct SynthCorpus {
  std::vector<Comment> comments;
  std::vector<double> planted_scores;   // score(text, lexicon) reproduces these
  std::vector<bool> identity_present;
  std::vector<bool> rule_label;         // the generating rule before noise
  subjectivity::SubjectivityLexicon lexicon;
  std::unordered_set<std::string> planted_forms;
};

// Template comments over neutral filler. Half carry one default identity
// term. Each carries two planted words whose subjectivity both lies in
// [0, theta - 0.1] or both in [theta + 0.1, 1]. Label = identity present and
// planted score > theta, flipped with probability `noise`.
// Throws ContractError for n < 100, theta outside (0.1, 0.9) or noise outside
// [0, 0.5).
SynthCorpus synth_generate(std::size_t n, double theta, double noise, std::uint64_t seed);

}  // namespace subsense::datasets
