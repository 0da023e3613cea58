#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "subsense/comment.hpp"
#include "subsense/identity.hpp"
#include "subsense/subjectivity.hpp"

namespace subsense::audit {

// Toxic is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Throws ContractError on length mismatch or empty input.
ConfusionCounts confusion(std::span<const Label> preds, std::span<const Label> golds);
// 2tp / (2tp + fp + fn), or 0 when the denominator is 0.
double f1(const ConfusionCounts& counts);

enum class Outcome { TP = 0, FP = 1, TN = 2, FN = 3 };
Outcome outcome(Label pred, Label gold);
std::string_view outcome_name(Outcome o);

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between closest ranks, h = (n - 1) p on the sorted
// values. Throws ContractError on empty input or p outside [0, 1].
double quantile(std::span<const double> sorted, double p);
Quartiles quartiles(std::span<const double> values);

struct BiasCell {
  Outcome outcome = Outcome::TP;
  bool with_identity = true;
  std::vector<std::size_t> members;  // indices into the evaluated list
  std::vector<double> scores;        // subjectivity of each member
  std::optional<Quartiles> stats;    // absent for an empty cell

  std::string id() const;  // e.g. "TPwIT", "FNwoIT"
  // TPwIT, FPwIT, TNwoIT and FNwoIT.
  bool highlighted() const;
};

struct EvalRecord {
  Label pred = Label::NonToxic;
  Label gold = Label::NonToxic;
  bool identity_present = false;
  double subjectivity = 0.0;
};

struct BiasReport {
  // Index = 2 * outcome + (with_identity ? 0 : 1).
  std::array<BiasCell, 8> cells;

  const BiasCell& cell(Outcome o, bool with_identity) const;
  std::vector<const BiasCell*> highlighted() const;
};

BiasReport bias_groups(std::span<const EvalRecord> records);
// Scores and detects identity terms on each comment; golds come from
// `golds`, not the comments' own labels, so that relabelled views work.
BiasReport bias_groups(std::span<const Comment> comments, std::span<const Label> preds,
                       std::span<const Label> golds, const identity::IdentityLexicon& ids,
                       const subjectivity::SubjectivityLexicon& lexicon);

struct RunMetrics {
  double f1 = 0.0;
  double fp = 0.0;
  double fn = 0.0;
};

struct RunAggregate {
  std::vector<double> f1s;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // population
  double mean_fp = 0.0;
  double mean_fn = 0.0;
};

// Throws ContractError on an empty list.
RunAggregate aggregate(std::span<const RunMetrics> runs);

std::string fmt4(double v);
// "F1 | std", e.g. "0.5952 | 0.0203".
std::string f1_std_row(const RunAggregate& agg);

struct NamedAggregate {
  std::string name;
  RunAggregate aggregate;
};
// Aligned plain-text tables: model / runs / F1 / std, and model / FP / FN.
std::string render_f1_table(std::span<const NamedAggregate> rows);
std::string render_error_table(std::span<const NamedAggregate> rows);
// Two models side by side: model, FP, FN per row plus the FP/FN deltas.
std::string render_error_comparison(const NamedAggregate& a, const NamedAggregate& b);
nlohmann::json to_json(const RunAggregate& agg);

// Misclassified comments for inspection, sorted by descending subjectivity
// then by id.
struct ErrorEntry {
  std::string id;
  std::string text;
  Outcome outcome = Outcome::FP;
  double subjectivity = 0.0;
  std::vector<std::string> identity_terms;
};
std::vector<ErrorEntry> error_list(std::span<const Comment> comments, std::span<const Label> preds,
                                   const identity::IdentityLexicon& ids,
                                   const subjectivity::SubjectivityLexicon& lexicon);

struct EvalReport {
  ConfusionCounts counts;
  double f1 = 0.0;
  BiasReport bias;
  std::vector<ErrorEntry> errors;
};

nlohmann::json to_json(const EvalReport& report);
std::string render_text(const EvalReport& report);
// One row per member: cell, index, subjectivity.
void write_cell_csv(std::ostream& out, const BiasReport& bias);

}  // namespace subsense::audit
