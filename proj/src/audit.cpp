#include "subsense/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "subsense/csv.hpp"
#include "subsense/error.hpp"

namespace subsense::audit {

ConfusionCounts confusion(std::span<const Label> preds, std::span<const Label> golds) {
  if (preds.size() != golds.size()) throw ContractError("confusion: length mismatch");
  if (preds.empty()) throw ContractError("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    switch (outcome(preds[i], golds[i])) {
      case Outcome::TP: ++c.tp; break;
      case Outcome::FP: ++c.fp; break;
      case Outcome::TN: ++c.tn; break;
      case Outcome::FN: ++c.fn; break;
    }
  }
  return c;
}

double f1(const ConfusionCounts& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

Outcome outcome(Label pred, Label gold) {
  if (pred == Label::Toxic) return gold == Label::Toxic ? Outcome::TP : Outcome::FP;
  return gold == Label::Toxic ? Outcome::FN : Outcome::TN;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::TP: return "TP";
    case Outcome::FP: return "FP";
    case Outcome::TN: return "TN";
    case Outcome::FN: return "FN";
  }
  return "TP";
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ContractError("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("quantile: p outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return {quantile(s, 0.0), quantile(s, 0.25), quantile(s, 0.5), quantile(s, 0.75),
          quantile(s, 1.0)};
}

std::string BiasCell::id() const {
  return std::string(outcome_name(outcome)) + (with_identity ? "wIT" : "woIT");
}

bool BiasCell::highlighted() const {
  switch (outcome) {
    case Outcome::TP:
    case Outcome::FP: return with_identity;
    case Outcome::TN:
    case Outcome::FN: return !with_identity;
  }
  return false;
}

namespace {

std::size_t cell_index(Outcome o, bool with_identity) {
  return 2 * static_cast<std::size_t>(o) + (with_identity ? 0 : 1);
}

}  // namespace

const BiasCell& BiasReport::cell(Outcome o, bool with_identity) const {
  return cells[cell_index(o, with_identity)];
}

std::vector<const BiasCell*> BiasReport::highlighted() const {
  std::vector<const BiasCell*> out;
  for (const auto& c : cells) {
    if (c.highlighted()) out.push_back(&c);
  }
  return out;
}

BiasReport bias_groups(std::span<const EvalRecord> records) {
  BiasReport r;
  for (int o = 0; o < 4; ++o) {
    for (int w = 0; w < 2; ++w) {
      auto& c = r.cells[cell_index(static_cast<Outcome>(o), w == 0)];
      c.outcome = static_cast<Outcome>(o);
      c.with_identity = w == 0;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!(rec.subjectivity >= 0.0 && rec.subjectivity <= 1.0)) {
      throw ContractError("bias_groups: subjectivity outside [0,1]");
    }
    auto& c = r.cells[cell_index(outcome(rec.pred, rec.gold), rec.identity_present)];
    c.members.push_back(i);
    c.scores.push_back(rec.subjectivity);
  }
  for (auto& c : r.cells) {
    if (!c.scores.empty()) c.stats = quartiles(c.scores);
  }
  return r;
}

BiasReport bias_groups(std::span<const Comment> comments, std::span<const Label> preds,
                       std::span<const Label> golds, const identity::IdentityLexicon& ids,
                       const subjectivity::SubjectivityLexicon& lexicon) {
  if (comments.size() != preds.size() || comments.size() != golds.size()) {
    throw ContractError("bias_groups: comments, predictions and labels are not aligned");
  }
  std::vector<EvalRecord> records;
  records.reserve(comments.size());
  for (std::size_t i = 0; i < comments.size(); ++i) {
    records.push_back({preds[i], golds[i], identity::detect(comments[i].text, ids).present,
                       subjectivity::score(comments[i].text, lexicon).value});
  }
  return bias_groups(records);
}

RunAggregate aggregate(std::span<const RunMetrics> runs) {
  if (runs.empty()) throw ContractError("aggregate: no runs");
  RunAggregate a;
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    a.f1s.push_back(r.f1);
    a.mean_f1 += r.f1;
    a.mean_fp += r.fp;
    a.mean_fn += r.fn;
  }
  a.mean_f1 /= n;
  a.mean_fp /= n;
  a.mean_fn /= n;
  double ss = 0.0;
  for (double f : a.f1s) ss += (f - a.mean_f1) * (f - a.mean_f1);
  a.std_f1 = std::sqrt(ss / n);
  return a;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

namespace {

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// Columns padded to their widest cell, separated by " | ".
std::string render_grid(const std::vector<std::vector<std::string>>& grid) {
  std::vector<std::size_t> width;
  for (const auto& row : grid) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t i = 0; i < grid[r].size(); ++i) {
      if (i) out << " | ";
      out << std::left << std::setw(static_cast<int>(width[i])) << grid[r][i];
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t i = 0; i < width.size(); ++i) {
        if (i) out << "-+-";
        out << std::string(width[i], '-');
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace

std::string f1_std_row(const RunAggregate& agg) { return fmt4(agg.mean_f1) + " | " + fmt4(agg.std_f1); }

std::string render_f1_table(std::span<const NamedAggregate> rows) {
  std::vector<std::vector<std::string>> grid{{"model", "runs", "F1", "std"}};
  for (const auto& r : rows) {
    grid.push_back({r.name, std::to_string(r.aggregate.f1s.size()), fmt4(r.aggregate.mean_f1),
                    fmt4(r.aggregate.std_f1)});
  }
  return render_grid(grid);
}

std::string render_error_table(std::span<const NamedAggregate> rows) {
  std::vector<std::vector<std::string>> grid{{"model", "FP", "FN"}};
  for (const auto& r : rows) {
    grid.push_back({r.name, fmt1(r.aggregate.mean_fp), fmt1(r.aggregate.mean_fn)});
  }
  return render_grid(grid);
}

std::string render_error_comparison(const NamedAggregate& a, const NamedAggregate& b) {
  std::vector<std::vector<std::string>> grid{{"model", "FP", "FN"}};
  grid.push_back({a.name, fmt1(a.aggregate.mean_fp), fmt1(a.aggregate.mean_fn)});
  grid.push_back({b.name, fmt1(b.aggregate.mean_fp), fmt1(b.aggregate.mean_fn)});
  grid.push_back({"delta", fmt1(b.aggregate.mean_fp - a.aggregate.mean_fp),
                  fmt1(b.aggregate.mean_fn - a.aggregate.mean_fn)});
  return render_grid(grid);
}

nlohmann::json to_json(const RunAggregate& agg) {
  return {{"runs", agg.f1s.size()}, {"f1s", agg.f1s},         {"mean_f1", agg.mean_f1},
          {"std_f1", agg.std_f1},   {"mean_fp", agg.mean_fp}, {"mean_fn", agg.mean_fn},
          {"f1_std", f1_std_row(agg)}};
}

std::vector<ErrorEntry> error_list(std::span<const Comment> comments, std::span<const Label> preds,
                                   const identity::IdentityLexicon& ids,
                                   const subjectivity::SubjectivityLexicon& lexicon) {
  if (comments.size() != preds.size()) {
    throw ContractError("error_list: comments and predictions are not aligned");
  }
  std::vector<ErrorEntry> out;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    if (preds[i] == comments[i].label) continue;
    ErrorEntry e;
    e.id = comments[i].id;
    e.text = comments[i].text;
    e.outcome = outcome(preds[i], comments[i].label);
    e.subjectivity = subjectivity::score(comments[i].text, lexicon).value;
    for (const auto& m : identity::detect(comments[i].text, ids).matches) {
      if (std::find(e.identity_terms.begin(), e.identity_terms.end(), m.term) ==
          e.identity_terms.end()) {
        e.identity_terms.push_back(m.term);
      }
    }
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const ErrorEntry& a, const ErrorEntry& b) {
    if (a.subjectivity != b.subjectivity) return a.subjectivity > b.subjectivity;
    return a.id < b.id;
  });
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.bias.cells) {
    nlohmann::json jc = {{"cell", c.id()},
                         {"highlighted", c.highlighted()},
                         {"size", c.members.size()}};
    if (c.stats) {
      jc["quartiles"] = {{"min", c.stats->min},       {"q1", c.stats->q1}, {"median", c.stats->median},
                         {"q3", c.stats->q3},         {"max", c.stats->max}};
    } else {
      jc["quartiles"] = nullptr;
    }
    cells.push_back(std::move(jc));
  }
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : r.errors) {
    errors.push_back({{"id", e.id},
                      {"text", e.text},
                      {"outcome", std::string(outcome_name(e.outcome))},
                      {"subjectivity", e.subjectivity},
                      {"identity_terms", e.identity_terms}});
  }
  return {{"confusion", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
          {"f1", r.f1},
          {"cells", cells},
          {"errors", errors}};
}

std::string render_text(const EvalReport& r) {
  std::ostringstream out;
  out << "F1 " << fmt4(r.f1) << "  (tp " << r.counts.tp << ", fp " << r.counts.fp << ", tn "
      << r.counts.tn << ", fn " << r.counts.fn << ")\n\n";
  std::vector<std::vector<std::string>> grid{
      {"cell", "n", "min", "q1", "median", "q3", "max", ""}};
  for (const auto& c : r.bias.cells) {
    std::vector<std::string> row{c.id(), std::to_string(c.members.size())};
    if (c.stats) {
      for (double v : {c.stats->min, c.stats->q1, c.stats->median, c.stats->q3, c.stats->max})
        row.push_back(fmt4(v));
    } else {
      row.insert(row.end(), 5, "-");
    }
    row.push_back(c.highlighted() ? "*" : "");
    grid.push_back(std::move(row));
  }
  out << render_grid(grid);
  if (!r.errors.empty()) {
    out << "\nerrors (" << r.errors.size() << ")\n";
    std::vector<std::vector<std::string>> eg{{"id", "outcome", "subjectivity", "identity", "text"}};
    for (const auto& e : r.errors) {
      std::string terms;
      for (const auto& t : e.identity_terms) terms += (terms.empty() ? "" : ",") + t;
      std::string text = e.text;
      std::replace(text.begin(), text.end(), '\n', ' ');
      eg.push_back({e.id, std::string(outcome_name(e.outcome)), fmt4(e.subjectivity),
                    terms.empty() ? "-" : terms, text});
    }
    out << render_grid(eg);
  }
  return out.str();
}

void write_cell_csv(std::ostream& out, const BiasReport& bias) {
  csv::write_row(out, {"cell", "index", "subjectivity"});
  for (const auto& c : bias.cells) {
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      csv::write_row(out, {c.id(), std::to_string(c.members[i]), fmt4(c.scores[i])});
    }
  }
}

}  // namespace subsense::audit
