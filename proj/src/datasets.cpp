#include "subsense/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <unordered_map>

#include "subsense/error.hpp"
#include "subsense/identity.hpp"

namespace subsense::datasets {

std::string_view kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::WS: return "ws";
    case DatasetKind::Twitter18k: return "twitter18k";
    case DatasetKind::Twitter42k: return "twitter42k";
    case DatasetKind::Wiki: return "wiki";
    case DatasetKind::Synthetic: return "synthetic";
  }
  return "synthetic";
}

std::optional<DatasetKind> parse_kind(std::string_view name) {
  for (auto k : {DatasetKind::WS, DatasetKind::Twitter18k, DatasetKind::Twitter42k,
                 DatasetKind::Wiki, DatasetKind::Synthetic}) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

int default_max_len(DatasetKind kind) { return kind == DatasetKind::Wiki ? 400 : 128; }

nlohmann::json to_json(const ConversionReport& r) {
  return {{"rows_in", r.rows_in},
          {"kept", r.kept},
          {"dropped", r.dropped},
          {"toxic", r.toxic},
          {"nontoxic", r.nontoxic()}};
}

namespace {

std::string normalize_label(std::string_view raw) {
  std::string out;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::size_t require_column(const csv::Table& t, std::initializer_list<std::string_view> names,
                           std::string_view kind) {
  if (auto c = t.column(names)) return *c;
  throw SchemaError(std::string(kind) + ": missing column " + std::string(*names.begin()));
}

const std::string& field(const csv::Table& t, std::size_t row, std::size_t col) {
  if (col >= t.rows[row].size()) {
    throw SchemaError("row " + std::to_string(t.row_lines[row]) + ": too few fields");
  }
  return t.rows[row][col];
}

std::string row_ref(const csv::Table& t, std::size_t row) {
  return "line " + std::to_string(t.row_lines[row]);
}

// nullopt means the row is dropped.
std::optional<Label> map_label(DatasetKind kind, const std::string& raw) {
  const auto l = normalize_label(raw);
  switch (kind) {
    case DatasetKind::WS:
      if (l == "hate") return Label::Toxic;
      if (l == "nohate") return Label::NonToxic;
      if (l == "relation" || l == "idkskip") return std::nullopt;
      break;
    case DatasetKind::Twitter18k:
      if (l == "racism" || l == "sexism" || l == "both") return Label::Toxic;
      if (l == "neither" || l == "none") return Label::NonToxic;
      break;
    case DatasetKind::Twitter42k:
      if (l == "abusive" || l == "hateful") return Label::Toxic;
      if (l == "normal") return Label::NonToxic;
      if (l == "spam") return std::nullopt;
      break;
    case DatasetKind::Synthetic:
    case DatasetKind::Wiki:
      if (l == "toxic") return Label::Toxic;
      if (l == "nontoxic") return Label::NonToxic;
      break;
  }
  throw SchemaError("unknown label \"" + raw + "\"");
}

constexpr std::string_view kWikiColumns[] = {"toxic",  "severe_toxic", "obscene",
                                              "threat", "insult",       "identity_hate"};

}  // namespace

Conversion convert(DatasetKind kind, const csv::Table& table) {
  const auto kname = kind_name(kind);
  const auto text_col = require_column(table, {"text", "comment_text", "tweet"}, kname);
  const auto id_col = table.column({"id", "rev_id", "tweet_id"});
  std::optional<std::size_t> label_col;
  std::vector<std::size_t> wiki_cols;
  if (kind == DatasetKind::Wiki) {
    for (auto name : kWikiColumns) wiki_cols.push_back(require_column(table, {name}, kname));
  } else {
    label_col = require_column(table, {"label", "class"}, kname);
  }

  Conversion out;
  out.report.rows_in = table.rows.size();
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::optional<Label> label;
    if (kind == DatasetKind::Wiki) {
      bool any = false;
      for (std::size_t i = 0; i < wiki_cols.size(); ++i) {
        const auto& v = field(table, r, wiki_cols[i]);
        if (v == "1") {
          any = true;
        } else if (v != "0") {
          throw SchemaError(std::string(kname) + " " + row_ref(table, r) + ": column " +
                            std::string(kWikiColumns[i]) + " is \"" + v + "\", expected 0 or 1");
        }
      }
      label = any ? Label::Toxic : Label::NonToxic;
    } else {
      try {
        label = map_label(kind, field(table, r, *label_col));
      } catch (const SchemaError& e) {
        throw SchemaError(std::string(kname) + " " + row_ref(table, r) + ": " + e.what());
      }
      if (!label) {
        ++out.report.dropped;
        continue;
      }
    }
    Comment c;
    c.id = id_col ? field(table, r, *id_col)
                  : std::string(kname) + "-" + std::to_string(r + 1);
    c.text = field(table, r, text_col);
    c.label = *label;
    if (!seen.emplace(c.id, r).second) {
      throw SchemaError(std::string(kname) + " " + row_ref(table, r) + ": duplicate id " + c.id);
    }
    if (c.label == Label::Toxic) ++out.report.toxic;
    out.comments.push_back(std::move(c));
  }
  out.report.kept = out.comments.size();
  return out;
}

Conversion convert_file(DatasetKind kind, const std::filesystem::path& path) {
  const char sep = path.extension() == ".tsv" ? '\t' : ',';
  return convert(kind, csv::read_table(path, sep));
}

void write_canonical(std::ostream& out, std::span<const Comment> comments) {
  csv::write_row(out, {"id", "text", "label"});
  for (const auto& c : comments) {
    csv::write_row(out, {c.id, c.text, std::string(label_name(c.label))});
  }
}

void write_canonical(const std::filesystem::path& path, std::span<const Comment> comments) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + path.string());
  write_canonical(out, comments);
  if (!out) throw ResourceError("failed writing " + path.string());
}

std::vector<Comment> read_canonical(const std::filesystem::path& path) {
  const auto table = csv::read_table(path);
  if (!table.column({"id"}) || !table.column({"label"})) {
    throw SchemaError(path.string() + ": expected canonical columns id,text,label");
  }
  return convert(DatasetKind::Synthetic, table).comments;
}

Split split(std::span<const Comment> comments, std::uint64_t seed) {
  const std::size_t n = comments.size();
  if (n < 10) throw ContractError("split: need at least 10 comments, got " + std::to_string(n));
  std::vector<std::size_t> toxic, nontoxic;
  for (std::size_t i = 0; i < n; ++i) {
    (comments[i].label == Label::Toxic ? toxic : nontoxic).push_back(i);
  }
  if (toxic.size() < 3 || nontoxic.size() < 3) {
    throw StratificationError("split: each class needs at least 3 examples (toxic " +
                              std::to_string(toxic.size()) + ", nontoxic " +
                              std::to_string(nontoxic.size()) + ")");
  }
  const std::size_t totals[3] = {n * 8 / 10, n / 10, n - n * 8 / 10 - n / 10};

  // Toxic share of each part: floor of the exact target, then the leftover
  // units go to the largest remainders (earlier parts win ties).
  const std::size_t nt = toxic.size();
  std::size_t take[3];
  std::size_t rem[3];
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    take[p] = totals[p] * nt / n;
    rem[p] = totals[p] * nt % n;
    assigned += take[p];
  }
  std::vector<int> by_rem = {0, 1, 2};
  std::stable_sort(by_rem.begin(), by_rem.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < nt; ++k, ++assigned) ++take[by_rem[k]];

  std::mt19937_64 rng(seed);
  std::shuffle(toxic.begin(), toxic.end(), rng);
  std::shuffle(nontoxic.begin(), nontoxic.end(), rng);

  std::vector<std::size_t> parts[3];
  std::size_t ti = 0, ni = 0;
  for (int p = 0; p < 3; ++p) {
    for (std::size_t k = 0; k < take[p]; ++k) parts[p].push_back(toxic[ti++]);
    for (std::size_t k = take[p]; k < totals[p]; ++k) parts[p].push_back(nontoxic[ni++]);
    std::sort(parts[p].begin(), parts[p].end());
  }
  Split out;
  std::vector<Comment>* dst[3] = {&out.train, &out.val, &out.test};
  for (int p = 0; p < 3; ++p) {
    for (auto i : parts[p]) dst[p]->push_back(comments[i]);
  }
  return out;
}

namespace {

// Neutral words: neither identity terms nor planted forms.
constexpr std::string_view kFiller[] = {
    "the",   "people", "said",    "about",  "this",   "that",   "they",  "went",
    "to",    "market", "today",   "and",    "we",     "talked", "city",  "street",
    "house", "car",    "day",     "night",  "news",   "post",   "read",  "wrote",
    "saw",   "meeting", "school", "work",   "game",   "team",   "bus",   "train",
    "room",  "table",  "window",  "door",   "letter", "phone",  "park",  "river"};

constexpr std::size_t kPlantedPerBand = 40;

}  // namespace

SynthCorpus synth_generate(std::size_t n, double theta, double noise, std::uint64_t seed) {
  if (n < 100) throw ContractError("synth: n must be at least 100");
  if (!(theta > 0.1 && theta < 0.9)) throw ContractError("synth: theta must lie in (0.1, 0.9)");
  if (!(noise >= 0.0 && noise < 0.5)) throw ContractError("synth: noise must lie in [0, 0.5)");

  SynthCorpus out;
  // Planted pseudo-words with evenly spaced subjectivity in each band.
  std::vector<std::pair<std::string, double>> low, high;
  for (std::size_t i = 0; i < kPlantedPerBand; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(kPlantedPerBand - 1);
    low.emplace_back("zql" + std::to_string(i), f * (theta - 0.1));
    high.emplace_back("zqh" + std::to_string(i), theta + 0.1 + f * (0.9 - theta));
  }
  for (const auto* band : {&low, &high}) {
    for (const auto& [form, s] : *band) {
      out.lexicon.add({form, std::nullopt, s, 0.0, 1.0});
      out.planted_forms.insert(form);
    }
  }

  const auto& ids = identity::default_terms().terms();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_filler(0, std::size(kFiller) - 1);
  std::uniform_int_distribution<std::size_t> pick_id(0, ids.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_planted(0, kPlantedPerBand - 1);
  std::uniform_int_distribution<std::size_t> filler_len(4, 8);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(noise);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> words;
    const std::size_t len = filler_len(rng);
    for (std::size_t k = 0; k < len; ++k) words.emplace_back(kFiller[pick_filler(rng)]);

    const bool has_id = coin(rng);
    if (has_id) {
      std::uniform_int_distribution<std::size_t> at(0, words.size());
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), ids[pick_id(rng)]);
    }
    const auto& band = coin(rng) ? high : low;
    for (int k = 0; k < 2; ++k) {
      const auto& form = band[pick_planted(rng)].first;
      std::uniform_int_distribution<std::size_t> at(0, words.size());
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), form);
    }
    // Sum in text order, as the scorer does.
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& w : words) {
      if (const auto* f = out.lexicon.find(w)) {
        sum += f->subjectivity;
        ++count;
      }
    }
    const double planted_score = sum / static_cast<double>(count);

    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    text += " .";

    const bool rule = has_id && planted_score > theta;
    const bool toxic = flip(rng) ? !rule : rule;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", i + 1);
    out.comments.push_back({id, std::move(text), toxic ? Label::Toxic : Label::NonToxic});
    out.planted_scores.push_back(planted_score);
    out.identity_present.push_back(has_id);
    out.rule_label.push_back(rule);
  }
  return out;
}

}  // namespace subsense::datasets
