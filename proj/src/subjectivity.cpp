#include "subsense/subjectivity.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "subsense/error.hpp"
#include "subsense/textprep.hpp"

namespace subsense::subjectivity {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t count_words(std::string_view form) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : form) {
    const bool space = c == ' ';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// Normalizes internal whitespace of a form to single spaces.
std::string normalize_form(std::string_view form) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(form)) {
    if (c == ' ' || c == '\t') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return lowercase(out);
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos) {
      out.push_back('&');
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") out.push_back('&');
    else if (name == "lt") out.push_back('<');
    else if (name == "gt") out.push_back('>');
    else if (name == "quot") out.push_back('"');
    else if (name == "apos") out.push_back('\'');
    else {
      out.append(s.substr(i, semi - i + 1));
    }
    i = semi;
  }
  return out;
}

// Parses the attributes of a single <word .../> element. Returns nullopt on
// any syntax problem.
std::optional<std::unordered_map<std::string, std::string>> parse_word_element(
    std::string_view line) {
  const auto open = line.find("<word");
  if (open == std::string_view::npos) return std::nullopt;
  std::size_t i = open + 5;
  if (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '/' &&
      line[i] != '>') {
    return std::nullopt;
  }
  std::unordered_map<std::string, std::string> attrs;
  while (true) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) return std::nullopt;  // unterminated
    if (line.compare(i, 2, "/>") == 0) return attrs;
    if (line[i] == '>') {
      // Non-self-closing element must close on the same line.
      if (line.find("</word>", i) == std::string_view::npos) return std::nullopt;
      return attrs;
    }
    const auto eq = line.find('=', i);
    if (eq == std::string_view::npos) return std::nullopt;
    const auto name = trim(line.substr(i, eq - i));
    if (name.empty() || name.find_first_of(" \t\"'<>") != std::string_view::npos) {
      return std::nullopt;
    }
    std::size_t q = eq + 1;
    while (q < line.size() && line[q] == ' ') ++q;
    if (q >= line.size() || (line[q] != '"' && line[q] != '\'')) return std::nullopt;
    const char quote = line[q];
    const auto close = line.find(quote, q + 1);
    if (close == std::string_view::npos) return std::nullopt;
    attrs[std::string(name)] = decode_entities(line.substr(q + 1, close - q - 1));
    i = close + 1;
  }
}

bool parse_record(const std::unordered_map<std::string, std::string>& attrs,
                  LexiconEntry& entry) {
  auto get = [&](const char* key) -> const std::string* {
    auto it = attrs.find(key);
    return it == attrs.end() ? nullptr : &it->second;
  };
  const auto* form = get("form");
  const auto* subj = get("subjectivity");
  const auto* pol = get("polarity");
  if (!form || !subj || !pol) return false;
  entry.form = normalize_form(*form);
  const auto s = parse_double(*subj);
  const auto p = parse_double(*pol);
  if (!s || !p) return false;
  entry.subjectivity = *s;
  entry.polarity = *p;
  entry.intensity = 1.0;
  if (const auto* inten = get("intensity")) {
    const auto v = parse_double(*inten);
    if (!v) return false;
    entry.intensity = *v;
  }
  if (const auto* pos = get("pos"); pos && !pos->empty()) entry.pos_tag = *pos;
  return !validate(entry).has_value();
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::optional<std::string> validate(const LexiconEntry& entry) {
  if (entry.form.empty()) return "empty form";
  if (entry.form != lowercase(entry.form)) return "form not lowercase";
  if (!(entry.subjectivity >= 0.0 && entry.subjectivity <= 1.0)) {
    return "subjectivity outside [0,1]";
  }
  if (!(entry.polarity >= -1.0 && entry.polarity <= 1.0)) {
    return "polarity outside [-1,1]";
  }
  if (!(entry.intensity > 0.0)) return "intensity must be > 0";
  return std::nullopt;
}

void SubjectivityLexicon::add(LexiconEntry entry) {
  entry.form = normalize_form(entry.form);
  if (auto why = validate(entry)) {
    throw ContractError("lexicon entry '" + entry.form + "': " + *why);
  }
  const std::string key = entry.form;
  const std::size_t words = count_words(key);
  auto& senses = senses_[key];
  senses.push_back(std::move(entry));
  ++n_entries_;
  max_form_words_ = std::max(max_form_words_, words);

  FormScore avg;
  avg.n_words = words;
  avg.subjectivity = avg.polarity = avg.intensity = 0.0;
  for (const auto& s : senses) {
    avg.subjectivity += s.subjectivity;
    avg.polarity += s.polarity;
    avg.intensity += s.intensity;
  }
  const auto n = static_cast<double>(senses.size());
  avg.subjectivity /= n;
  avg.polarity /= n;
  avg.intensity /= n;
  averaged_[key] = avg;
}

void SubjectivityLexicon::add_negation(std::string word) {
  word = lowercase(trim(word));
  if (!word.empty()) negations_.insert(std::move(word));
}

std::span<const LexiconEntry> SubjectivityLexicon::senses(std::string_view form) const {
  auto it = senses_.find(std::string(form));
  if (it == senses_.end()) return {};
  return it->second;
}

const FormScore* SubjectivityLexicon::find(std::string_view form) const {
  auto it = averaged_.find(std::string(form));
  return it == averaged_.end() ? nullptr : &it->second;
}

bool SubjectivityLexicon::is_negation(std::string_view word) const {
  return negations_.count(std::string(word)) != 0;
}

std::vector<std::string> load_negations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read negations file: " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(t);
  }
  return out;
}

LoadResult load_lexicon_xml(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read lexicon: " + path.string());
  LoadResult result;
  std::string line;
  bool in_comment = false;
  while (std::getline(in, line)) {
    std::string_view view(line);
    // Strip XML comments, which may span lines.
    std::string visible;
    std::size_t i = 0;
    while (i < view.size()) {
      if (in_comment) {
        const auto end = view.find("-->", i);
        if (end == std::string_view::npos) {
          i = view.size();
        } else {
          in_comment = false;
          i = end + 3;
        }
      } else {
        const auto start = view.find("<!--", i);
        if (start == std::string_view::npos) {
          visible.append(view.substr(i));
          i = view.size();
        } else {
          visible.append(view.substr(i, start - i));
          in_comment = true;
          i = start + 4;
        }
      }
    }
    if (visible.find("<word") == std::string::npos) continue;
    LexiconEntry entry;
    const auto attrs = parse_word_element(visible);
    if (!attrs || !parse_record(*attrs, entry)) {
      ++result.skipped;
      continue;
    }
    result.lexicon.add(std::move(entry));
  }
  return result;
}

LoadResult load_lexicon_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read lexicon: " + path.string());
  LoadResult result;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = t.find('\t', start);
      fields.push_back(t.substr(start, tab == std::string_view::npos
                                           ? std::string_view::npos
                                           : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    LexiconEntry entry;
    bool ok = fields.size() == 4;
    if (ok) {
      entry.form = normalize_form(fields[0]);
      const auto s = parse_double(fields[1]);
      const auto p = parse_double(fields[2]);
      const auto i = parse_double(fields[3]);
      ok = s && p && i;
      if (ok) {
        entry.subjectivity = *s;
        entry.polarity = *p;
        entry.intensity = *i;
        ok = !validate(entry).has_value();
      }
    }
    if (!ok) {
      ++result.skipped;
      continue;
    }
    result.lexicon.add(std::move(entry));
  }
  return result;
}

LoadResult load_lexicon(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& negations) {
  if (!std::filesystem::exists(path)) {
    throw ResourceError("lexicon file not found: " + path.string());
  }
  LoadResult result = path.extension() == ".tsv" ? load_lexicon_tsv(path)
                                                 : load_lexicon_xml(path);
  if (result.lexicon.empty()) {
    throw EmptyLexiconError("lexicon has no valid entries: " + path.string());
  }
  if (negations) {
    for (auto& w : load_negations(*negations)) result.lexicon.add_negation(w);
  } else {
    for (const auto& w : kDefaultNegations) result.lexicon.add_negation(w);
  }
  return result;
}

std::filesystem::path default_lexicon_path() {
  if (const char* env = std::getenv("SUBSENSE_LEXICON"); env && *env) return env;
  return std::filesystem::path(SUBSENSE_DATA_DIR) / "en-sentiment.xml";
}

std::filesystem::path default_negations_path() {
  return std::filesystem::path(SUBSENSE_DATA_DIR) / "en-negations.txt";
}

const SubjectivityLexicon& reference_lexicon() {
  static const SubjectivityLexicon lexicon = [] {
    const auto neg = default_negations_path();
    return load_lexicon(default_lexicon_path(),
                        std::filesystem::exists(neg)
                            ? std::optional<std::filesystem::path>(neg)
                            : std::nullopt)
        .lexicon;
  }();
  return lexicon;
}

std::vector<Assessment> assess(std::span<const std::string> tokens,
                               const SubjectivityLexicon& lexicon) {
  std::vector<Assessment> out;
  // Index into `out` of a modifier that ended at `pending_end`.
  std::optional<std::size_t> pending;
  std::size_t pending_end = 0;
  double pending_intensity = 1.0;

  const std::size_t max_n = std::max<std::size_t>(1, lexicon.max_form_words());
  std::size_t i = 0;
  std::string key;
  while (i < tokens.size()) {
    const FormScore* hit = nullptr;
    std::size_t hit_len = 0;
    for (std::size_t n = std::min(max_n, tokens.size() - i); n >= 1; --n) {
      key = tokens[i];
      for (std::size_t k = 1; k < n; ++k) {
        key.push_back(' ');
        key += tokens[i + k];
      }
      if (const auto* f = lexicon.find(key); f && f->n_words == n) {
        hit = f;
        hit_len = n;
        break;
      }
    }
    if (!hit) {
      pending.reset();
      ++i;
      continue;
    }

    const bool modified = pending && pending_end == i;
    std::size_t slot;
    if (modified) {
      slot = *pending;
      auto& a = out[slot];
      a.subjectivity = clamp01(hit->subjectivity * pending_intensity);
      a.polarity = std::clamp(hit->polarity * pending_intensity, -1.0, 1.0);
      a.last = i + hit_len;
    } else {
      slot = out.size();
      out.push_back({i, i + hit_len, hit->subjectivity, hit->polarity});
    }
    const std::size_t start = out[slot].first;
    if (start > 0 && lexicon.is_negation(tokens[start - 1])) {
      out[slot].polarity = -out[slot].polarity;
    }

    i += hit_len;
    if (hit->intensity != 1.0) {
      pending = slot;
      pending_end = i;
      pending_intensity = hit->intensity;
    } else {
      pending.reset();
    }
  }
  return out;
}

SubjectivityScore score(std::string_view text, const SubjectivityLexicon& lexicon) {
  std::vector<std::string> words;
  for (auto& t : textprep::word_split(text)) {
    if (!textprep::is_punct_token(t)) words.push_back(std::move(t));
  }
  const auto assessments = assess(words, lexicon);
  SubjectivityScore out;
  out.matched_count = assessments.size();
  if (assessments.empty()) return out;
  double sum = 0.0;
  for (const auto& a : assessments) sum += a.subjectivity;
  out.value = clamp01(sum / static_cast<double>(assessments.size()));
  return out;
}

}  // namespace subsense::subjectivity
