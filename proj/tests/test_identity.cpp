#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cctype>
#include <random>

#include "support.hpp"
#include "subsense/error.hpp"
#include "subsense/identity.hpp"

using namespace subsense;
using namespace subsense::identity;

namespace {

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Character-by-character scan: for each start offset compare the term
// case-insensitively and check both neighbours.
std::vector<TermMatch> brute_force(std::string_view text, const IdentityLexicon& lex) {
  std::vector<TermMatch> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    for (const auto& term : lex.terms()) {
      if (i + term.size() > text.size()) continue;
      bool same = true;
      for (std::size_t k = 0; k < term.size() && same; ++k) {
        same = std::tolower(static_cast<unsigned char>(text[i + k])) == term[k];
      }
      if (!same) continue;
      if (i > 0 && alnum(text[i - 1])) continue;
      if (i + term.size() < text.size() && alnum(text[i + term.size()])) continue;
      out.push_back({term, i, i + term.size()});
    }
  }
  std::sort(out.begin(), out.end(), [](const TermMatch& a, const TermMatch& b) {
    return std::tie(a.begin, a.end, a.term) < std::tie(b.begin, b.end, b.term);
  });
  return out;
}

}  // namespace

TEST_CASE("default terms") {
  const auto& d = default_terms();
  CHECK(d.size() == 25);
  CHECK(d.source_label() == "default-25");
  CHECK(d.contains("muslim"));
  CHECK(d.contains("africans"));
  CHECK(d.contains("transgender"));
  CHECK(d.contains("democat"));
  CHECK_FALSE(d.contains("democrat"));
  CHECK_FALSE(d.contains("liberal"));
  CHECK(d.terms().front() == "muslim");
  CHECK(d.terms().back() == "africans");
  for (const auto& t : d.terms()) {
    CHECK(std::all_of(t.begin(), t.end(), [](char c) { return !std::isupper(static_cast<unsigned char>(c)); }));
  }
}

TEST_CASE("detect examples") {
  const auto& d = default_terms();
  const auto gay = detect("f yi i am a gay man , if anyone wants to chat just comment pl z", d);
  CHECK(gay.present);
  REQUIRE(gay.matches.size() == 1);
  CHECK(gay.matches[0].term == "gay");
  CHECK(gay.matches[0].begin == 12);
  CHECK(gay.matches[0].end == 15);

  CHECK_FALSE(detect("", d).present);
  CHECK_FALSE(detect("whitewash the fence", d).present);
  CHECK_FALSE(detect("liberal is just the pc word for rap ist .", d).present);

  const auto many = detect("Women, women and WOMEN's rights; white-ish", d);
  CHECK(many.matches.size() == 4);
  CHECK(many.matches[3].term == "white");
}

TEST_CASE("lexicon construction") {
  IdentityLexicon lex;
  lex.add("Gay");
  lex.add("gay");
  CHECK(lex.size() == 1);
  CHECK(lex.terms()[0] == "gay");
  CHECK_THROWS_AS(lex.add(""), ContractError);
  CHECK_THROWS_AS(lex.add("two words"), ContractError);
}

TEST_CASE("load term file") {
  testsupport::TempDir dir;
  testsupport::write_file(dir / "terms.txt", "# comment\nLiberal\n\nwomen\r\n");
  const auto lex = IdentityLexicon::load(dir / "terms.txt");
  CHECK(lex.size() == 2);
  CHECK(lex.contains("liberal"));
  CHECK(lex.source_label() == "terms.txt");
  CHECK(detect("liberal is just the pc word for rap ist .", lex).present);
  CHECK_THROWS_AS(IdentityLexicon::load(dir / "missing.txt"), ResourceError);
}

TEST_CASE("bundled curated list adds democrat") {
  const auto lex = IdentityLexicon::load(std::string(SUBSENSE_DATA_DIR) + "/identity-curated.txt");
  CHECK(lex.contains("democrat"));
  CHECK(lex.contains("democat"));
  CHECK(lex.size() == 26);
}

TEST_CASE("coverage") {
  std::vector<Comment> c = {{"1", "the women", Label::NonToxic}, {"2", "the cat", Label::Toxic}};
  const auto cov = coverage(c, default_terms());
  CHECK(cov.ratio() == 0.5);
  CHECK(cov.ratio_text() == "0.5000");
  CHECK(cov.percent_text() == "50.00%");
  CHECK(coverage(c, IdentityLexicon{}).ratio() == 0.0);
  CHECK_THROWS_AS(coverage(std::vector<Comment>{}, default_terms()), EmptyDatasetError);

  Coverage k{53, 250};
  CHECK(k.percent_text() == "21.20%");
  CHECK(k.ratio_text() == "0.2120");
  Coverage third{1, 3};
  CHECK(third.ratio_text() == "0.3333");
  CHECK(third.percent_text() == "33.33%");
}

TEST_CASE("properties against a brute-force scan") {
  const std::vector<std::string> pieces = {"gay", "white", "whites", "wash", "jew", "jewish", " ",
                                           " ", ",", "-", "a", "9", "Muslim", "MUSLIMS", "x",
                                           "women", "woman", "'s", "."};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> len(0, 10);
  const auto& d = default_terms();
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    for (int i = len(rng); i > 0; --i) text += pieces[pick(rng)];
    CAPTURE(text);
    const auto got = detect(text, d);
    const auto want = brute_force(text, d);
    REQUIRE(got.matches.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.matches[i].term == want[i].term);
      CHECK(got.matches[i].begin == want[i].begin);
      CHECK(got.matches[i].end == want[i].end);
    }
    CHECK(got.present == !got.matches.empty());

    std::string upper = text;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    CHECK(detect(upper, d).present == got.present);
    CHECK(detect(upper, d).matches.size() == got.matches.size());

    for (const auto& m : got.matches) {
      CHECK((m.begin == 0 || !alnum(text[m.begin - 1])));
      CHECK((m.end == text.size() || !alnum(text[m.end])));
    }

    IdentityLexicon bigger = d;
    bigger.add("wash");
    if (got.present) CHECK(detect(text, bigger).present);
  }
}
