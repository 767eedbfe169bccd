#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "grounding/corpus_io.h"
#include "grounding/errors.h"
#include "grounding/triad_parser.h"

using namespace grounding;

namespace {

using Unit3 = std::tuple<std::string, std::string, std::string>;

std::vector<DependencyParse> Table1Parses() {
  std::ifstream in(GROUNDING_FIXTURES "/table1.conllu");
  REQUIRE(in);
  return ReadParses(in);
}

DependencyParse One(const std::string &conllu) {
  std::istringstream in(conllu);
  auto parses = ReadParses(in);
  REQUIRE(parses.size() == 1);
  return parses[0];
}

std::vector<Unit3> Units(const ParsedQuery &q) {
  std::vector<Unit3> out;
  for (const auto &t : q.triads) out.emplace_back(t.target, t.reference, t.discriminative);
  return out;
}

std::vector<Unit3> Sorted(std::vector<Unit3> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("target unit selection") {
  const auto parses = Table1Parses();
  CHECK(SelectTargetUnit(parses[6]) == std::optional<std::size_t>(3));  // man
  CHECK(SelectTargetUnit(parses[4]) == std::optional<std::size_t>(1));  // cat
  CHECK_FALSE(SelectTargetUnit(parses[1]).has_value());                 // "left"
}

TEST_CASE("single-row extractions") {
  const auto parses = Table1Parses();
  CHECK(Units(ExtractTriads(parses[0])) == std::vector<Unit3>{{"man", "man", "SELF"}});
  CHECK(Units(ExtractTriads(parses[1])) == std::vector<Unit3>{{"UKN", "UKN", "left"}});
  CHECK(Units(ExtractTriads(parses[2])) == std::vector<Unit3>{{"man", "man", "left"}});
  CHECK(Units(ExtractTriads(parses[3])) == std::vector<Unit3>{{"cat", "cat", "black"}});
  CHECK(Units(ExtractTriads(parses[4])) == std::vector<Unit3>{{"cat", "table", "on"}});
  CHECK(Units(ExtractTriads(parses[5])) == std::vector<Unit3>{{"man", "cat", "holding"}});
}

TEST_CASE("the complex query decomposes into five triads") {
  const auto parses = Table1Parses();
  const ParsedQuery q = ExtractTriads(parses[6]);
  const std::vector<Unit3> expected = {{"man", "man", "left"},
                                       {"man", "man", "black"},
                                       {"man", "table", "on"},
                                       {"man", "cat", "holding"},
                                       {"cat", "cat", "red"}};
  CHECK(Sorted(Units(q)) == Sorted(expected));
  for (std::size_t k = 0; k < q.triads.size(); ++k) CHECK(q.triads[k].id == k + 1);
}

TEST_CASE("the whole fixture matches the hand-written triad table") {
  std::ifstream expected_in(GROUNDING_FIXTURES "/table1.triads");
  REQUIRE(expected_in);
  const auto expected = ReadTriads(expected_in);
  const auto parses = Table1Parses();
  REQUIRE(expected.size() == parses.size());
  std::size_t total = 0;
  for (std::size_t q = 0; q < parses.size(); ++q) {
    const ParsedQuery got = ExtractTriads(parses[q]);
    CHECK(got.query_id == expected[q].query_id);
    CHECK(Sorted(Units(got)) == Sorted(Units(expected[q])));
    total += got.triads.size();
  }
  CHECK(total == 11);
}

TEST_CASE("extraction is deterministic and always yields a valid triad") {
  for (const DependencyParse &p : Table1Parses()) {
    const ParsedQuery a = ExtractTriads(p);
    const ParsedQuery b = ExtractTriads(p);
    CHECK(Units(a) == Units(b));
    REQUIRE_FALSE(a.triads.empty());
    for (const auto &t : a.triads) CHECK_NOTHROW(ValidateTriad(t));
  }
}

TEST_CASE("adding an adjective to the target adds exactly one unary triad") {
  const DependencyParse base = One(
      "1\tcat\t_\tNN\t_\t_\t0\troot\t_\t_\n"
      "2\ton\t_\tIN\t_\t_\t4\tcase\t_\t_\n"
      "3\ta\t_\tDT\t_\t_\t4\tdet\t_\t_\n"
      "4\ttable\t_\tNN\t_\t_\t1\tnmod\t_\t_\n");
  const DependencyParse more = One(
      "1\tfat\t_\tJJ\t_\t_\t2\tamod\t_\t_\n"
      "2\tcat\t_\tNN\t_\t_\t0\troot\t_\t_\n"
      "3\ton\t_\tIN\t_\t_\t5\tcase\t_\t_\n"
      "4\ta\t_\tDT\t_\t_\t5\tdet\t_\t_\n"
      "5\ttable\t_\tNN\t_\t_\t2\tnmod\t_\t_\n");
  const auto before = Units(ExtractTriads(base));
  const auto after = Units(ExtractTriads(more));
  REQUIRE(after.size() == before.size() + 1);
  for (const auto &t : before) CHECK(std::count(after.begin(), after.end(), t) == 1);
  CHECK(std::count(after.begin(), after.end(), Unit3{"cat", "cat", "fat"}) == 1);
}

TEST_CASE("the prep label spelling gives the same triad as nmod plus case") {
  const DependencyParse prep = One(
      "1\tcat\t_\tNN\t_\t_\t0\troot\t_\t_\n"
      "2\ton\t_\tIN\t_\t_\t1\tprep\t_\t_\n"
      "3\ta\t_\tDT\t_\t_\t4\tdet\t_\t_\n"
      "4\ttable\t_\tNN\t_\t_\t2\tpobj\t_\t_\n");
  CHECK(Units(ExtractTriads(prep)) == std::vector<Unit3>{{"cat", "table", "on"}});
}

TEST_CASE("duplicate triads within a query collapse") {
  const DependencyParse p = One(
      "1\tred\t_\tJJ\t_\t_\t3\tamod\t_\t_\n"
      "2\tred\t_\tJJ\t_\t_\t3\tamod\t_\t_\n"
      "3\tcat\t_\tNN\t_\t_\t0\troot\t_\t_\n");
  CHECK(Units(ExtractTriads(p)) == std::vector<Unit3>{{"cat", "cat", "red"}});
}

TEST_CASE("triads map to embedding rows") {
  std::istringstream in("cat 1 0\nblack 0 1\nman 2 2\non 3 3\nleft 4 4\n");
  const EmbeddingTable table = LoadEmbeddings(in, 2);
  auto row = [&](const char *w) {
    const auto s = table.Lookup(w);
    return std::vector<double>(s.begin(), s.end());
  };
  ParsedQuery q;
  q.query_id = "x";
  q.triads = {{"cat", "cat", "black", 1}, {"UKN", "UKN", "left", 2}, {"man", "zyzzyva", "on", 3}};
  const auto e = TriadsToEmbeddings(q, table);
  REQUIRE(e.size() == 3);
  CHECK(e[0].target == row("cat"));
  CHECK(e[0].reference == e[0].target);
  CHECK(e[0].discriminative == row("black"));
  CHECK(e[1].target == row("UKN"));
  CHECK(e[1].discriminative == row("left"));
  CHECK(e[2].reference == row("OOV"));
  CHECK(e[2].discriminative == row("on"));
}

TEST_CASE("triad rows round-trip through TSV") {
  std::vector<ParsedQuery> queries;
  for (const auto &p : Table1Parses()) queries.push_back(ExtractTriads(p));
  std::ostringstream out;
  WriteTriads(out, queries);
  std::istringstream in(out.str());
  const auto back = ReadTriads(in);
  REQUIRE(back.size() == queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) CHECK(back[q].triads == queries[q].triads);
}

TEST_CASE("malformed triads are rejected") {
  CHECK_THROWS_AS(ValidateTriad({"", "cat", "on", 1}), InvariantError);
  CHECK_THROWS_AS(ValidateTriad({"cat", "table", "SELF", 1}), InvariantError);
}
