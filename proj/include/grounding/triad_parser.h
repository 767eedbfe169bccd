#ifndef GROUNDING_TRIAD_PARSER_H_
#define GROUNDING_TRIAD_PARSER_H_

// Rule-based conversion of a dependency parse into discriminative triads
// (target unit, reference unit, discriminative unit).
//
//   "black cat"          -> (cat, cat, black)
//   "cat on a table"     -> (cat, table, on)
//   "man holding a cat"  -> (man, cat, holding)
//   "man"                -> (man, man, SELF)
//   "left"               -> (UKN, UKN, left)
//
// Both the Stanford (prep/pobj) and the Universal Dependencies (nmod/obl +
// case) spellings of prepositional phrases are accepted.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounding/corpus_io.h"

namespace grounding {

struct DiscriminativeTriad {
  std::string target;
  std::string reference;
  std::string discriminative;
  std::size_t id = 0;  // 1-based position within its query

  friend bool operator==(const DiscriminativeTriad &, const DiscriminativeTriad &) = default;
};

// Throws InvariantError if a triad breaks the SELF/UKN conventions or has an
// empty unit.
void ValidateTriad(const DiscriminativeTriad &triad);

struct ParsedQuery {
  std::string query_id;
  std::vector<DiscriminativeTriad> triads;  // never empty
  DependencyParse source_parse;             // empty when built from triads only
};

// 1-based index of the target noun, or nullopt when the parse has no noun.
// Picks the leftmost noun that is neither a compound modifier of another noun
// nor dominated by an earlier noun.
std::optional<std::size_t> SelectTargetUnit(const DependencyParse &parse);

// Applies the triad rules; always returns at least one triad. Exact duplicate
// triads are collapsed.
ParsedQuery ExtractTriads(const DependencyParse &parse);

struct UnitEmbeddings {
  std::vector<double> target;
  std::vector<double> reference;
  std::vector<double> discriminative;
};

// Looks up each unit; unknown words map to the OOV row.
std::vector<UnitEmbeddings> TriadsToEmbeddings(const ParsedQuery &query,
                                               const EmbeddingTable &table);

// Tab-separated rows: query_id, k, target, reference, discriminative.
void WriteTriads(std::ostream &out, std::span<const ParsedQuery> queries);
std::vector<ParsedQuery> ReadTriads(std::istream &in);

}  // namespace grounding

#endif  // GROUNDING_TRIAD_PARSER_H_
