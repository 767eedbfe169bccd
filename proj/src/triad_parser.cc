#include "grounding/triad_parser.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "grounding/errors.h"

namespace grounding {
namespace {

const std::string kSelf(EmbeddingTable::kSelf);
const std::string kUnknown(EmbeddingTable::kUnknown);

// "nmod:on" -> "nmod", "acl:relcl" -> "acl".
std::string BaseRelation(const std::string &relation) {
  return relation.substr(0, relation.find(':'));
}

bool IsNoun(const std::string &pos) {
  return pos == "NN" || pos == "NNS" || pos == "NNP" || pos == "NNPS" ||
         pos == "NOUN" || pos == "PROPN";
}

bool IsVerb(const std::string &pos) {
  return pos.rfind("VB", 0) == 0 || pos == "VERB";
}

bool IsContentWord(const std::string &pos) {
  return IsNoun(pos) || IsVerb(pos) || pos.rfind("JJ", 0) == 0 ||
         pos.rfind("RB", 0) == 0 || pos == "CD" || pos == "ADJ" ||
         pos == "ADV" || pos == "NUM";
}

bool IsPrepositional(const std::string &rel) {
  return rel == "nmod" || rel == "obl" || rel == "prep";
}

bool IsClausalModifier(const std::string &rel) {
  return rel == "acl" || rel == "relcl" || rel == "vmod" || rel == "partmod" ||
         rel == "rcmod";
}

// Dependency relations that never yield a unary discriminative unit.
bool IsExcludedFromUnary(const std::string &rel) {
  static const std::set<std::string> kExcluded = {
      "nsubj", "prep", "nmod", "obl", "det",  "case", "punct", "cc",
      "conj",  "dobj", "obj",  "pobj", "mark", "cop",  "aux",   "root"};
  return kExcluded.count(rel) > 0;
}

struct Emitted {
  DiscriminativeTriad triad;
  std::size_t order = 0;  // token index of the discriminative word
};

class TriadBuilder {
 public:
  explicit TriadBuilder(const DependencyParse &parse) : parse_(parse) {}

  ParsedQuery Build() {
    ParsedQuery query;
    query.query_id = parse_.sentence_id;
    query.source_parse = parse_;

    const std::optional<std::size_t> target = SelectTargetUnit(parse_);
    std::vector<DiscriminativeTriad> triads;
    if (!target) {
      for (const DependencyToken &t : parse_.tokens) {
        if (IsContentWord(t.pos)) triads.push_back({kUnknown, kUnknown, t.surface});
      }
      if (triads.empty()) {
        // Nothing contentful at all: describe by the root word.
        triads.push_back({kUnknown, kUnknown, parse_.token(parse_.root()).surface});
      }
    } else {
      std::vector<Emitted> unary;
      Unary(*target, unary);
      std::vector<Emitted> relational;
      Relational(*target, relational);
      std::stable_sort(relational.begin(), relational.end(),
                       [](const Emitted &a, const Emitted &b) { return a.order < b.order; });
      std::vector<Emitted> recursive;
      for (std::size_t ref : references_) Unary(ref, recursive);

      for (const auto *group : {&unary, &relational, &recursive})
        for (const Emitted &e : *group) triads.push_back(e.triad);
      if (triads.empty()) {
        const std::string &word = parse_.token(*target).surface;
        triads.push_back({word, word, kSelf});
      }
    }

    for (const DiscriminativeTriad &t : triads) {
      const bool duplicate = std::any_of(
          query.triads.begin(), query.triads.end(), [&](const DiscriminativeTriad &q) {
            return q.target == t.target && q.reference == t.reference &&
                   q.discriminative == t.discriminative;
          });
      if (duplicate) continue;
      query.triads.push_back(t);
      query.triads.back().id = query.triads.size();
    }
    return query;
  }

 private:
  const std::string &Word(std::size_t index) const { return parse_.token(index).surface; }
  std::string Relation(std::size_t index) const {
    return BaseRelation(parse_.token(index).relation);
  }
  const std::string &Pos(std::size_t index) const { return parse_.token(index).pos; }

  // Modifiers of `head` that describe it without another object.
  void Unary(std::size_t head, std::vector<Emitted> &out) {
    for (std::size_t dep : parse_.dependents(head)) {
      const std::string rel = Relation(dep);
      if (IsPrepositional(rel)) {
        // "man in black": a prepositional object that is not a noun is a
        // property of the head rather than a second object.
        const std::optional<std::size_t> object = PrepositionalObject(dep);
        if (object && !IsNoun(Pos(*object))) {
          out.push_back({{Word(head), Word(head), Word(*object)}, *object});
        }
        continue;
      }
      if (IsVerb(Pos(dep)) || IsClausalModifier(rel) || IsExcludedFromUnary(rel)) continue;
      EmitWithConjuncts(head, dep, out);
    }
  }

  void EmitWithConjuncts(std::size_t head, std::size_t modifier,
                         std::vector<Emitted> &out) {
    out.push_back({{Word(head), Word(head), Word(modifier)}, modifier});
    for (std::size_t dep : parse_.dependents(modifier)) {
      if (Relation(dep) == "conj" && !IsVerb(Pos(dep))) EmitWithConjuncts(head, dep, out);
    }
  }

  // For UD style, `dep` is the object noun and its case child is the
  // preposition. For Stanford style, `dep` is the preposition and its pobj
  // child is the object.
  std::optional<std::size_t> PrepositionalObject(std::size_t dep) const {
    if (Relation(dep) != "prep") return dep;
    for (std::size_t child : parse_.dependents(dep))
      if (Relation(child) == "pobj") return child;
    return std::nullopt;
  }

  std::optional<std::size_t> PrepositionWord(std::size_t dep) const {
    if (Relation(dep) == "prep") return dep;
    for (std::size_t child : parse_.dependents(dep))
      if (Relation(child) == "case") return child;
    return std::nullopt;
  }

  void Prepositional(std::size_t target, std::size_t dep, std::vector<Emitted> &out) {
    const std::optional<std::size_t> object = PrepositionalObject(dep);
    const std::optional<std::size_t> prep = PrepositionWord(dep);
    if (!object || !prep || !IsNoun(Pos(*object))) return;
    out.push_back({{Word(target), Word(*object), Word(*prep)}, *prep});
    AddReference(*object);
  }

  void Verbal(std::size_t target, std::size_t verb, std::vector<Emitted> &out) {
    if (!visited_verbs_.insert(verb).second) return;
    for (std::size_t dep : parse_.dependents(verb)) {
      if (dep == target) continue;
      const std::string rel = Relation(dep);
      if (rel == "dobj" || rel == "obj") {
        out.push_back({{Word(target), Word(dep), Word(verb)}, verb});
        AddReference(dep);
      } else if (IsPrepositional(rel)) {
        Prepositional(target, dep, out);
      } else if (rel == "conj" && IsVerb(Pos(dep))) {
        Verbal(target, dep, out);
      }
    }
  }

  void Relational(std::size_t target, std::vector<Emitted> &out) {
    for (std::size_t dep : parse_.dependents(target)) {
      const std::string rel = Relation(dep);
      if (IsPrepositional(rel)) {
        Prepositional(target, dep, out);
      } else if (IsVerb(Pos(dep)) || IsClausalModifier(rel)) {
        Verbal(target, dep, out);
      }
    }
    // "the man is holding a cat": the target is the subject of the verb.
    const DependencyToken &t = parse_.token(target);
    if (t.head != 0 && Relation(target) == "nsubj" && IsVerb(Pos(t.head))) {
      Verbal(target, t.head, out);
    }
  }

  void AddReference(std::size_t noun) {
    if (std::find(references_.begin(), references_.end(), noun) == references_.end())
      references_.push_back(noun);
  }

  const DependencyParse &parse_;
  std::vector<std::size_t> references_;
  std::set<std::size_t> visited_verbs_;
};

}  // namespace

void ValidateTriad(const DiscriminativeTriad &triad) {
  if (triad.target.empty() || triad.reference.empty() || triad.discriminative.empty()) {
    throw InvariantError("triad with an empty unit");
  }
  if (triad.discriminative == kSelf && triad.target != triad.reference) {
    throw InvariantError("SELF triad must have target == reference");
  }
  if (triad.target == kUnknown && triad.reference != kUnknown) {
    throw InvariantError("UKN target requires a UKN reference");
  }
}

std::optional<std::size_t> SelectTargetUnit(const DependencyParse &parse) {
  for (const DependencyToken &t : parse.tokens) {
    if (!IsNoun(t.pos)) continue;
    const std::string rel = BaseRelation(t.relation);
    if ((rel == "compound" || rel == "nn") && t.head != 0 &&
        IsNoun(parse.token(t.head).pos)) {
      continue;
    }
    bool dominated = false;
    for (std::size_t at = t.head; at != 0; at = parse.token(at).head) {
      if (IsNoun(parse.token(at).pos) && at < t.index) {
        dominated = true;
        break;
      }
    }
    if (!dominated) return t.index;
  }
  return std::nullopt;
}

ParsedQuery ExtractTriads(const DependencyParse &parse) {
  ValidateParse(parse);
  return TriadBuilder(parse).Build();
}

std::vector<UnitEmbeddings> TriadsToEmbeddings(const ParsedQuery &query,
                                               const EmbeddingTable &table) {
  std::vector<UnitEmbeddings> out;
  out.reserve(query.triads.size());
  auto row = [&](const std::string &word) {
    const auto span = table.Lookup(word);
    return std::vector<double>(span.begin(), span.end());
  };
  for (const DiscriminativeTriad &t : query.triads) {
    out.push_back({row(t.target), row(t.reference), row(t.discriminative)});
  }
  return out;
}

void WriteTriads(std::ostream &out, std::span<const ParsedQuery> queries) {
  for (const ParsedQuery &q : queries) {
    for (const DiscriminativeTriad &t : q.triads) {
      out << q.query_id << '\t' << t.id << '\t' << t.target << '\t' << t.reference
          << '\t' << t.discriminative << '\n';
    }
  }
}

std::vector<ParsedQuery> ReadTriads(std::istream &in) {
  std::vector<ParsedQuery> queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::istringstream split(line);
    for (std::string f; std::getline(split, f, '\t');) fields.push_back(f);
    if (fields.size() != 5) {
      throw ParseError("expected 5 tab-separated columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    DiscriminativeTriad triad{fields[2], fields[3], fields[4], 0};
    try {
      triad.id = std::stoul(fields[1]);
    } catch (const std::exception &) {
      throw ParseError("bad triad index '" + fields[1] + "'", line_no);
    }
    ValidateTriad(triad);
    if (queries.empty() || queries.back().query_id != fields[0]) {
      queries.push_back(ParsedQuery{fields[0], {}, {}});
    }
    queries.back().triads.push_back(std::move(triad));
  }
  return queries;
}

}  // namespace grounding
