#ifndef GROUNDING_CORPUS_IO_H_
#define GROUNDING_CORPUS_IO_H_

// Readers and writers for the text interchange formats: CoNLL-U style
// dependency parses and GloVe style embedding tables.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grounding {

struct DependencyToken {
  std::size_t index = 0;  // 1-based position in the sentence
  std::string surface;    // lowercased
  std::string pos;        // PTB tag, e.g. NN, JJ, VBG, IN, DT
  std::size_t head = 0;   // 0 = root
  std::string relation;   // e.g. amod, nsubj, nmod, case, det

  friend bool operator==(const DependencyToken &, const DependencyToken &) = default;
};

struct DependencyParse {
  std::string sentence_id;
  std::vector<DependencyToken> tokens;

  // Index (1-based) of the root token.
  std::size_t root() const;
  const DependencyToken &token(std::size_t index) const { return tokens.at(index - 1); }
  // Indices of tokens whose head is `index`, in sentence order.
  std::vector<std::size_t> dependents(std::size_t index) const;
  std::string text() const;

  friend bool operator==(const DependencyParse &, const DependencyParse &) = default;
};

// Throws StructureError unless the tokens form a single rooted tree with
// sequential 1-based indices.
void ValidateParse(const DependencyParse &parse);

// Reads blank-line separated sentence blocks of 10 tab-separated columns.
// Columns used: 1 index, 2 surface, 4 POS, 7 head, 8 relation. Lines starting
// with '#' are comments; "# sent_id = X" names the following sentence.
// Multiword ranges ("2-3") and empty nodes ("2.1") are skipped.
std::vector<DependencyParse> ReadParses(std::istream &in);
void WriteParses(std::ostream &out, std::span<const DependencyParse> parses);

std::string ToLower(std::string_view text);

// Word vectors of a fixed dimension with guaranteed SELF, UKN and OOV rows.
class EmbeddingTable {
 public:
  static constexpr std::string_view kSelf = "SELF";
  static constexpr std::string_view kUnknown = "UKN";
  static constexpr std::string_view kOov = "OOV";
  static constexpr std::uint64_t kDefaultSeed = 20200917;

  // Creates a table holding only the special rows, drawn from a seeded
  // uniform(-0.1, 0.1).
  explicit EmbeddingTable(std::size_t dimension,
                          std::uint64_t seed = kDefaultSeed);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return rows_.size(); }
  bool contains(std::string_view word) const;

  // Returns the row for word, or the OOV row when the word is unknown.
  std::span<const double> Lookup(std::string_view word) const;
  // Inserts or replaces. Returns false if the word was already present.
  bool Set(std::string_view word, std::vector<double> vector);

  // Words in insertion order (special rows first).
  const std::vector<std::string> &words() const { return order_; }

  static bool IsSpecial(std::string_view word);
  // Lowercases everything except the special tokens.
  static std::string Normalize(std::string_view word);

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::vector<double>> rows_;
  std::vector<std::string> order_;
};

// Parses `word v1 ... vD` lines. Wrong arity raises ParseError naming the
// line; a repeated word replaces the earlier row and appends a message to
// `warnings` when given.
EmbeddingTable LoadEmbeddings(std::istream &in, std::size_t dimension,
                              std::uint64_t seed = EmbeddingTable::kDefaultSeed,
                              std::vector<std::string> *warnings = nullptr);
void WriteEmbeddings(std::ostream &out, const EmbeddingTable &table);

}  // namespace grounding

#endif  // GROUNDING_CORPUS_IO_H_
