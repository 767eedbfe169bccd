#include "grounding/corpus_io.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "grounding/errors.h"

namespace grounding {
namespace {

std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool IsBlank(const std::string &line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::size_t ParseIndex(const std::string &field, const char *what,
                       std::size_t line) {
  std::size_t value = 0;
  const char *end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
  }
  return value;
}

void StripCarriageReturn(std::string &line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string ToLower(std::string_view text) {
  std::string out(text);
  for (char &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t DependencyParse::root() const {
  for (const DependencyToken &t : tokens)
    if (t.head == 0) return t.index;
  throw StructureError("sentence '" + sentence_id + "' has no root");
}

std::vector<std::size_t> DependencyParse::dependents(std::size_t index) const {
  std::vector<std::size_t> out;
  for (const DependencyToken &t : tokens)
    if (t.head == index) out.push_back(t.index);
  return out;
}

std::string DependencyParse::text() const {
  std::string out;
  for (const DependencyToken &t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.surface;
  }
  return out;
}

void ValidateParse(const DependencyParse &parse) {
  const std::string where = "sentence '" + parse.sentence_id + "': ";
  const std::size_t n = parse.tokens.size();
  if (n == 0) throw StructureError(where + "no tokens");
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const DependencyToken &t = parse.tokens[i];
    if (t.index != i + 1) {
      throw StructureError(where + "token indices must run 1.." + std::to_string(n));
    }
    if (t.head == t.index) {
      throw StructureError(where + "token " + std::to_string(t.index) +
                           " is its own head");
    }
    if (t.head > n) {
      throw StructureError(where + "token " + std::to_string(t.index) +
                           " has head " + std::to_string(t.head) + " outside the sentence");
    }
    if (t.relation.empty()) {
      throw StructureError(where + "token " + std::to_string(t.index) +
                           " has an empty relation");
    }
    if (t.head == 0) ++roots;
  }
  if (roots != 1) {
    throw StructureError(where + "expected exactly one root, found " +
                         std::to_string(roots));
  }
  // Every token must reach the root within n steps.
  for (const DependencyToken &t : parse.tokens) {
    std::size_t at = t.index;
    std::size_t steps = 0;
    while (at != 0) {
      if (++steps > n) {
        throw StructureError(where + "cycle through token " + std::to_string(t.index));
      }
      at = parse.tokens[at - 1].head;
    }
  }
}

std::vector<DependencyParse> ReadParses(std::istream &in) {
  std::vector<DependencyParse> parses;
  DependencyParse current;
  std::string pending_id;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) return;
    current.sentence_id =
        pending_id.empty() ? "s" + std::to_string(parses.size() + 1) : pending_id;
    ValidateParse(current);
    parses.push_back(std::move(current));
    current = DependencyParse();
    pending_id.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (IsBlank(line)) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const std::string key = "# sent_id";
      if (line.compare(0, key.size(), key) == 0) {
        std::string rest = line.substr(key.size());
        const std::size_t eq = rest.find('=');
        if (eq != std::string::npos) rest = rest.substr(eq + 1);
        const auto first = rest.find_first_not_of(" \t");
        const auto last = rest.find_last_not_of(" \t");
        pending_id = first == std::string::npos ? "" : rest.substr(first, last - first + 1);
      }
      continue;
    }
    const std::vector<std::string> fields = SplitTabs(line);
    if (fields.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    if (fields[0].find_first_of("-.") != std::string::npos) continue;

    DependencyToken token;
    token.index = ParseIndex(fields[0], "token index", line_no);
    token.surface = ToLower(fields[1]);
    token.pos = fields[3] != "_" ? fields[3] : fields[4];
    token.head = ParseIndex(fields[6], "head index", line_no);
    token.relation = fields[7] == "_" ? "" : ToLower(fields[7]);
    if (token.index != current.tokens.size() + 1) {
      throw ParseError("token index " + fields[0] + " out of sequence", line_no);
    }
    if (token.surface.empty()) throw ParseError("empty surface form", line_no);
    current.tokens.push_back(std::move(token));
  }
  flush();
  return parses;
}

void WriteParses(std::ostream &out, std::span<const DependencyParse> parses) {
  for (const DependencyParse &parse : parses) {
    out << "# sent_id = " << parse.sentence_id << '\n';
    out << "# text = " << parse.text() << '\n';
    for (const DependencyToken &t : parse.tokens) {
      out << t.index << '\t' << t.surface << "\t_\t" << t.pos << "\t_\t_\t"
          << t.head << '\t' << t.relation << "\t_\t_\n";
    }
    out << '\n';
  }
}

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension) {
  if (dimension == 0) throw ConfigError("embedding dimension must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  for (std::string_view special : {kSelf, kUnknown, kOov}) {
    std::vector<double> row(dimension);
    for (double &x : row) x = uniform(rng);
    Set(special, std::move(row));
  }
}

bool EmbeddingTable::IsSpecial(std::string_view word) {
  return word == kSelf || word == kUnknown || word == kOov;
}

std::string EmbeddingTable::Normalize(std::string_view word) {
  return IsSpecial(word) ? std::string(word) : ToLower(word);
}

bool EmbeddingTable::contains(std::string_view word) const {
  return rows_.count(Normalize(word)) > 0;
}

std::span<const double> EmbeddingTable::Lookup(std::string_view word) const {
  auto it = rows_.find(Normalize(word));
  if (it == rows_.end()) it = rows_.find(std::string(kOov));
  return it->second;
}

bool EmbeddingTable::Set(std::string_view word, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw ShapeError("embedding for '" + std::string(word) + "' has length " +
                     std::to_string(vector.size()) + ", table dimension is " +
                     std::to_string(dimension_));
  }
  std::string key = Normalize(word);
  auto [it, inserted] = rows_.insert_or_assign(key, std::move(vector));
  if (inserted) order_.push_back(std::move(key));
  return inserted;
}

EmbeddingTable LoadEmbeddings(std::istream &in, std::size_t dimension,
                              std::uint64_t seed,
                              std::vector<std::string> *warnings) {
  EmbeddingTable table(dimension, seed);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    StripCarriageReturn(line);
    if (IsBlank(line)) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> values;
    std::string token;
    while (fields >> token) {
      double v = 0.0;
      const char *end = token.data() + token.size();
      auto [ptr, ec] = std::from_chars(token.data(), end, v);
      if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError("bad number '" + token + "' for word '" + word + "'", line_no);
      }
      values.push_back(v);
    }
    if (values.size() != dimension) {
      throw ParseError("word '" + word + "' has " + std::to_string(values.size()) +
                           " values, expected " + std::to_string(dimension),
                       line_no);
    }
    const std::string key = EmbeddingTable::Normalize(word);
    if (!seen.insert(key).second && warnings) {
      warnings->push_back("line " + std::to_string(line_no) + ": duplicate word '" +
                          key + "', keeping the later vector");
    }
    table.Set(key, std::move(values));
  }
  return table;
}

void WriteEmbeddings(std::ostream &out, const EmbeddingTable &table) {
  const auto old_precision = out.precision(17);
  for (const std::string &word : table.words()) {
    out << word;
    for (double v : table.Lookup(word)) out << ' ' << v;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace grounding
