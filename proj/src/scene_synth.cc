#include "grounding/scene_synth.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "grounding/errors.h"
#include "grounding/seeding.h"

namespace grounding {
namespace {

// Gap below which a resting object counts as touching (fraction of height).
constexpr double kOnGap = 0.05;
// Separation kept between objects that are not stacked.
constexpr double kSeparationX = 0.02;
constexpr double kSeparationY = 0.10;
// Objects this close to a third-line are not described as left/right.
constexpr double kSideMargin = 0.05;

double HorizontalOverlap(const Box &a, const Box &b) {
  const double overlap = std::min(a.x_br, b.x_br) - std::max(a.x_tl, b.x_tl);
  return std::max(0.0, overlap) / std::min(a.width(), b.width());
}

bool Separated(const Box &a, const Box &b, double width, double height) {
  const double gap_x = std::max(a.x_tl - b.x_br, b.x_tl - a.x_br);
  const double gap_y = std::max(a.y_tl - b.y_br, b.y_tl - a.y_br);
  return gap_x >= kSeparationX * width || gap_y >= kSeparationY * height;
}

bool SameTriad(const DiscriminativeTriad &a, const DiscriminativeTriad &b) {
  return a.target == b.target && a.reference == b.reference &&
         a.discriminative == b.discriminative;
}

bool ClearlySided(const LabeledScene &scene, std::size_t target, RelationKind kind) {
  const double w = scene.scene.width;
  const double line = kind == RelationKind::kLeft ? w / 3.0 : 2.0 * w / 3.0;
  const Box &box = scene.scene.proposals[target].box;
  const bool inside = kind == RelationKind::kLeft ? IsLeft(box, w) : IsRight(box, w);
  if (!inside || std::abs(box.center_x() - line) < kSideMargin * w) return false;
  for (std::size_t p = 0; p < scene.objects.size(); ++p) {
    if (p == target || scene.objects[p].category != scene.objects[target].category) continue;
    if (std::abs(scene.scene.proposals[p].box.center_x() - line) < kSideMargin * w) return false;
  }
  return true;
}

struct Placed {
  Box box;
  bool supports_something = false;
};

std::vector<Box> PlaceBoxes(const SceneConfig &config, std::mt19937_64 &rng) {
  const double w = config.width, h = config.height;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<Placed> placed;
    bool failed = false;
    for (std::size_t k = 0; k < config.num_proposals && !failed; ++k) {
      bool done = false;
      for (int tries = 0; tries < 300 && !done; ++tries) {
        const double bw = w * (0.10 + 0.10 * unit(rng));
        const double bh = h * (0.12 + 0.13 * unit(rng));
        Box box;
        std::ptrdiff_t support = -1;
        if (!placed.empty() && unit(rng) < config.stack_probability) {
          std::uniform_int_distribution<std::size_t> pick(0, placed.size() - 1);
          const std::size_t s = pick(rng);
          if (placed[s].supports_something) continue;
          const Box &base = placed[s].box;
          const double min_overlap = 0.6 * std::min(bw, base.width());
          const double lo = base.x_tl + min_overlap - bw;
          const double hi = base.x_br - min_overlap;
          box.x_tl = lo + (hi - lo) * unit(rng);
          box.x_br = box.x_tl + bw;
          box.y_br = base.y_tl - 0.02 * h * unit(rng);
          box.y_tl = box.y_br - bh;
          support = static_cast<std::ptrdiff_t>(s);
        } else {
          box.x_tl = (w - bw) * unit(rng);
          box.y_tl = (h - bh) * unit(rng);
          box.x_br = box.x_tl + bw;
          box.y_br = box.y_tl + bh;
        }
        if (box.x_tl < 0 || box.y_tl < 0 || box.x_br > w || box.y_br > h) continue;
        bool ok = true;
        for (std::size_t o = 0; o < placed.size() && ok; ++o) {
          if (static_cast<std::ptrdiff_t>(o) == support) continue;
          ok = Separated(box, placed[o].box, w, h);
        }
        if (!ok) continue;
        if (support >= 0) placed[support].supports_something = true;
        placed.push_back({box, false});
        done = true;
      }
      failed = !done;
    }
    if (!failed) {
      std::vector<Box> boxes;
      for (const Placed &p : placed) boxes.push_back(p.box);
      return boxes;
    }
  }
  throw ConfigError("could not place " + std::to_string(config.num_proposals) +
                    " separated boxes in a " + std::to_string(config.width) + "x" +
                    std::to_string(config.height) + " image");
}

}  // namespace

SceneVocabulary SceneVocabulary::Default() {
  SceneVocabulary v;
  v.categories = {"cat", "dog", "man", "table", "chair", "car"};
  v.attributes = {"red", "black", "white", "green", "blue", "yellow"};
  v.relations = {{"on", RelationKind::kOn},
                 {"under", RelationKind::kUnder},
                 {"left", RelationKind::kLeft},
                 {"right", RelationKind::kRight}};
  return v;
}

std::size_t SceneVocabulary::category_slot(const std::string &category) const {
  auto it = std::find(categories.begin(), categories.end(), category);
  if (it == categories.end()) throw InvariantError("unknown category '" + category + "'");
  return static_cast<std::size_t>(it - categories.begin());
}

std::size_t SceneVocabulary::attribute_slot(const std::string &attribute) const {
  auto it = std::find(attributes.begin(), attributes.end(), attribute);
  if (it == attributes.end()) throw InvariantError("unknown attribute '" + attribute + "'");
  return categories.size() + static_cast<std::size_t>(it - attributes.begin());
}

const RelationWord *SceneVocabulary::FindRelation(const std::string &word) const {
  for (const RelationWord &r : relations)
    if (r.word == word) return &r;
  return nullptr;
}

bool SceneVocabulary::IsAttribute(const std::string &word) const {
  return std::find(attributes.begin(), attributes.end(), word) != attributes.end();
}

void SceneVocabulary::Validate(std::size_t visual_dim) const {
  if (categories.empty() || attributes.empty()) {
    throw ConfigError("vocabulary needs categories and attributes");
  }
  std::set<std::string> seen;
  std::size_t total = 0;
  auto add = [&](const std::string &w) {
    ++total;
    if (!seen.insert(w).second) throw ConfigError("vocabulary word '" + w + "' repeated");
  };
  for (const auto &w : categories) add(w);
  for (const auto &w : attributes) add(w);
  for (const auto &r : relations) add(r.word);
  if (layout_slots() > visual_dim) {
    throw ConfigError("visual dimension " + std::to_string(visual_dim) + " cannot hold " +
                      std::to_string(layout_slots()) + " one-hot slots");
  }
}

void SceneConfig::Validate(const SceneVocabulary &vocabulary) const {
  vocabulary.Validate(visual_dim);
  if (num_proposals < 2) throw ConfigError("a scene needs at least 2 proposals");
  if (queries_per_scene == 0) throw ConfigError("queries_per_scene must be positive");
  if (queries_per_scene > num_proposals) {
    throw ConfigError("cannot ask " + std::to_string(queries_per_scene) +
                      " queries about distinct targets among " +
                      std::to_string(num_proposals) + " proposals");
  }
  if (!(noise >= 0) || !(width > 0) || !(height > 0)) {
    throw ConfigError("noise must be >= 0 and image size positive");
  }
}

bool IsOn(const Box &upper, const Box &lower, double image_height) {
  return HorizontalOverlap(upper, lower) >= 0.5 &&
         std::abs(lower.y_tl - upper.y_br) <= kOnGap * image_height &&
         upper.y_tl < lower.y_tl;
}

bool IsLeft(const Box &box, double image_width) {
  return box.center_x() < image_width / 3.0;
}

bool IsRight(const Box &box, double image_width) {
  return box.center_x() > 2.0 * image_width / 3.0;
}

bool Satisfies(const LabeledScene &scene, std::size_t p, const DiscriminativeTriad &triad,
               const SceneVocabulary &vocabulary) {
  const ObjectLabel &label = scene.objects.at(p);
  if (label.category != triad.target) return false;
  const std::string &d = triad.discriminative;
  if (d == EmbeddingTable::kSelf) return true;
  if (vocabulary.IsAttribute(d)) return label.attribute == d;
  const RelationWord *relation = vocabulary.FindRelation(d);
  if (relation == nullptr) return false;
  const Box &box = scene.scene.proposals[p].box;
  switch (relation->kind) {
    case RelationKind::kLeft:
      return IsLeft(box, scene.scene.width);
    case RelationKind::kRight:
      return IsRight(box, scene.scene.width);
    case RelationKind::kOn:
    case RelationKind::kUnder:
      for (std::size_t q = 0; q < scene.objects.size(); ++q) {
        if (q == p || scene.objects[q].category != triad.reference) continue;
        const Box &other = scene.scene.proposals[q].box;
        const bool holds = relation->kind == RelationKind::kOn
                               ? IsOn(box, other, scene.scene.height)
                               : IsOn(other, box, scene.scene.height);
        if (holds) return true;
      }
      return false;
  }
  return false;
}

std::vector<std::size_t> SatisfyingProposals(const LabeledScene &scene,
                                             std::span<const DiscriminativeTriad> triads,
                                             const SceneVocabulary &vocabulary) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < scene.objects.size(); ++p) {
    const bool all = std::all_of(triads.begin(), triads.end(), [&](const auto &t) {
      return Satisfies(scene, p, t, vocabulary);
    });
    if (all) out.push_back(p);
  }
  return out;
}

DependencyParse ParseForTriads(std::span<const DiscriminativeTriad> triads,
                               const SceneVocabulary &vocabulary,
                               const std::string &sentence_id) {
  if (triads.empty()) throw InvariantError("cannot verbalise an empty triad set");
  const std::string &noun = triads.front().target;
  std::vector<std::string> modifiers;
  std::vector<const DiscriminativeTriad *> relations;
  for (const DiscriminativeTriad &t : triads) {
    if (t.target != noun) throw InvariantError("triads must share one target noun");
    if (t.discriminative == EmbeddingTable::kSelf) continue;
    const RelationWord *r = vocabulary.FindRelation(t.discriminative);
    if (r && (r->kind == RelationKind::kOn || r->kind == RelationKind::kUnder)) {
      relations.push_back(&t);
    } else {
      modifiers.push_back(t.discriminative);
    }
  }
  // Spatial words read naturally before colours: "the left red cat".
  std::stable_partition(modifiers.begin(), modifiers.end(), [&](const std::string &w) {
    return vocabulary.FindRelation(w) != nullptr;
  });

  DependencyParse parse;
  parse.sentence_id = sentence_id;
  auto push = [&](std::string surface, std::string pos, std::size_t head, std::string rel) {
    parse.tokens.push_back({parse.tokens.size() + 1, std::move(surface), std::move(pos),
                            head, std::move(rel)});
  };
  const std::size_t noun_index = modifiers.size() + 2;
  push("the", "DT", noun_index, "det");
  for (const std::string &m : modifiers) push(m, "JJ", noun_index, "amod");
  push(noun, "NN", 0, "root");
  for (const DiscriminativeTriad *r : relations) {
    const std::size_t base = parse.tokens.size();
    push(r->discriminative, "IN", base + 3, "case");
    push("the", "DT", base + 3, "det");
    push(r->reference, "NN", noun_index, "nmod");
  }
  return parse;
}

ParsedQuery GenerateQuery(const LabeledScene &scene, std::size_t target, std::uint64_t seed,
                          const SceneVocabulary &vocabulary, const QueryOptions &options,
                          const std::string &query_id) {
  if (target >= scene.objects.size() || scene.objects.size() != scene.scene.proposals.size()) {
    throw InvariantError("target " + std::to_string(target) + " is not a labeled proposal");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ObjectLabel &label = scene.objects[target];
  const std::string &noun = label.category;

  std::vector<DiscriminativeTriad> available;
  available.push_back({noun, noun, label.attribute, 0});
  for (const RelationWord &r : vocabulary.relations) {
    if (r.kind == RelationKind::kLeft || r.kind == RelationKind::kRight) {
      if (ClearlySided(scene, target, r.kind)) available.push_back({noun, noun, r.word, 0});
      continue;
    }
    for (std::size_t q = 0; q < scene.objects.size(); ++q) {
      if (q == target) continue;
      const Box &a = scene.scene.proposals[target].box;
      const Box &b = scene.scene.proposals[q].box;
      const bool holds = r.kind == RelationKind::kOn ? IsOn(a, b, scene.scene.height)
                                                     : IsOn(b, a, scene.scene.height);
      DiscriminativeTriad t{noun, scene.objects[q].category, r.word, 0};
      if (holds && std::none_of(available.begin(), available.end(),
                                [&](const auto &x) { return SameTriad(x, t); })) {
        available.push_back(t);
      }
    }
  }
  std::shuffle(available.begin(), available.end(), rng);

  auto unique = [&](const std::vector<DiscriminativeTriad> &triads) {
    const auto hits = SatisfyingProposals(scene, triads, vocabulary);
    return hits.size() == 1 && hits.front() == target;
  };

  std::vector<DiscriminativeTriad> chosen;
  const std::vector<DiscriminativeTriad> bare = {{noun, noun, std::string(EmbeddingTable::kSelf), 0}};
  const double self_draw = unit(rng);
  if (unique(bare) && self_draw < options.self_probability) {
    chosen = bare;
  } else {
    std::size_t used = 0;
    while (used < available.size() && !unique(chosen)) chosen.push_back(available[used++]);
    if (chosen.empty() || !unique(chosen)) {
      if (!unique(bare)) {
        throw AmbiguityError("no description singles out proposal " + std::to_string(target) +
                             " in scene '" + scene.scene.scene_id + "'");
      }
      chosen = bare;
    } else if (used < available.size() && unit(rng) < options.extra_triad_probability) {
      chosen.push_back(available[used]);
    }
  }

  DependencyParse parse = ParseForTriads(chosen, vocabulary, query_id);
  ParsedQuery query = ExtractTriads(parse);
  const bool same_set =
      query.triads.size() == chosen.size() &&
      std::all_of(chosen.begin(), chosen.end(), [&](const DiscriminativeTriad &c) {
        return std::any_of(query.triads.begin(), query.triads.end(),
                           [&](const auto &q) { return SameTriad(c, q); });
      });
  if (!same_set) throw InvariantError("generated parse does not reproduce its triads");
  query.query_id = query_id;
  return query;
}

LabeledScene GenerateScene(const SceneVocabulary &vocabulary, const SceneConfig &config,
                           std::uint64_t seed, const std::string &scene_id) {
  config.Validate(vocabulary);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_category(0, vocabulary.categories.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_attribute(0, vocabulary.attributes.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  const QueryOptions options{config.self_probability, config.extra_triad_probability};

  for (int attempt = 0; attempt < 100; ++attempt) {
    LabeledScene out;
    out.scene.scene_id = scene_id;
    out.scene.width = config.width;
    out.scene.height = config.height;
    const std::vector<Box> boxes = PlaceBoxes(config, rng);
    for (const Box &box : boxes) {
      ObjectLabel label{vocabulary.categories[pick_category(rng)],
                        vocabulary.attributes[pick_attribute(rng)]};
      Proposal p;
      p.box = box;
      p.spatial = ComputeSpatialFeature(box, config.width, config.height);
      p.visual.assign(config.visual_dim, 0.0);
      p.visual[vocabulary.category_slot(label.category)] = 1.0;
      p.visual[vocabulary.attribute_slot(label.attribute)] = 1.0;
      for (std::size_t k = vocabulary.layout_slots(); k < config.visual_dim; ++k) {
        p.visual[k] = config.noise * noise(rng);
      }
      out.scene.proposals.push_back(std::move(p));
      out.objects.push_back(std::move(label));
    }

    std::vector<std::size_t> order(config.num_proposals);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t target : order) {
      if (out.ground_truth.size() == config.queries_per_scene) break;
      const std::string query_id =
          scene_id + "-q" + std::to_string(out.ground_truth.size() + 1);
      try {
        out.scene.queries.push_back(
            GenerateQuery(out, target, rng(), vocabulary, options, query_id));
        out.ground_truth.push_back(target);
      } catch (const AmbiguityError &) {
      }
    }
    if (out.ground_truth.size() == config.queries_per_scene) return out;
  }
  throw ConfigError("could not generate " + std::to_string(config.queries_per_scene) +
                    " unambiguous queries for scene '" + scene_id + "'");
}

std::vector<LabeledScene> GenerateScenes(const SceneVocabulary &vocabulary,
                                         const SceneConfig &config, std::size_t count,
                                         std::uint64_t seed) {
  std::vector<LabeledScene> scenes;
  scenes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    scenes.push_back(GenerateScene(vocabulary, config, MixSeed(seed, k),
                                   "s" + std::to_string(seed) + "-" + std::to_string(k)));
  }
  return scenes;
}

EmbeddingTable SyntheticEmbeddings(const SceneVocabulary &vocabulary, std::size_t dimension,
                                   std::uint64_t seed) {
  EmbeddingTable table(dimension, seed);
  std::mt19937_64 rng(MixSeed(seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  auto add = [&](const std::string &word) {
    std::vector<double> row(dimension);
    double norm = 0.0;
    // Gram-Schmidt against earlier rows while the space has room left; a
    // degenerate draw is redrawn.
    while (norm < 1e-6) {
      for (double &x : row) x = gauss(rng);
      if (basis.size() < dimension) {
        for (const std::vector<double> &b : basis) {
          double d = 0.0;
          for (std::size_t i = 0; i < dimension; ++i) d += row[i] * b[i];
          for (std::size_t i = 0; i < dimension; ++i) row[i] -= d * b[i];
        }
      }
      norm = 0.0;
      for (double x : row) norm += x * x;
      norm = std::sqrt(norm);
    }
    for (double &x : row) x /= norm;
    if (basis.size() < dimension) basis.push_back(row);
    table.Set(word, std::move(row));
  };
  for (const std::string &w : vocabulary.categories) add(w);
  for (const std::string &w : vocabulary.attributes) add(w);
  for (const RelationWord &r : vocabulary.relations) add(r.word);
  return table;
}

}  // namespace grounding
