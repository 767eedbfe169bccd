#ifndef GROUNDING_SCENE_SYNTH_H_
#define GROUNDING_SCENE_SYNTH_H_

// Synthetic scenes with planted, checkable structure.
//
// Each proposal's visual feature is one-hot(category) ++ one-hot(attribute)
// ++ gaussian padding, so the grounding answer for a query can be recovered
// from features alone. Relations are pure functions of box geometry:
//
//   on(a, b)   horizontal overlap >= 50% of the narrower box and
//              |b.y_tl - a.y_br| <= 5% of the image height, a above b
//   under(a,b) on(b, a)
//   left(a)    box center in the left third of the image
//   right(a)   box center in the right third of the image

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grounding/scene.h"

namespace grounding {

enum class RelationKind { kOn, kUnder, kLeft, kRight };

struct RelationWord {
  std::string word;
  RelationKind kind;
};

struct SceneVocabulary {
  std::vector<std::string> categories;
  std::vector<std::string> attributes;
  std::vector<RelationWord> relations;

  // 6 categories, 6 attributes, relations on/under/left/right.
  static SceneVocabulary Default();

  // Number of visual slots the one-hot layout occupies.
  std::size_t layout_slots() const { return categories.size() + attributes.size(); }
  std::size_t category_slot(const std::string &category) const;
  std::size_t attribute_slot(const std::string &attribute) const;
  const RelationWord *FindRelation(const std::string &word) const;
  bool IsAttribute(const std::string &word) const;

  // Word lists must be non-empty and pairwise disjoint and the layout must
  // fit into visual_dim.
  void Validate(std::size_t visual_dim) const;
};

struct SceneConfig {
  std::size_t num_proposals = 8;
  std::size_t visual_dim = 32;
  double noise = 0.05;
  std::size_t queries_per_scene = 2;
  double width = 640;
  double height = 480;
  // Chance that a new object is placed resting on an earlier one.
  double stack_probability = 0.35;
  // Chance of a bare-noun query ("the cat") when the category is unique.
  double self_probability = 0.5;
  // Chance of one extra, possibly redundant, triad per query.
  double extra_triad_probability = 1.0;

  void Validate(const SceneVocabulary &vocabulary) const;
};

bool IsOn(const Box &upper, const Box &lower, double image_height);
bool IsLeft(const Box &box, double image_width);
bool IsRight(const Box &box, double image_width);

// Whether proposal p of the labeled scene satisfies the triad, evaluated
// directly from labels and box coordinates.
bool Satisfies(const LabeledScene &scene, std::size_t p, const DiscriminativeTriad &triad,
               const SceneVocabulary &vocabulary);
// Every proposal satisfying all triads, in index order.
std::vector<std::size_t> SatisfyingProposals(const LabeledScene &scene,
                                             std::span<const DiscriminativeTriad> triads,
                                             const SceneVocabulary &vocabulary);

// Builds a dependency parse whose extracted triads are exactly `triads`
// (target-only modifiers first, then one prepositional phrase per relation).
DependencyParse ParseForTriads(std::span<const DiscriminativeTriad> triads,
                               const SceneVocabulary &vocabulary,
                               const std::string &sentence_id);

struct QueryOptions {
  double self_probability = 0.5;
  double extra_triad_probability = 1.0;
};

// Describes proposal `target` so that no other proposal fits the description.
// The result carries its source parse. Throws AmbiguityError when no
// combination of available triads singles the target out.
ParsedQuery GenerateQuery(const LabeledScene &scene, std::size_t target, std::uint64_t seed,
                          const SceneVocabulary &vocabulary,
                          const QueryOptions &options = {},
                          const std::string &query_id = "q");

// Throws ConfigError when the configuration cannot be realised.
LabeledScene GenerateScene(const SceneVocabulary &vocabulary, const SceneConfig &config,
                           std::uint64_t seed, const std::string &scene_id = "scene");
std::vector<LabeledScene> GenerateScenes(const SceneVocabulary &vocabulary,
                                         const SceneConfig &config, std::size_t count,
                                         std::uint64_t seed);

// Unit-length embedding rows for every vocabulary word, mutually orthogonal
// for the first `dimension` words; a stand-in for pretrained vectors.
EmbeddingTable SyntheticEmbeddings(const SceneVocabulary &vocabulary, std::size_t dimension,
                                   std::uint64_t seed);

}  // namespace grounding

#endif  // GROUNDING_SCENE_SYNTH_H_
