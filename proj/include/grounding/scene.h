#ifndef GROUNDING_SCENE_H_
#define GROUNDING_SCENE_H_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "grounding/triad_parser.h"

namespace grounding {

// Corner-form box in pixels.
struct Box {
  double x_tl = 0, y_tl = 0, x_br = 0, y_br = 0;

  double width() const { return x_br - x_tl; }
  double height() const { return y_br - y_tl; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_tl + x_br); }

  friend bool operator==(const Box &, const Box &) = default;
};

// Throws InvariantError for degenerate boxes.
void ValidateBox(const Box &box);

inline constexpr std::size_t kSpatialDim = 5;
using SpatialFeature = std::array<double, kSpatialDim>;

// [x_tl/W, y_tl/H, x_br/W, y_br/H, w*h/(W*H)]
SpatialFeature ComputeSpatialFeature(const Box &box, double width, double height);

struct Proposal {
  Box box;
  std::vector<double> visual;
  SpatialFeature spatial{};
};

// What the trainer sees: proposals and parsed queries, no grounding labels.
struct Scene {
  std::string scene_id;
  double width = 0;
  double height = 0;
  std::vector<Proposal> proposals;
  std::vector<ParsedQuery> queries;

  std::size_t visual_dim() const {
    return proposals.empty() ? 0 : proposals.front().visual.size();
  }
};

struct ObjectLabel {
  std::string category;
  std::string attribute;
  friend bool operator==(const ObjectLabel &, const ObjectLabel &) = default;
};

// Evaluation view: the scene plus the withheld answer for every query.
struct LabeledScene {
  Scene scene;
  std::vector<std::size_t> ground_truth;  // parallel to scene.queries
  std::vector<ObjectLabel> objects;       // parallel to scene.proposals
};

// f^v_i ++ f^s_i ++ f^v_j ++ f^s_j, length 2 * D_v + 10.
std::vector<double> PairFeature(const Scene &scene, std::size_t i, std::size_t j);

// Checks N >= 2, consistent feature sizes and valid boxes.
void ValidateScene(const Scene &scene);
void ValidateLabeledScene(const LabeledScene &scene);

// JSON-lines scene files. The "truth" member of each line is only decoded by
// ReadLabeledScenes.
void WriteScenes(std::ostream &out, std::span<const LabeledScene> scenes);
std::vector<Scene> ReadScenes(std::istream &in);
std::vector<LabeledScene> ReadLabeledScenes(std::istream &in);

}  // namespace grounding

#endif  // GROUNDING_SCENE_H_
