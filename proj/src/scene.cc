#include "grounding/scene.h"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "grounding/errors.h"
#include "json.hpp"

namespace grounding {
namespace {

using nlohmann::json;

json QueryToJson(const ParsedQuery &query) {
  json triads = json::array();
  for (const DiscriminativeTriad &t : query.triads)
    triads.push_back({t.target, t.reference, t.discriminative});
  json out = {{"query_id", query.query_id}, {"triads", triads}};
  if (!query.source_parse.tokens.empty()) {
    std::ostringstream conllu;
    const DependencyParse parses[] = {query.source_parse};
    WriteParses(conllu, parses);
    out["parse"] = conllu.str();
  }
  return out;
}

ParsedQuery QueryFromJson(const json &j) {
  ParsedQuery query;
  query.query_id = j.at("query_id").get<std::string>();
  for (const json &t : j.at("triads")) {
    if (!t.is_array() || t.size() != 3) throw ParseError("triad must be a 3-element array", 0);
    DiscriminativeTriad triad{t[0].get<std::string>(), t[1].get<std::string>(),
                              t[2].get<std::string>(), query.triads.size() + 1};
    ValidateTriad(triad);
    query.triads.push_back(std::move(triad));
  }
  if (query.triads.empty()) {
    throw InvariantError("query '" + query.query_id + "' has no triads");
  }
  if (j.contains("parse")) {
    std::istringstream conllu(j.at("parse").get<std::string>());
    auto parses = ReadParses(conllu);
    if (parses.size() != 1) throw ParseError("query parse must hold one sentence", 0);
    query.source_parse = std::move(parses.front());
  }
  return query;
}

Scene SceneFromJson(const json &j) {
  Scene scene;
  scene.scene_id = j.at("scene_id").get<std::string>();
  scene.width = j.at("width").get<double>();
  scene.height = j.at("height").get<double>();
  for (const json &p : j.at("proposals")) {
    Proposal proposal;
    const auto box = p.at("box").get<std::vector<double>>();
    if (box.size() != 4) throw ParseError("box must have 4 coordinates", 0);
    proposal.box = {box[0], box[1], box[2], box[3]};
    proposal.visual = p.at("visual").get<std::vector<double>>();
    proposal.spatial = ComputeSpatialFeature(proposal.box, scene.width, scene.height);
    scene.proposals.push_back(std::move(proposal));
  }
  for (const json &q : j.at("queries")) scene.queries.push_back(QueryFromJson(q));
  ValidateScene(scene);
  return scene;
}

template <typename Fn>
void ForEachLine(std::istream &in, Fn &&fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception &e) {
      throw ParseError(std::string("scene file: ") + e.what(), line_no);
    } catch (const ParseError &e) {
      if (e.line() != 0) throw;
      throw ParseError(std::string("scene file: ") + e.what(), line_no);
    }
  }
}

}  // namespace

void ValidateBox(const Box &box) {
  const bool finite = std::isfinite(box.x_tl) && std::isfinite(box.y_tl) &&
                      std::isfinite(box.x_br) && std::isfinite(box.y_br);
  if (!finite || !(box.x_tl < box.x_br) || !(box.y_tl < box.y_br)) {
    std::ostringstream os;
    os << "degenerate box (" << box.x_tl << ", " << box.y_tl << ", " << box.x_br
       << ", " << box.y_br << ")";
    throw InvariantError(os.str());
  }
}

SpatialFeature ComputeSpatialFeature(const Box &box, double width, double height) {
  ValidateBox(box);
  if (!(width > 0) || !(height > 0)) {
    throw InvariantError("image size must be positive");
  }
  return {box.x_tl / width, box.y_tl / height, box.x_br / width, box.y_br / height,
          (box.width() * box.height()) / (width * height)};
}

std::vector<double> PairFeature(const Scene &scene, std::size_t i, std::size_t j) {
  const std::size_t n = scene.proposals.size();
  if (i >= n || j >= n) {
    throw ShapeError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                     ") out of range for " + std::to_string(n) + " proposals");
  }
  std::vector<double> out;
  out.reserve(2 * scene.visual_dim() + 2 * kSpatialDim);
  for (std::size_t k : {i, j}) {
    const Proposal &p = scene.proposals[k];
    out.insert(out.end(), p.visual.begin(), p.visual.end());
    out.insert(out.end(), p.spatial.begin(), p.spatial.end());
  }
  return out;
}

void ValidateScene(const Scene &scene) {
  const std::string where = "scene '" + scene.scene_id + "': ";
  if (scene.proposals.size() < 2) throw InvariantError(where + "needs at least 2 proposals");
  if (!(scene.width > 0) || !(scene.height > 0)) {
    throw InvariantError(where + "image size must be positive");
  }
  const std::size_t dim = scene.visual_dim();
  for (const Proposal &p : scene.proposals) {
    ValidateBox(p.box);
    if (p.visual.size() != dim || dim == 0) {
      throw InvariantError(where + "inconsistent visual feature length");
    }
  }
}

void ValidateLabeledScene(const LabeledScene &scene) {
  ValidateScene(scene.scene);
  if (scene.ground_truth.size() != scene.scene.queries.size()) {
    throw InvariantError("scene '" + scene.scene.scene_id +
                         "': one ground-truth index per query required");
  }
  for (std::size_t gt : scene.ground_truth) {
    if (gt >= scene.scene.proposals.size()) {
      throw InvariantError("scene '" + scene.scene.scene_id +
                           "': ground-truth index out of range");
    }
  }
}

void WriteScenes(std::ostream &out, std::span<const LabeledScene> scenes) {
  for (const LabeledScene &labeled : scenes) {
    const Scene &scene = labeled.scene;
    json proposals = json::array();
    for (const Proposal &p : scene.proposals) {
      proposals.push_back({{"box", {p.box.x_tl, p.box.y_tl, p.box.x_br, p.box.y_br}},
                           {"visual", p.visual}});
    }
    json queries = json::array();
    for (const ParsedQuery &q : scene.queries) queries.push_back(QueryToJson(q));
    json objects = json::array();
    for (const ObjectLabel &o : labeled.objects)
      objects.push_back({{"category", o.category}, {"attribute", o.attribute}});
    json line = {{"scene_id", scene.scene_id},
                 {"width", scene.width},
                 {"height", scene.height},
                 {"proposals", proposals},
                 {"queries", queries},
                 {"truth", {{"ground_truth", labeled.ground_truth}, {"objects", objects}}}};
    out << line.dump() << '\n';
  }
}

std::vector<Scene> ReadScenes(std::istream &in) {
  std::vector<Scene> scenes;
  ForEachLine(in, [&](const json &j) { scenes.push_back(SceneFromJson(j)); });
  return scenes;
}

std::vector<LabeledScene> ReadLabeledScenes(std::istream &in) {
  std::vector<LabeledScene> scenes;
  ForEachLine(in, [&](const json &j) {
    LabeledScene labeled;
    labeled.scene = SceneFromJson(j);
    if (!j.contains("truth")) {
      throw ParseError("scene '" + labeled.scene.scene_id + "' carries no ground truth", 0);
    }
    const json &truth = j.at("truth");
    labeled.ground_truth = truth.at("ground_truth").get<std::vector<std::size_t>>();
    if (truth.contains("objects")) {
      for (const json &o : truth.at("objects")) {
        labeled.objects.push_back(
            {o.at("category").get<std::string>(), o.at("attribute").get<std::string>()});
      }
    }
    ValidateLabeledScene(labeled);
    scenes.push_back(std::move(labeled));
  });
  return scenes;
}

}  // namespace grounding
