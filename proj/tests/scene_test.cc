#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grounding/errors.h"
#include "grounding/scene.h"
#include "grounding/scene_synth.h"
#include "grounding/triad_parser.h"

using namespace grounding;

namespace {

LabeledScene HandScene(const std::vector<ObjectLabel> &objects, const std::vector<Box> &boxes) {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  LabeledScene ls;
  ls.scene.scene_id = "hand";
  ls.scene.width = 600;
  ls.scene.height = 480;
  for (std::size_t k = 0; k < objects.size(); ++k) {
    Proposal p;
    p.box = boxes[k];
    p.spatial = ComputeSpatialFeature(p.box, ls.scene.width, ls.scene.height);
    p.visual.assign(32, 0.0);
    p.visual[vocab.category_slot(objects[k].category)] = 1.0;
    p.visual[vocab.attribute_slot(objects[k].attribute)] = 1.0;
    ls.scene.proposals.push_back(p);
  }
  ls.objects = objects;
  return ls;
}

bool HasTriad(const ParsedQuery &q, const std::string &t, const std::string &r,
              const std::string &d) {
  return std::any_of(q.triads.begin(), q.triads.end(), [&](const DiscriminativeTriad &x) {
    return x.target == t && x.reference == r && x.discriminative == d;
  });
}

}  // namespace

TEST_CASE("spatial features") {
  const double W = 640, H = 480;
  auto f = [&](Box b) { return ComputeSpatialFeature(b, W, H); };
  CHECK(f({0, 0, W, H}) == SpatialFeature{0, 0, 1, 1, 1});
  CHECK(f({0, 0, W / 2, H / 2}) == SpatialFeature{0, 0, 0.5, 0.5, 0.25});
  CHECK(f({W / 4, H / 4, 3 * W / 4, 3 * H / 4}) == SpatialFeature{0.25, 0.25, 0.75, 0.75, 0.25});
  CHECK_THROWS_AS(f({10, 10, 10, 20}), InvariantError);
}

TEST_CASE("spatial features are invariant to a common rescale") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    const double W = 100 + 900 * u(rng), H = 100 + 900 * u(rng), s = 0.1 + 10 * u(rng);
    const double x0 = u(rng) * W * 0.5, y0 = u(rng) * H * 0.5;
    const Box b{x0, y0, x0 + 1 + u(rng) * W * 0.4, y0 + 1 + u(rng) * H * 0.4};
    const Box scaled{b.x_tl * s, b.y_tl * s, b.x_br * s, b.y_br * s};
    const auto a = ComputeSpatialFeature(b, W, H);
    const auto c = ComputeSpatialFeature(scaled, W * s, H * s);
    for (std::size_t k = 0; k < kSpatialDim; ++k) CHECK(c[k] == doctest::Approx(a[k]).epsilon(1e-12));
  }
}

TEST_CASE("pair features") {
  const LabeledScene ls = GenerateScene(SceneVocabulary::Default(), SceneConfig{}, 5, "p");
  const Scene &s = ls.scene;
  const std::size_t half = s.visual_dim() + kSpatialDim;
  const auto same = PairFeature(s, 2, 2);
  CHECK(same.size() == 2 * 32 + 10);
  CHECK(std::equal(same.begin(), same.begin() + half, same.begin() + half));
  const auto ab = PairFeature(s, 0, 1);
  const auto ba = PairFeature(s, 1, 0);
  CHECK(std::equal(ab.begin(), ab.begin() + half, ba.begin() + half));
  CHECK(std::equal(ab.begin() + half, ab.end(), ba.begin()));
  CHECK_THROWS(PairFeature(s, 0, 8));
}

TEST_CASE("generation is seeded") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  auto text = [&](std::uint64_t seed) {
    const auto scenes = GenerateScenes(vocab, SceneConfig{}, 3, seed);
    std::ostringstream out;
    WriteScenes(out, scenes);
    return out.str();
  };
  CHECK(text(7) == text(7));
  CHECK(text(7) != text(8));
}

TEST_CASE("noise-free category slots are exactly one-hot") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  SceneConfig config;
  config.noise = 0.0;
  const LabeledScene ls = GenerateScene(vocab, config, 11, "clean");
  for (std::size_t p = 0; p < ls.objects.size(); ++p) {
    const auto &v = ls.scene.proposals[p].visual;
    for (std::size_t c = 0; c < vocab.categories.size(); ++c) {
      const double expected = vocab.categories[c] == ls.objects[p].category ? 1.0 : 0.0;
      CHECK(v[vocab.category_slot(vocab.categories[c])] == expected);
    }
  }
}

TEST_CASE("every generated query has exactly one satisfying proposal") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  const auto scenes = GenerateScenes(vocab, SceneConfig{}, 60, 21);
  std::size_t checked = 0;
  for (const LabeledScene &ls : scenes) {
    REQUIRE(ls.ground_truth.size() == ls.scene.queries.size());
    for (std::size_t q = 0; q < ls.scene.queries.size(); ++q) {
      const auto hits = SatisfyingProposals(ls, ls.scene.queries[q].triads, vocab);
      REQUIRE(hits.size() == 1);
      CHECK(hits[0] == ls.ground_truth[q]);
      ++checked;
    }
  }
  CHECK(checked == 120);
}

TEST_CASE("the only distinguishing attribute is used") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  // Two cats side by side in the middle third, differing only in colour.
  const LabeledScene ls = HandScene({{"cat", "red"}, {"cat", "black"}},
                                    {{220, 100, 280, 160}, {320, 100, 380, 160}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ParsedQuery q = GenerateQuery(ls, 0, seed, vocab);
    CHECK(HasTriad(q, "cat", "cat", "red"));
  }
}

TEST_CASE("a cat resting on a table can be described by the relation") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  // Two black cats, one resting on a table, one on the floor elsewhere.
  const LabeledScene ls =
      HandScene({{"cat", "black"}, {"table", "green"}, {"cat", "black"}},
                {{210, 100, 270, 200}, {200, 205, 320, 300}, {400, 330, 460, 430}});
  const double H = ls.scene.height;
  // Brute-force geometry: horizontal overlap >= half the narrower box, small gap.
  const Box &a = ls.scene.proposals[0].box, &b = ls.scene.proposals[1].box;
  const double overlap = std::min(a.x_br, b.x_br) - std::max(a.x_tl, b.x_tl);
  REQUIRE(overlap >= 0.5 * std::min(a.width(), b.width()));
  REQUIRE(std::abs(b.y_tl - a.y_br) <= 0.05 * H);
  CHECK(IsOn(a, b, H));
  CHECK_FALSE(IsOn(b, a, H));
  bool seen = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ParsedQuery q = GenerateQuery(ls, 0, seed, vocab);
    seen = seen || HasTriad(q, "cat", "table", "on");
    CHECK(SatisfyingProposals(ls, q.triads, vocab) == std::vector<std::size_t>{0});
  }
  CHECK(seen);
}

TEST_CASE("two proposals: a left cat and a dog") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  const LabeledScene ls = HandScene({{"dog", "red"}, {"cat", "red"}},
                                    {{400, 100, 460, 160}, {40, 100, 100, 160}});
  ParsedQuery q;
  q.query_id = "left-cat";
  q.triads = {{"cat", "cat", "left", 1}};
  CHECK(SatisfyingProposals(ls, q.triads, vocab) == std::vector<std::size_t>{1});
}

TEST_CASE("emitted parses reproduce their triads") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  for (const LabeledScene &ls : GenerateScenes(vocab, SceneConfig{}, 20, 4)) {
    for (const ParsedQuery &q : ls.scene.queries) {
      REQUIRE_FALSE(q.source_parse.tokens.empty());
      const ParsedQuery again = ExtractTriads(q.source_parse);
      REQUIRE(again.triads.size() == q.triads.size());
      for (const auto &t : q.triads) {
        CHECK(HasTriad(again, t.target, t.reference, t.discriminative));
      }
    }
  }
}

TEST_CASE("no description exists for an exact twin") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  const LabeledScene ls = HandScene({{"cat", "red"}, {"cat", "red"}},
                                    {{220, 100, 280, 160}, {320, 100, 380, 160}});
  CHECK_THROWS_AS(GenerateQuery(ls, 0, 1, vocab), AmbiguityError);
}

TEST_CASE("infeasible configurations are rejected") {
  SceneConfig config;
  config.num_proposals = 40;
  CHECK_THROWS_AS(GenerateScene(SceneVocabulary::Default(), config, 1), ConfigError);
  SceneConfig narrow;
  narrow.visual_dim = 8;
  CHECK_THROWS_AS(GenerateScene(SceneVocabulary::Default(), narrow, 1), ConfigError);
}

TEST_CASE("scene files keep the answer away from the training reader") {
  const auto scenes = GenerateScenes(SceneVocabulary::Default(), SceneConfig{}, 4, 2);
  std::ostringstream out;
  WriteScenes(out, scenes);
  std::istringstream a(out.str()), b(out.str());
  const std::vector<Scene> plain = ReadScenes(a);
  const std::vector<LabeledScene> labeled = ReadLabeledScenes(b);
  REQUIRE(plain.size() == 4);
  REQUIRE(labeled.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(labeled[k].ground_truth == scenes[k].ground_truth);
    CHECK(labeled[k].objects == scenes[k].objects);
    CHECK(plain[k].proposals.size() == scenes[k].scene.proposals.size());
    CHECK(plain[k].queries.size() == scenes[k].scene.queries.size());
    CHECK(plain[k].proposals[3].visual == scenes[k].scene.proposals[3].visual);
  }
}

TEST_CASE("synthetic embeddings are unit length and orthogonal while room lasts") {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  const EmbeddingTable table = SyntheticEmbeddings(vocab, 16, 7);
  std::vector<std::string> words(vocab.categories);
  words.insert(words.end(), vocab.attributes.begin(), vocab.attributes.end());
  for (const auto &r : vocab.relations) words.push_back(r.word);
  REQUIRE(words.size() == 16);
  for (std::size_t a = 0; a < words.size(); ++a) {
    for (std::size_t b = a; b < words.size(); ++b) {
      const auto x = table.Lookup(words[a]), y = table.Lookup(words[b]);
      double dot = 0.0;
      for (std::size_t i = 0; i < 16; ++i) dot += x[i] * y[i];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
  const EmbeddingTable small = SyntheticEmbeddings(vocab, 4, 7);
  for (const auto &w : words) {
    double n = 0.0;
    for (double v : small.Lookup(w)) n += v * v;
    CHECK(n == doctest::Approx(1.0));
  }
}
