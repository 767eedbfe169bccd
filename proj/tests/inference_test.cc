#include <doctest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grounding/errors.h"
#include "grounding/inference.h"
#include "grounding/scene_synth.h"
#include "properties.h"

using namespace grounding;

TEST_CASE("pair scores") {
  CHECK(PairScore(1, 1, 1) == 4.0);
  CHECK(PairScore(0.5, -0.2, 0.3) == doctest::Approx(1.1));
  CHECK(PairScore(0.7, 9.0, -2.5, {0, 0, 1}) == -2.5);
}

TEST_CASE("best pair per proposal") {
  const BestPair b = ProposalTriadScore(std::vector<double>{0.2, 0.9, 0.1});
  CHECK(b.score == 0.9);
  CHECK(b.reference == 1);
  CHECK(ProposalTriadScore(std::vector<double>{-3.0}).score == -3.0);
  const BestPair tie = ProposalTriadScore(std::vector<double>{0.5, 0.5});
  CHECK(tie.score == 0.5);
  CHECK(tie.reference == 0);
  CHECK_THROWS_AS(ProposalTriadScore(std::vector<double>{}), ContractError);
}

TEST_CASE("argmax breaks ties low") {
  CHECK(ArgmaxLowest(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK(ArgmaxLowest(std::vector<double>{7}) == 0);
  CHECK_THROWS_AS(ArgmaxLowest(std::vector<double>{}), ContractError);
}

TEST_CASE("grounding tables by hand") {
  AttentionTensors a;
  a.target = {1.0, 0.0};
  a.reference = {0.0, 2.0};
  a.discriminative = Tensor::Matrix({{0.0, 0.5}, {3.0, 0.0}});
  // row 0: 2*1 + [0 + 0, 2 + 0.5] -> 4.5 at j = 1
  // row 1: 2*0 + [0 + 3, 2 + 0]   -> 3.0 at j = 0
  const Grounding g = GroundFromScores(std::vector<AttentionTensors>{a});
  CHECK(g.scores == std::vector<double>{4.5, 3.0});
  CHECK(g.per_triad.size() == 1);
  CHECK(g.per_triad[0].size() == 2);
  CHECK(g.chosen == 0);
  CHECK(g.chosen_references == std::vector<std::size_t>{1});
  AttentionTensors bad = a;
  bad.reference.push_back(1.0);
  CHECK_THROWS_AS(GroundFromScores(std::vector<AttentionTensors>{bad}), ShapeError);
  CHECK_THROWS_AS(GroundFromScores(std::vector<AttentionTensors>{}), ContractError);
}

TEST_CASE("a proposal dominating every unit is chosen") {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 100; ++n) {
    AttentionTensors a = props::RandomScores(rng, 6);
    const std::size_t star = n % 6;
    a.target[star] = 100.0;
    a.reference[star] = 100.0;
    for (std::size_t j = 0; j < 6; ++j) a.discriminative.at(star, j) = 100.0;
    CHECK(GroundFromScores(std::vector<AttentionTensors>{a}).chosen == star);
  }
}

TEST_CASE("iou") {
  const Box a{0, 0, 1, 1};
  CHECK(Iou(a, a) == 1.0);
  CHECK(Iou(a, {2, 2, 3, 3}) == 0.0);
  CHECK(Iou(a, {1, 0, 2, 1}) == 0.0);
  CHECK(Iou(a, {0.5, 0, 1.5, 1}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("inference properties over random cases") {
  const props::Outcome shift = props::ShiftInvariance(101, 1000);
  const props::Outcome add = props::Additivity(102, 1000);
  const props::Outcome mono = props::Monotonicity(103, 1000);
  const props::Outcome iou = props::IouLaws(104, 1000);
  CHECK(shift.cases == 1000);
  CHECK(shift.failures == 0);
  CHECK(add.failures == 0);
  CHECK(mono.failures == 0);
  CHECK(iou.failures == 0);
}

namespace {

struct Fixture {
  SceneVocabulary vocab = SceneVocabulary::Default();
  std::vector<LabeledScene> scenes = GenerateScenes(vocab, SceneConfig{}, 10, 77);
  EmbeddingTable table = SyntheticEmbeddings(vocab, 16, 7);
  ModelParams params = InitParams(Architecture{}, table, 3);
};

}  // namespace

TEST_CASE("evaluation reports") {
  Fixture f;
  const EvalReport report = Evaluate(f.params, f.scenes, f.table);
  CHECK(report.summary.queries == 20);
  CHECK(report.predictions.size() == 20);
  std::size_t correct = 0;
  for (const Prediction &p : report.predictions) {
    CHECK(p.correct == (p.iou > kIouThreshold));
    CHECK(p.scores.size() == 8);
    correct += p.correct;
  }
  CHECK(report.summary.correct == correct);

  std::ostringstream out;
  WriteReport(out, report);
  std::istringstream lines(out.str());
  std::string line;
  std::size_t rows = 0;
  nlohmann::json last;
  while (std::getline(lines, line)) {
    last = nlohmann::json::parse(line);
    if (!last.contains("summary")) {
      for (const char *key : {"query_id", "chosen", "gt", "iou", "correct", "scores"}) {
        CHECK(last.contains(key));
      }
      ++rows;
    }
  }
  CHECK(rows == 20);
  CHECK(last["summary"]["queries"] == 20);
}

TEST_CASE("choosing the ground truth everywhere scores 1.0") {
  Fixture f;
  EvalReport report;
  for (const LabeledScene &ls : f.scenes) {
    for (std::size_t q = 0; q < ls.scene.queries.size(); ++q) {
      const Box &gt = ls.scene.proposals[ls.ground_truth[q]].box;
      const double iou = Iou(gt, gt);
      report.summary.queries += 1;
      report.summary.correct += iou > kIouThreshold;
    }
  }
  CHECK(report.summary.accuracy() == 1.0);
}

TEST_CASE("single-triad evaluation is seeded") {
  Fixture f;
  EvalOptions a;
  a.single_triad = true;
  a.seed = 5;
  const EvalReport r1 = Evaluate(f.params, f.scenes, f.table, a);
  const EvalReport r2 = Evaluate(f.params, f.scenes, f.table, a);
  for (std::size_t k = 0; k < r1.predictions.size(); ++k) {
    CHECK(r1.predictions[k].chosen == r2.predictions[k].chosen);
    CHECK(r1.predictions[k].references.size() == 1);
  }
}

TEST_CASE("an empty evaluation set is an error") {
  Fixture f;
  CHECK_THROWS_AS(Evaluate(f.params, std::vector<LabeledScene>{}, f.table), ContractError);
}
