#include "grounding/inference.h"

#include <algorithm>
#include <ostream>
#include <random>

#include <json.hpp>

#include "grounding/errors.h"
#include "grounding/seeding.h"

namespace grounding {

double PairScore(double target, double reference, double discriminative,
                 const ScoreWeights &weights) {
  return weights.alpha * target + weights.beta * reference + weights.gamma * discriminative;
}

BestPair ProposalTriadScore(std::span<const double> pair_scores) {
  if (pair_scores.empty()) throw ContractError("no pair scores to maximise over");
  BestPair best{pair_scores[0], 0};
  for (std::size_t j = 1; j < pair_scores.size(); ++j) {
    if (pair_scores[j] > best.score) best = {pair_scores[j], j};
  }
  return best;
}

std::vector<BestPair> ProposalTriadScores(const AttentionTensors &scores,
                                          const ScoreWeights &weights) {
  const std::size_t n = scores.target.size();
  if (n == 0) throw ContractError("triad scores over zero proposals");
  if (scores.reference.size() != n || scores.discriminative.rows() != n ||
      scores.discriminative.cols() != n) {
    throw ShapeError("attention scores disagree on the number of proposals");
  }
  std::vector<BestPair> out(n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = PairScore(scores.target[i], scores.reference[j],
                         scores.discriminative.at(i, j), weights);
    }
    out[i] = ProposalTriadScore(row);
  }
  return out;
}

std::vector<double> QueryScores(std::span<const std::vector<double>> per_triad) {
  if (per_triad.empty()) throw ContractError("query has no triads to score");
  std::vector<double> total(per_triad.front().size(), 0.0);
  for (const std::vector<double> &s : per_triad) {
    if (s.size() != total.size()) throw ShapeError("triad score lengths differ");
    for (std::size_t i = 0; i < s.size(); ++i) total[i] += s[i];
  }
  return total;
}

std::size_t ArgmaxLowest(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Grounding GroundFromScores(std::span<const AttentionTensors> triads,
                           const ScoreWeights &weights) {
  std::vector<std::vector<BestPair>> tables;
  tables.reserve(triads.size());
  Grounding g;
  for (const AttentionTensors &t : triads) {
    tables.push_back(ProposalTriadScores(t, weights));
    std::vector<double> row;
    for (const BestPair &b : tables.back()) row.push_back(b.score);
    g.per_triad.push_back(std::move(row));
  }
  g.scores = QueryScores(g.per_triad);
  g.chosen = ArgmaxLowest(g.scores);
  for (const std::vector<BestPair> &table : tables) {
    g.chosen_references.push_back(table[g.chosen].reference);
  }
  return g;
}

Grounding Ground(const ModelParams &params, const SceneTensors &scene,
                 const EmbeddingTable &table, std::span<const DiscriminativeTriad> triads,
                 const ScoreWeights &weights) {
  if (triads.empty()) throw ContractError("query has no triads to score");
  std::vector<AttentionTensors> scores;
  scores.reserve(triads.size());
  for (const DiscriminativeTriad &t : triads) {
    scores.push_back(ScoreTriad(params, scene, table, t));
  }
  return GroundFromScores(scores, weights);
}

double Iou(const Box &a, const Box &b) {
  const double iw = std::min(a.x_br, b.x_br) - std::max(a.x_tl, b.x_tl);
  const double ih = std::min(a.y_br, b.y_br) - std::max(a.y_tl, b.y_tl);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

EvalReport Evaluate(const ModelParams &params, std::span<const LabeledScene> scenes,
                    const EmbeddingTable &table, const EvalOptions &options) {
  EvalReport report;
  std::uint64_t query_index = 0;
  for (const LabeledScene &ls : scenes) {
    ValidateLabeledScene(ls);
    const Scene &scene = ls.scene;
    const SceneTensors tensors = BuildSceneTensors(scene, params.arch);
    for (std::size_t q = 0; q < scene.queries.size(); ++q, ++query_index) {
      const ParsedQuery &query = scene.queries[q];
      std::span<const DiscriminativeTriad> triads = query.triads;
      if (options.single_triad && triads.size() > 1) {
        std::mt19937_64 rng(MixSeed(options.seed, query_index));
        std::uniform_int_distribution<std::size_t> pick(0, triads.size() - 1);
        triads = triads.subspan(pick(rng), 1);
      }
      const Grounding g = Ground(params, tensors, table, triads, options.weights);
      Prediction p;
      p.scene_id = scene.scene_id;
      p.query_id = query.query_id;
      p.chosen = g.chosen;
      p.ground_truth = ls.ground_truth[q];
      p.iou = Iou(scene.proposals[g.chosen].box, scene.proposals[p.ground_truth].box);
      p.correct = p.iou > kIouThreshold;
      p.scores = g.scores;
      p.references = g.chosen_references;
      report.summary.queries += 1;
      report.summary.correct += p.correct ? 1 : 0;
      report.predictions.push_back(std::move(p));
    }
  }
  if (report.summary.queries == 0) throw ContractError("evaluation set has no queries");
  return report;
}

void WriteReport(std::ostream &out, const EvalReport &report) {
  for (const Prediction &p : report.predictions) {
    nlohmann::json row = {{"scene_id", p.scene_id}, {"query_id", p.query_id},
                          {"chosen", p.chosen},     {"gt", p.ground_truth},
                          {"iou", p.iou},           {"correct", p.correct},
                          {"scores", p.scores},
                          {"references", p.references}};
    out << row.dump() << '\n';
  }
  nlohmann::json summary = {{"summary",
                             {{"queries", report.summary.queries},
                              {"correct", report.summary.correct},
                              {"accuracy", report.summary.accuracy()}}}};
  out << summary.dump() << '\n';
}

}  // namespace grounding
