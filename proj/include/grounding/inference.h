#ifndef GROUNDING_INFERENCE_H_
#define GROUNDING_INFERENCE_H_

// Picking the referred proposal from attention scores, and scoring the pick.
//
// For a triad k the pair score is  alpha * a^t_i + beta * a^r_j + gamma * a^d_ij,
// a proposal's triad score is the best pair score over j, and a proposal's
// query score is the sum of its triad scores. Ties go to the lowest index.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounding/model.h"
#include "grounding/scene.h"

namespace grounding {

struct ScoreWeights {
  double alpha = 2.0;  // target
  double beta = 1.0;   // reference
  double gamma = 1.0;  // discriminative
};

double PairScore(double target, double reference, double discriminative,
                 const ScoreWeights &weights = {});

struct BestPair {
  double score = 0.0;
  std::size_t reference = 0;  // arg of the max, lowest index on ties
};

// Max over the pair scores of one proposal. ContractError when empty.
BestPair ProposalTriadScore(std::span<const double> pair_scores);

// Triad-level table for one triad: entry i is the best pair with r_i first.
std::vector<BestPair> ProposalTriadScores(const AttentionTensors &scores,
                                          const ScoreWeights &weights = {});

// Sums per-triad proposal scores. Throws ContractError for an empty list or
// mismatched lengths.
std::vector<double> QueryScores(std::span<const std::vector<double>> per_triad);

// Index of the maximum; the lowest index wins ties. ContractError when empty.
std::size_t ArgmaxLowest(std::span<const double> values);

struct Grounding {
  std::size_t chosen = 0;
  std::vector<double> scores;                  // one per proposal
  std::vector<std::vector<double>> per_triad;  // M x N
  // Reference proposal behind each triad's score for the chosen proposal.
  std::vector<std::size_t> chosen_references;
};

Grounding GroundFromScores(std::span<const AttentionTensors> triads,
                           const ScoreWeights &weights = {});

Grounding Ground(const ModelParams &params, const SceneTensors &scene,
                 const EmbeddingTable &table, std::span<const DiscriminativeTriad> triads,
                 const ScoreWeights &weights = {});

double Iou(const Box &a, const Box &b);
inline constexpr double kIouThreshold = 0.5;

struct Prediction {
  std::string scene_id;
  std::string query_id;
  std::size_t chosen = 0;
  std::size_t ground_truth = 0;
  double iou = 0.0;
  bool correct = false;
  std::vector<double> scores;
  std::vector<std::size_t> references;
};

struct EvalSummary {
  std::size_t queries = 0;
  std::size_t correct = 0;
  double accuracy() const {
    return queries == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(queries);
  }
};

struct EvalReport {
  std::vector<Prediction> predictions;
  EvalSummary summary;
};

struct EvalOptions {
  ScoreWeights weights;
  // Score each query with one triad picked uniformly at random (seeded per
  // query) instead of all of them.
  bool single_triad = false;
  std::uint64_t seed = 0;
};

// A prediction counts as correct when its IoU with the ground-truth box
// exceeds kIouThreshold. ContractError when there are no queries.
EvalReport Evaluate(const ModelParams &params, std::span<const LabeledScene> scenes,
                    const EmbeddingTable &table, const EvalOptions &options = {});

// One JSON object per prediction, then a summary object.
void WriteReport(std::ostream &out, const EvalReport &report);

}  // namespace grounding

#endif  // GROUNDING_INFERENCE_H_
