#ifndef GROUNDING_MODEL_H_
#define GROUNDING_MODEL_H_

// Triad matching and reconstruction network.
//
// Three attention scorers share one form,
//
//   a = W2 relu(W1 relu(x ++ e) + b1) + b2,
//
// with x the proposal feature f^v (target, reference) or the pair feature
// f^p (discriminative) and e the word embedding of the unit. Scores are
// normalised by a (tempered) softmax over proposals or pairs, features are
// averaged with those weights, and a two-layer reconstructor maps the
// aggregate back into embedding space. Training minimises the summed squared
// distance between original and rebuilt unit embeddings.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "grounding/corpus_io.h"
#include "grounding/scene.h"
#include "grounding/tensor.h"
#include "grounding/triad_parser.h"

namespace grounding {

using tensor::Tensor;
using tensor::Var;

enum class Unit { kTarget = 0, kReference = 1, kDiscriminative = 2 };
inline constexpr std::array<Unit, 3> kUnits = {Unit::kTarget, Unit::kReference,
                                               Unit::kDiscriminative};

enum class AggregationMode { kSoft, kHard };

std::string ToString(AggregationMode mode);
AggregationMode ParseAggregationMode(const std::string &text);

// Sizes that determine the parameter shapes.
struct Architecture {
  std::size_t visual_dim = 32;     // D_v
  std::size_t embedding_dim = 16;  // D_l
  std::size_t hidden_attention = 128;
  std::size_t hidden_reconstruction = 128;
  // Scale every f^v to unit L2 norm before use.
  bool normalize_visual = false;

  std::size_t pair_dim() const { return 2 * visual_dim + 2 * kSpatialDim; }
  std::size_t input_dim(Unit unit) const {
    return unit == Unit::kDiscriminative ? pair_dim() : visual_dim;
  }
  void Validate() const;
  friend bool operator==(const Architecture &, const Architecture &) = default;
};

// Two fully connected layers: out = relu(in * w1 + b1) * w2 + b2.
struct Mlp {
  Tensor w1, b1, w2, b2;
  friend bool operator==(const Mlp &, const Mlp &) = default;
};

struct ModelParams {
  Architecture arch;
  std::array<Mlp, 3> attention;       // indexed by Unit
  std::array<Mlp, 3> reconstruction;  // indexed by Unit
  Tensor special_rows;                // 3 x D_l: SELF, UKN, OOV

  const Mlp &attend(Unit u) const { return attention[static_cast<int>(u)]; }
  const Mlp &rebuild(Unit u) const { return reconstruction[static_cast<int>(u)]; }

  // Flat views in a fixed order, paired with TensorNames().
  std::vector<Tensor *> Tensors();
  std::vector<const Tensor *> Tensors() const;
  static std::vector<std::string> TensorNames();
  std::size_t ParameterCount() const;

  friend bool operator==(const ModelParams &, const ModelParams &) = default;
};

// Weights and biases uniform in +-1/sqrt(fan_in); special rows copied from
// the embedding table.
ModelParams InitParams(const Architecture &arch, const EmbeddingTable &table,
                       std::uint64_t seed);
// Checks every tensor against the architecture and for finiteness.
void ValidateParams(const ModelParams &params);

// Proposal features of one scene laid out for batched scoring.
struct SceneTensors {
  Tensor visual;  // N x D_v
  Tensor pairs;   // N*N x (2 D_v + 10), row i*N + j holds f^p_{i,j}
  std::size_t count = 0;
};
SceneTensors BuildSceneTensors(const Scene &scene, const Architecture &arch);

// ---------------------------------------------------------------------------
// Single-item scoring, mainly for inspection and tests.

double TargetAttention(std::span<const double> visual, std::span<const double> unit,
                       const Mlp &theta);
double ReferenceAttention(std::span<const double> visual, std::span<const double> unit,
                          const Mlp &theta);
double DiscriminativeAttention(std::span<const double> pair, std::span<const double> unit,
                               const Mlp &theta);

// Softmax(scores / tau) weighted sum of feature rows; soft mode uses tau = 1.
std::vector<double> AggregateFeatures(std::span<const double> scores, const Tensor &features,
                                      AggregationMode mode, double tau);
std::vector<double> AggregationWeights(std::span<const double> scores,
                                       AggregationMode mode, double tau);
std::vector<double> Reconstruct(std::span<const double> feature, const Mlp &theta);
double TriadLoss(const UnitEmbeddings &rebuilt, const UnitEmbeddings &original);

// ---------------------------------------------------------------------------
// Tape-level building blocks shared by training, inference and gradient checks.

struct MlpVars {
  Var w1, b1, w2, b2;
};

struct ModelVars {
  std::array<MlpVars, 3> attention;
  std::array<MlpVars, 3> reconstruction;
  Var special_rows;
  // Parameter order matches ModelParams::Tensors().
  std::vector<Var> all;
};

// Records the parameters on the tape, as trainable leaves or as constants.
ModelVars BindParams(tensor::Tape &tape, const ModelParams &params, bool trainable);

struct UnitVars {
  std::array<Var, 3> embedding;  // indexed by Unit
};

// Embeddings for one triad. SELF, UKN and words missing from the table use
// the model's trainable special rows; other words are constants.
UnitVars BindUnits(tensor::Tape &tape, const ModelVars &vars, const EmbeddingTable &table,
                   const DiscriminativeTriad &triad);

// Scores for every row of `features` (rows x 1).
Var AttentionScores(const MlpVars &theta, Var features, Var unit);
Var ApplyMlp(const MlpVars &theta, Var input);
// Softmax(scores / temperature) over all rows, then weighted sum -> 1 x width.
Var Aggregate(Var scores, Var features, double temperature);

struct ForwardOptions {
  AggregationMode mode = AggregationMode::kHard;
  double tau = 0.1;
  std::array<bool, 3> unit_loss = {true, true, true};
  // false: compare projected aggregates directly with the embeddings.
  bool reconstruct = true;
  // Used when reconstruct is false: width(unit) x D_l fixed projections.
  const std::array<Tensor, 3> *projections = nullptr;
  // Adds Gumbel(0, 1) noise to the scores before the hard softmax.
  std::mt19937_64 *gumbel = nullptr;
};

struct TriadForward {
  std::array<Var, 3> scores;      // N x 1, N x 1, N*N x 1
  std::array<Var, 3> aggregated;  // 1 x width
  std::array<Var, 3> rebuilt;     // 1 x D_l
  Var loss;                       // 1 x 1
};

TriadForward ForwardTriad(tensor::Tape &tape, const ModelVars &vars, const UnitVars &units,
                          Var visual, Var pairs, const ForwardOptions &options);

// Fixed random projections used by the no-reconstruction ablation.
std::array<Tensor, 3> FeatureProjections(const Architecture &arch, std::uint64_t seed);

// Raw attention scores of one triad over a scene.
struct AttentionTensors {
  std::vector<double> target;     // N
  std::vector<double> reference;  // N
  Tensor discriminative;          // N x N
};

AttentionTensors ScoreTriad(const ModelParams &params, const SceneTensors &scene,
                            const EmbeddingTable &table, const DiscriminativeTriad &triad);

}  // namespace grounding

#endif  // GROUNDING_MODEL_H_
