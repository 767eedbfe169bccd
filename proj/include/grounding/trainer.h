#ifndef GROUNDING_TRAINER_H_
#define GROUNDING_TRAINER_H_

// Weakly supervised training. The only signal is how well each triad's
// words can be rebuilt from the visual features its attention selects; the
// trainer's scene view has no field for the grounding answer.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grounding/config.h"
#include "grounding/corpus_io.h"
#include "grounding/errors.h"
#include "grounding/model.h"
#include "grounding/scene.h"

namespace grounding {

struct LogEntry {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;     // mean over the batch
  std::string variant;
};

struct TrainHooks {
  std::function<void(const LogEntry &)> on_step;
  // Called every checkpoint_every steps when that is positive.
  std::function<void(const ModelParams &, std::size_t step)> on_checkpoint;
};

struct TrainResult {
  ModelParams params;
  std::vector<LogEntry> log;
};

// Thrown when a step produces a non-finite loss or gradient. Carries the
// parameters as they were before the failing step.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string &what, ModelParams last_good, std::size_t step)
      : NumericError(what), last_good_(std::move(last_good)), step_(step) {}
  const ModelParams &last_good() const { return last_good_; }
  std::size_t step() const { return step_; }

 private:
  ModelParams last_good_;
  std::size_t step_;
};

// One sample per (scene, query, triad); an epoch visits each once in a
// seeded random order. ContractError for an empty dataset.
TrainResult Train(std::span<const Scene> scenes, const EmbeddingTable &table,
                  const TrainConfig &config, const TrainHooks &hooks = {});

// Loss of one triad under the given options, for diagnostics and tests.
double EvaluateTriadLoss(const ModelParams &params, const Scene &scene,
                         const EmbeddingTable &table, const DiscriminativeTriad &triad,
                         const TrainConfig &config);

void WriteLog(std::ostream &out, std::span<const LogEntry> log);

// Rows of the ablation table.
inline constexpr const char *kAblationVariants[] = {
    "w/o L^t", "w/o L^d", "w/o L^r", "w/o Recon", "Soft", "Single", "Ours"};

// The training configuration a variant uses, derived from the baseline.
// "Single" trains like "Ours" and differs only at evaluation time.
TrainConfig VariantConfig(const TrainConfig &base, const std::string &variant);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  // Mean accuracy of a variant across seeds; DomainError when absent.
  double Mean(const std::string &variant) const;
};

struct AblationOptions {
  std::vector<std::string> variants = {std::begin(kAblationVariants),
                                       std::end(kAblationVariants)};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  ScoreWeights weights;
  std::function<void(const AblationRow &)> on_row;
};

// Trains every variant for every seed on `train` and reports held-out
// accuracy on `test`.
AblationReport Ablate(std::span<const Scene> train, std::span<const LabeledScene> test,
                      const EmbeddingTable &table, const TrainConfig &base,
                      const AblationOptions &options);

void WriteAblation(std::ostream &out, const AblationReport &report,
                   std::span<const std::string> variants);

}  // namespace grounding

#endif  // GROUNDING_TRAINER_H_
