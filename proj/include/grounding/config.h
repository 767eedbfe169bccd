#ifndef GROUNDING_CONFIG_H_
#define GROUNDING_CONFIG_H_

// Run configuration: model shape, training schedule, scoring weights.
//
// Files hold `key = value` lines; '#' starts a comment and `[section]`
// headers are accepted and ignored. Keys:
//
//   preset                desk | paper (applied first, other keys override)
//   d_v d_l hidden_attn hidden_recon normalize_visual
//   mode tau gumbel
//   epochs iterations batch_size checkpoint_every seed
//   lr beta1 beta2 epsilon
//   loss_target loss_reference loss_discriminative reconstruct
//   alpha beta gamma

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "grounding/adam.h"
#include "grounding/inference.h"
#include "grounding/model.h"

namespace grounding {

struct TrainConfig {
  Architecture arch;
  AggregationMode mode = AggregationMode::kHard;
  double tau = 0.1;
  bool gumbel = false;
  std::size_t epochs = 3;
  // When positive, run exactly this many steps instead of whole epochs.
  std::size_t iterations = 0;
  std::size_t batch_size = 1;  // triads per step
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 1;
  AdamOptions adam;
  std::array<bool, 3> unit_loss = {true, true, true};
  bool reconstruct = true;
  std::string variant = "Ours";

  // ConfigError unless sizes, rates and the loss mask are usable.
  void Validate() const;
};

struct RunConfig {
  TrainConfig train;
  ScoreWeights weights;
};

// lr 1e-3, sized for runs of a few thousand steps.
RunConfig DeskPreset();
// lr 1.3e-5, 150000 iterations.
RunConfig PaperPreset();
RunConfig PresetByName(const std::string &name);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// ParseError with the line number for lines that are not key = value.
KeyValues ParseKeyValues(std::istream &in);
// Applies settings in order. ConfigError for unknown keys or bad values.
void ApplySettings(const KeyValues &settings, RunConfig &config);
// preset (if any) first, then the remaining keys; validates the result.
RunConfig ResolveConfig(const KeyValues &settings);
RunConfig LoadConfig(std::istream &in);
RunConfig LoadConfigFile(const std::string &path);

std::string FormatConfig(const RunConfig &config);

}  // namespace grounding

#endif  // GROUNDING_CONFIG_H_
