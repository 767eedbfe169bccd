#ifndef GROUNDING_GRADCHECK_H_
#define GROUNDING_GRADCHECK_H_

// Central finite differences against the tape gradient of the triad loss,
// through attention, aggregation, reconstruction and the loss, for every
// model parameter.
//
// A coordinate whose +h and -h evaluations put some ReLU input on different
// sides of zero straddles a kink, where the loss has no derivative; such
// coordinates are counted but not compared.

#include <cstddef>
#include <cstdint>
#include <string>

#include "grounding/model.h"

namespace grounding {

struct GradCheckOptions {
  std::uint64_t seed = 1;
  AggregationMode mode = AggregationMode::kHard;
  double tau = 0.1;
  std::size_t visual_dim = 4;
  std::size_t embedding_dim = 4;
  std::size_t proposals = 3;
  std::size_t hidden_attention = 128;
  std::size_t hidden_reconstruction = 64;
  double step = 1e-4;
  // Denominator floor of the relative error, so entries whose true gradient
  // is zero are judged by absolute error instead.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::string worst;  // "tensor[index]"
  std::size_t checked = 0;
  std::size_t skipped_at_kinks = 0;
};

// relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor)
GradCheckResult GradientCheck(const GradCheckOptions &options);

}  // namespace grounding

#endif  // GROUNDING_GRADCHECK_H_
