#ifndef GROUNDING_ADAM_H_
#define GROUNDING_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "grounding/tensor.h"

namespace grounding {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for one parameter set. Moments are shaped like the
// parameters they were created for.
class AdamState {
 public:
  AdamState(AdamOptions options, std::span<const tensor::Tensor *const> params);

  const AdamOptions &options() const { return options_; }
  std::uint64_t step() const { return step_; }
  const std::vector<tensor::Tensor> &first_moments() const { return first_; }
  const std::vector<tensor::Tensor> &second_moments() const { return second_; }

 private:
  friend void AdamStep(std::span<tensor::Tensor *const>,
                       std::span<const tensor::Tensor>, AdamState &);
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<tensor::Tensor> first_;
  std::vector<tensor::Tensor> second_;
};

// One bias-corrected Adam update in place. Throws NumericError naming the
// offending parameter if any gradient entry is not finite; nothing is
// modified in that case.
void AdamStep(std::span<tensor::Tensor *const> params,
              std::span<const tensor::Tensor> grads, AdamState &state);

}  // namespace grounding

#endif  // GROUNDING_ADAM_H_
