#include "grounding/adam.h"

#include <cmath>
#include <string>

#include "grounding/errors.h"

namespace grounding {

using tensor::Tensor;

AdamState::AdamState(AdamOptions options, std::span<const Tensor *const> params)
    : options_(options) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const Tensor *p : params) {
    first_.emplace_back(p->shape(), 0.0);
    second_.emplace_back(p->shape(), 0.0);
  }
}

void AdamStep(std::span<Tensor *const> params, std::span<const Tensor> grads,
              AdamState &state) {
  if (params.size() != grads.size() || params.size() != state.first_.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.first_.size()) + " moment slots");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->shape() != grads[p].shape() ||
        params[p]->shape() != state.first_[p].shape()) {
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(p) +
                       ": " + tensor::ShapeString(params[p]->shape()) + " vs grad " +
                       tensor::ShapeString(grads[p].shape()));
    }
    for (std::size_t i = 0; i < grads[p].size(); ++i) {
      if (!std::isfinite(grads[p][i])) {
        throw NumericError("adam: non-finite gradient in parameter " +
                           std::to_string(p) + " at element " + std::to_string(i) +
                           " (step " + std::to_string(state.step_ + 1) + ")");
      }
    }
  }

  const AdamOptions &o = state.options_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor &param = *params[p];
    Tensor &m = state.first_[p];
    Tensor &v = state.second_[p];
    const Tensor &g = grads[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      param[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace grounding
