#ifndef GROUNDING_TESTS_PROPERTIES_H_
#define GROUNDING_TESTS_PROPERTIES_H_

// Randomised invariant checks shared by the unit tests and the acceptance
// gate. Each returns the number of cases that broke the property.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "grounding/inference.h"
#include "grounding/model.h"

namespace grounding::props {

struct Outcome {
  std::size_t cases = 0;
  std::size_t failures = 0;
};

inline AttentionTensors RandomScores(std::mt19937_64 &rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 2.0);
  AttentionTensors a;
  a.target.resize(n);
  a.reference.resize(n);
  a.discriminative = Tensor({n, n});
  for (double &v : a.target) v = g(rng);
  for (double &v : a.reference) v = g(rng);
  for (double &v : a.discriminative.values()) v = g(rng);
  return a;
}

inline std::vector<AttentionTensors> RandomQuery(std::mt19937_64 &rng) {
  std::uniform_int_distribution<std::size_t> count(1, 12), triads(1, 5);
  const std::size_t n = count(rng);
  std::vector<AttentionTensors> out;
  for (std::size_t k = triads(rng); k > 0; --k) out.push_back(RandomScores(rng, n));
  return out;
}

// A constant added to one unit family of one triad, over every proposal or
// pair, never moves the chosen proposal.
inline Outcome ShiftInvariance(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  Outcome o;
  for (; o.cases < cases; ++o.cases) {
    std::vector<AttentionTensors> q = RandomQuery(rng);
    const std::size_t before = GroundFromScores(q).chosen;
    // Dyadic shifts keep the arithmetic exact, so ties stay ties.
    const double c = std::ldexp(std::round(shift(rng) * 64.0), -6);
    AttentionTensors &t = q[o.cases % q.size()];
    switch (o.cases % 3) {
      case 0: for (double &v : t.target) v += c; break;
      case 1: for (double &v : t.reference) v += c; break;
      default: for (double &v : t.discriminative.values()) v += c; break;
    }
    if (GroundFromScores(q).chosen != before) ++o.failures;
  }
  return o;
}

// Scores of a triad set equal the sum of the scores of any split of it.
inline Outcome Additivity(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(seed);
  Outcome o;
  for (; o.cases < cases; ++o.cases) {
    std::vector<AttentionTensors> q = RandomQuery(rng);
    std::uniform_int_distribution<std::size_t> cut(0, q.size());
    const std::size_t at = cut(rng);
    const std::vector<AttentionTensors> left(q.begin(), q.begin() + at);
    const std::vector<AttentionTensors> right(q.begin() + at, q.end());
    const Grounding all = GroundFromScores(q);
    std::vector<double> sum(all.scores.size(), 0.0);
    for (const auto *part : {&left, &right}) {
      if (part->empty()) continue;
      const Grounding g = GroundFromScores(*part);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g.scores[i];
    }
    bool ok = true;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      ok = ok && std::abs(sum[i] - all.scores[i]) <= 1e-12 * (1.0 + std::abs(sum[i]));
    }
    if (!ok) ++o.failures;
  }
  return o;
}

// Raising only the chosen proposal's target score keeps it chosen.
inline Outcome Monotonicity(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bump(0.0, 3.0);
  Outcome o;
  for (; o.cases < cases; ++o.cases) {
    std::vector<AttentionTensors> q = RandomQuery(rng);
    const std::size_t before = GroundFromScores(q).chosen;
    q[o.cases % q.size()].target[before] += bump(rng);
    if (GroundFromScores(q).chosen != before) ++o.failures;
  }
  return o;
}

inline Box RandomBox(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 100.0), s(0.5, 60.0);
  const double x = u(rng), y = u(rng);
  return {x, y, x + s(rng), y + s(rng)};
}

// iou(a, b) = iou(b, a), iou(a, a) = 1 and 0 <= iou <= 1.
inline Outcome IouLaws(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(seed);
  Outcome o;
  for (; o.cases < cases; ++o.cases) {
    const Box a = RandomBox(rng);
    // Every fourth case nudges a copy so near-identical boxes are covered.
    Box b = RandomBox(rng);
    if (o.cases % 4 == 0) b = {a.x_tl + 0.5, a.y_tl, a.x_br + 0.5, a.y_br};
    const double ab = Iou(a, b), ba = Iou(b, a);
    const bool ok = ab == ba && ab >= 0.0 && ab <= 1.0 && std::abs(Iou(a, a) - 1.0) <= 1e-15;
    if (!ok) ++o.failures;
  }
  return o;
}

}  // namespace grounding::props

#endif  // GROUNDING_TESTS_PROPERTIES_H_
