// core.hpp -- sampling, clipping and refitting of action-sequence
// distributions.
#pragma once

#include <vector>

#include "mctscem/rng.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

// Projects each dimension onto its bound interval. Idempotent.
Action clip_action(const Action& a, const Bounds& bounds);

// Draws an H-step sequence, each entry independently from
// N(mean(t,j), var(t,j)), then clips to bounds.
ActionSequence sample_sequence(const GaussianActionDistribution& dist, RngStream& rng,
                               const Bounds& bounds);

// Refits mean and variance to the elite subset: elementwise average and
// biased (divide-by-k) variance, floored at var_floor.
GaussianActionDistribution refit(const std::vector<ActionSequence>& candidates,
                                 const std::vector<int>& elite_set, double var_floor);

}  // namespace mctscem
