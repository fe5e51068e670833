// cem.hpp -- Cross-Entropy Method over action sequences.
//
// Used standalone as the CEM planner and as the root-distribution fitting
// stage of the tree-search planner.
#pragma once

#include <functional>
#include <vector>

#include "mctscem/core.hpp"
#include "mctscem/freenergy.hpp"
#include "mctscem/model.hpp"
#include "mctscem/rng.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

// Scores a candidate set (lower is better). The iteration index lets
// rollout-based objectives derive per-iteration random streams.
using SequenceObjective =
    std::function<std::vector<double>(const std::vector<ActionSequence>&, int iter)>;

// Indices of the k best (lowest) scores, ties broken by candidate index.
std::vector<int> select_elites(const std::vector<double>& scores, int k);

// Iterated sample -> score -> refit loop against an arbitrary objective.
// Starts from N(0, I) unless an initial distribution is supplied; with
// cem_iters == 0 the start distribution is returned unchanged.
GaussianActionDistribution cem_optimize(const SequenceObjective& objective, const Bounds& bounds,
                                        const PlannerConfig& cfg, RngStream rng,
                                        const GaussianActionDistribution* init = nullptr);

// Rolls every candidate through the model for H steps from s0, accumulating
// reward and per-step information gain. Candidates are evaluated on
// independent random streams, so results do not depend on evaluation order
// or worker count.
std::vector<CandidateEvaluation> evaluate_candidates(const State& s0,
                                                     const std::vector<ActionSequence>& candidates,
                                                     const TransitionModel& model,
                                                     const RewardSource& reward,
                                                     const PlannerConfig& cfg, RngStream rng);

// Unbatched single-threaded reference evaluator, kept for tests and
// benchmarks.
std::vector<CandidateEvaluation> evaluate_candidates_serial(
    const State& s0, const std::vector<ActionSequence>& candidates, const TransitionModel& model,
    const RewardSource& reward, const PlannerConfig& cfg, RngStream rng);

GaussianActionDistribution fit_root_distribution(const State& s0, const TransitionModel& model,
                                                 const RewardSource& reward, const Bounds& bounds,
                                                 const PlannerConfig& cfg, RngStream rng,
                                                 const GaussianActionDistribution* init = nullptr);

// Receding-horizon execution: fits the distribution and returns the first
// step of its mean, clipped to bounds.
Action cem_plan(const State& s0, const TransitionModel& model, const RewardSource& reward,
                const Bounds& bounds, const PlannerConfig& cfg, RngStream rng,
                const GaussianActionDistribution* init = nullptr,
                GaussianActionDistribution* fitted_out = nullptr);

}  // namespace mctscem
