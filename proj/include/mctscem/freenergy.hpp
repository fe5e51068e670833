// freenergy.hpp -- entropy estimators and the combined candidate objective.
//
// The per-candidate score combines extrinsic reward with an ensemble
// disagreement bonus: the information gain of a transition is the entropy
// of the aggregated predictive distribution (estimated nonparametrically
// from samples) minus the average entropy of the individual member
// Gaussians.
#pragma once

#include <vector>

#include "mctscem/model.hpp"
#include "mctscem/rng.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

// Differential entropy of a diagonal Gaussian, in nats:
// 0.5 * ln((2 pi e)^d * prod var).
double gaussian_entropy(const Vec& var);

struct KnnDiagnostics {
    int floored_distances = 0;  // samples whose k-NN distance hit the floor
};

// Kozachenko-Leonenko k-nearest-neighbor entropy estimate over the rows of
// `samples`, in nats. Coincident points are kept finite by flooring the
// neighbor distance at 1e-12 (counted in `diag`).
double knn_entropy(const Mat& samples, int k, KnnDiagnostics* diag = nullptr);

// Loop-and-sort reference implementation, kept for tests and benchmarks.
double knn_entropy_serial(const Mat& samples, int k, KnnDiagnostics* diag = nullptr);

struct EvParams {
    int samples_per_member = 20;
    int k = 3;
    bool clamp_at_zero = false;
};

struct EvBreakdown {
    double aggregate_entropy = 0.0;    // k-NN estimate over pooled member samples
    double mean_member_entropy = 0.0;  // average closed-form member entropy
    double value = 0.0;                // aggregate_entropy - mean_member_entropy
};

// Information gain of a predicted transition given the per-member
// Gaussians. Small negative values are estimator noise and are reported
// as-is unless clamping is enabled.
EvBreakdown epistemic_value_detail(const std::vector<GaussianPrediction>& members,
                                   const EvParams& params, RngStream rng);

double epistemic_value(const State& s, const Action& a, const TransitionModel& model,
                       const EvParams& params, RngStream rng);

// Per-candidate objective. Lower is better: reward contributes negatively
// and the information-gain bonus is subtracted as well, so candidates that
// promise either reward or new knowledge rank ahead.
struct CandidateEvaluation {
    double reward_sum = 0.0;
    double ev_sum = 0.0;
    double score = 0.0;  // -reward_sum - lambda * ev_sum
};

CandidateEvaluation score_candidate(const std::vector<double>& rewards,
                                    const std::vector<double>& evs, double lambda);

}  // namespace mctscem
