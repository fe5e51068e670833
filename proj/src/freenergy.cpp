#include "mctscem/freenergy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

namespace mctscem {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kDistanceFloor = 1e-12;

// ln c_d for the estimator's diameter convention: a ball of diameter eps
// has volume c_d * eps^d, so c_d is the Euclidean unit-ball volume divided
// by 2^d. Pairing the radius-ball volume with doubled distances would bias
// every estimate by d ln 2.
double log_unit_ball_volume(int d) {
    return 0.5 * d * std::log(kPi) - std::lgamma(0.5 * d + 1.0) - d * std::log(2.0);
}

// Distance from row i to its k-th nearest neighbor, floored.
double kth_neighbor_distance(const Mat& samples, Eigen::Index i, int k,
                             std::vector<double>& scratch, bool full_sort, int* floored) {
    const Eigen::Index n = samples.rows();
    scratch.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        scratch.push_back((samples.row(i) - samples.row(j)).norm());
    }
    if (full_sort) {
        std::sort(scratch.begin(), scratch.end());
    } else {
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    }
    double dist = scratch[static_cast<std::size_t>(k - 1)];
    if (dist < kDistanceFloor) {
        dist = kDistanceFloor;
        ++*floored;
    }
    return dist;
}

double knn_entropy_impl(const Mat& samples, int k, KnnDiagnostics* diag, bool parallel) {  // NOLINT
    const Eigen::Index n = samples.rows();
    const int d = static_cast<int>(samples.cols());
    if (k < 1 || n <= k) throw std::invalid_argument("knn_entropy: requires 1 <= k < sample count");
    if (!samples.allFinite()) throw std::invalid_argument("knn_entropy: non-finite samples");

    std::vector<double> log_eps(static_cast<std::size_t>(n));
    int floored = 0;

    // Team startup costs more than the O(n^2) scan for small sample sets,
    // and the candidate evaluator already parallelizes across candidates.
    if (n < 256) parallel = false;

    if (parallel) {
#pragma omp parallel reduction(+ : floored)
        {
            std::vector<double> scratch;
            scratch.reserve(static_cast<std::size_t>(n));
            int local_floored = 0;
#pragma omp for schedule(static)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double dist =
                    kth_neighbor_distance(samples, i, k, scratch, false, &local_floored);
                log_eps[static_cast<std::size_t>(i)] = std::log(2.0 * dist);
            }
            floored += local_floored;
        }
    } else {
        std::vector<double> scratch;
        scratch.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double dist = kth_neighbor_distance(samples, i, k, scratch, true, &floored);
            log_eps[static_cast<std::size_t>(i)] = std::log(2.0 * dist);
        }
    }
    if (diag != nullptr) diag->floored_distances = floored;

    // Summed in index order so the result is independent of thread count.
    double sum_log_eps = 0.0;
    for (double v : log_eps) sum_log_eps += v;

    return boost::math::digamma(static_cast<double>(n)) - boost::math::digamma(static_cast<double>(k)) +
           log_unit_ball_volume(d) + (static_cast<double>(d) / static_cast<double>(n)) * sum_log_eps;
}

}  // namespace

double gaussian_entropy(const Vec& var) {
    if (var.size() == 0) throw std::invalid_argument("gaussian_entropy: empty variance vector");
    if (!(var.array() > 0.0).all())
        throw std::invalid_argument("gaussian_entropy: variances must be positive");
    const double d = static_cast<double>(var.size());
    return 0.5 * (d * std::log(2.0 * kPi * std::exp(1.0)) + var.array().log().sum());
}

double knn_entropy(const Mat& samples, int k, KnnDiagnostics* diag) {
    return knn_entropy_impl(samples, k, diag, true);
}

double knn_entropy_serial(const Mat& samples, int k, KnnDiagnostics* diag) {
    return knn_entropy_impl(samples, k, diag, false);
}

EvBreakdown epistemic_value_detail(const std::vector<GaussianPrediction>& members,
                                   const EvParams& params, RngStream rng) {
    if (members.size() < 2)
        throw std::invalid_argument("epistemic_value: needs an ensemble of at least 2 members");

    const Mat samples = draw_aggregate_samples(members, params.samples_per_member, rng);

    EvBreakdown out;
    out.aggregate_entropy = knn_entropy(samples, params.k);
    double member_sum = 0.0;
    for (const GaussianPrediction& p : members) member_sum += gaussian_entropy(p.var);
    out.mean_member_entropy = member_sum / static_cast<double>(members.size());
    out.value = out.aggregate_entropy - out.mean_member_entropy;
    if (params.clamp_at_zero && out.value < 0.0) out.value = 0.0;
    return out;
}

double epistemic_value(const State& s, const Action& a, const TransitionModel& model,
                       const EvParams& params, RngStream rng) {
    if (model.num_members() < 2)
        throw std::invalid_argument("epistemic_value: needs an ensemble of at least 2 members");
    std::vector<GaussianPrediction> members;
    members.reserve(static_cast<std::size_t>(model.num_members()));
    for (int m = 0; m < model.num_members(); ++m) members.push_back(model.predict_member(m, s, a));
    return epistemic_value_detail(members, params, rng).value;
}

CandidateEvaluation score_candidate(const std::vector<double>& rewards,
                                    const std::vector<double>& evs, double lambda) {
    if (rewards.size() != evs.size())
        throw std::invalid_argument("score_candidate: reward/ev length mismatch");
    CandidateEvaluation out;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        out.reward_sum += rewards[t];
        out.ev_sum += evs[t];
    }
    out.score = -out.reward_sum - lambda * out.ev_sum;
    return out;
}

}  // namespace mctscem
