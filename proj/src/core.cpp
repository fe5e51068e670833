#include "mctscem/core.hpp"

#include <cmath>
#include <stdexcept>

namespace mctscem {

Action clip_action(const Action& a, const Bounds& bounds) {
    return Action{bounds.clip(a.values)};
}

ActionSequence sample_sequence(const GaussianActionDistribution& dist, RngStream& rng,
                               const Bounds& bounds) {
    const Eigen::Index h = dist.horizon();
    const Eigen::Index d = dist.action_dim();
    Mat steps(h, d);
    for (Eigen::Index t = 0; t < h; ++t) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double x = rng.normal(dist.mean(t, j), std::sqrt(dist.var(t, j)));
            steps(t, j) = std::min(std::max(x, bounds.lo(j)), bounds.hi(j));
        }
    }
    return ActionSequence{std::move(steps)};
}

GaussianActionDistribution refit(const std::vector<ActionSequence>& candidates,
                                 const std::vector<int>& elite_set, double var_floor) {
    if (elite_set.empty()) throw std::invalid_argument("refit: empty elite set");
    const Eigen::Index h = candidates.at(static_cast<std::size_t>(elite_set[0])).horizon();
    const Eigen::Index d = candidates.at(static_cast<std::size_t>(elite_set[0])).action_dim();
    const double k = static_cast<double>(elite_set.size());

    Mat mean = Mat::Zero(h, d);
    for (int idx : elite_set) mean += candidates.at(static_cast<std::size_t>(idx)).steps;
    mean /= k;

    Mat var = Mat::Zero(h, d);
    for (int idx : elite_set) {
        const Mat diff = candidates.at(static_cast<std::size_t>(idx)).steps - mean;
        var += diff.cwiseProduct(diff);
    }
    var /= k;
    var = var.cwiseMax(var_floor);

    return GaussianActionDistribution{std::move(mean), std::move(var)};
}

}  // namespace mctscem
