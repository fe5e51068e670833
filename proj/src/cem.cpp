#include "mctscem/cem.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mctscem {

namespace {

// Stream tags for substream derivation.
constexpr std::uint64_t kTagIteration = 0xCE01;
constexpr std::uint64_t kTagObjective = 0xCE02;
constexpr std::uint64_t kTagEv = 0xCE03;
constexpr std::uint64_t kTagPropagate = 0xCE04;

}  // namespace

std::vector<int> select_elites(const std::vector<double>& scores, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > scores.size())
        throw std::invalid_argument("select_elites: k out of range");
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&scores](int a, int b) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sb = scores[static_cast<std::size_t>(b)];
        if (sa != sb) return sa < sb;
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

GaussianActionDistribution cem_optimize(const SequenceObjective& objective, const Bounds& bounds,
                                        const PlannerConfig& cfg, RngStream rng,
                                        const GaussianActionDistribution* init) {
    GaussianActionDistribution dist =
        init != nullptr ? *init
                        : GaussianActionDistribution::standard(cfg.horizon, bounds.dim());
    dist.var = dist.var.cwiseMax(cfg.var_floor);

    std::vector<ActionSequence> candidates;
    candidates.reserve(static_cast<std::size_t>(cfg.n_candidates));
    for (int iter = 0; iter < cfg.cem_iters; ++iter) {
        RngStream iter_rng = rng.child(kTagIteration, static_cast<std::uint64_t>(iter));
        candidates.clear();
        for (int i = 0; i < cfg.n_candidates; ++i)
            candidates.push_back(sample_sequence(dist, iter_rng, bounds));

        const std::vector<double> scores = objective(candidates, iter);
        if (scores.size() != candidates.size())
            throw std::invalid_argument("cem_optimize: objective returned wrong score count");

        const std::vector<int> elites = select_elites(scores, cfg.k_elite);
        dist = refit(candidates, elites, cfg.var_floor);
    }
    return dist;
}

namespace {

std::vector<CandidateEvaluation> evaluate_impl(const State& s0,
                                               const std::vector<ActionSequence>& candidates,
                                               const TransitionModel& model,
                                               const RewardSource& reward,
                                               const PlannerConfig& cfg, RngStream rng,
                                               bool parallel) {
    const int n = static_cast<int>(candidates.size());
    const int d_s = model.state_dim();
    const int d_a = model.action_dim();
    const int n_members = model.num_members();
    const bool use_ev = cfg.lambda > 0.0;
    const EvParams ev_params{cfg.ev_samples, cfg.knn_k, cfg.clamp_ev};

    Mat states(n, d_s);
    for (int i = 0; i < n; ++i) states.row(i) = s0.values.transpose();

    Vec reward_acc = Vec::Zero(n);
    Vec ev_acc = Vec::Zero(n);

    std::vector<Mat> member_means(static_cast<std::size_t>(n_members));
    std::vector<Mat> member_vars(static_cast<std::size_t>(n_members));
    Mat actions(n, d_a);

    for (int t = 0; t < cfg.horizon; ++t) {
        for (int i = 0; i < n; ++i)
            actions.row(i) = candidates[static_cast<std::size_t>(i)].steps.row(t);

        reward_acc += reward.batch(states, actions);

        for (int m = 0; m < n_members; ++m)
            model.predict_member_batch(m, states, actions, member_means[static_cast<std::size_t>(m)],
                                       member_vars[static_cast<std::size_t>(m)]);

        Mat next_states(n, d_s);
        if (cfg.propagation == Propagation::mean) {
            next_states.setZero();
            for (int m = 0; m < n_members; ++m)
                next_states += member_means[static_cast<std::size_t>(m)];
            next_states /= static_cast<double>(n_members);
        }

        const bool per_candidate_work = use_ev || cfg.propagation == Propagation::sample;
#pragma omp parallel for schedule(static) if (parallel)
        for (int i = 0; i < (per_candidate_work ? n : 0); ++i) {
            std::vector<GaussianPrediction> preds(static_cast<std::size_t>(n_members));
            for (int m = 0; m < n_members; ++m) {
                preds[static_cast<std::size_t>(m)].mean =
                    member_means[static_cast<std::size_t>(m)].row(i).transpose();
                preds[static_cast<std::size_t>(m)].var =
                    member_vars[static_cast<std::size_t>(m)].row(i).transpose();
            }
            // Every candidate shares the step's random stream (common random
            // numbers): estimator noise largely cancels out of candidate
            // comparisons, and identical candidates evaluate identically.
            if (use_ev) {
                RngStream ev_rng = rng.child(kTagEv, static_cast<std::uint64_t>(t));
                ev_acc(i) += epistemic_value_detail(preds, ev_params, ev_rng).value;
            }
            if (cfg.propagation == Propagation::sample) {
                RngStream prop_rng = rng.child(kTagPropagate, static_cast<std::uint64_t>(t));
                const int m = prop_rng.uniform_int(n_members);
                const GaussianPrediction& p = preds[static_cast<std::size_t>(m)];
                for (int j = 0; j < d_s; ++j)
                    next_states(i, j) = prop_rng.normal(p.mean(j), std::sqrt(p.var(j)));
            }
        }

        states.swap(next_states);
    }

    std::vector<CandidateEvaluation> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        CandidateEvaluation& e = out[static_cast<std::size_t>(i)];
        e.reward_sum = reward_acc(i);
        e.ev_sum = ev_acc(i);
        e.score = -e.reward_sum - cfg.lambda * e.ev_sum;
    }
    return out;
}

}  // namespace

std::vector<CandidateEvaluation> evaluate_candidates(const State& s0,
                                                     const std::vector<ActionSequence>& candidates,
                                                     const TransitionModel& model,
                                                     const RewardSource& reward,
                                                     const PlannerConfig& cfg, RngStream rng) {
    return evaluate_impl(s0, candidates, model, reward, cfg, rng, true);
}

std::vector<CandidateEvaluation> evaluate_candidates_serial(
    const State& s0, const std::vector<ActionSequence>& candidates, const TransitionModel& model,
    const RewardSource& reward, const PlannerConfig& cfg, RngStream rng) {
    const EvParams ev_params{cfg.ev_samples, cfg.knn_k, cfg.clamp_ev};
    std::vector<CandidateEvaluation> out;
    out.reserve(candidates.size());

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        State s = s0;
        double reward_sum = 0.0;
        double ev_sum = 0.0;
        for (int t = 0; t < cfg.horizon; ++t) {
            const Action a = candidates[i].at(t);
            reward_sum += reward(s, a);

            std::vector<GaussianPrediction> preds;
            preds.reserve(static_cast<std::size_t>(model.num_members()));
            for (int m = 0; m < model.num_members(); ++m) preds.push_back(model.predict_member(m, s, a));

            if (cfg.lambda > 0.0) {
                RngStream ev_rng = rng.child(kTagEv, static_cast<std::uint64_t>(t));
                ev_sum += epistemic_value_detail(preds, ev_params, ev_rng).value;
            }

            if (cfg.propagation == Propagation::mean) {
                Vec acc = Vec::Zero(model.state_dim());
                for (const GaussianPrediction& p : preds) acc += p.mean;
                s = State{acc / static_cast<double>(model.num_members())};
            } else {
                RngStream prop_rng = rng.child(kTagPropagate, static_cast<std::uint64_t>(t));
                const int m = prop_rng.uniform_int(model.num_members());
                const GaussianPrediction& p = preds[static_cast<std::size_t>(m)];
                Vec draw(p.mean.size());
                for (Eigen::Index j = 0; j < draw.size(); ++j)
                    draw(j) = prop_rng.normal(p.mean(j), std::sqrt(p.var(j)));
                s = State{std::move(draw)};
            }
        }
        CandidateEvaluation e;
        e.reward_sum = reward_sum;
        e.ev_sum = ev_sum;
        e.score = -e.reward_sum - cfg.lambda * e.ev_sum;
        out.push_back(e);
    }
    return out;
}

GaussianActionDistribution fit_root_distribution(const State& s0, const TransitionModel& model,
                                                 const RewardSource& reward, const Bounds& bounds,
                                                 const PlannerConfig& cfg, RngStream rng,
                                                 const GaussianActionDistribution* init) {
    SequenceObjective objective = [&](const std::vector<ActionSequence>& candidates, int iter) {
        RngStream eval_rng = rng.child(kTagObjective, static_cast<std::uint64_t>(iter));
        const std::vector<CandidateEvaluation> evals =
            evaluate_candidates(s0, candidates, model, reward, cfg, eval_rng);
        std::vector<double> scores(evals.size());
        for (std::size_t i = 0; i < evals.size(); ++i) scores[i] = evals[i].score;
        return scores;
    };
    return cem_optimize(objective, bounds, cfg, rng, init);
}

Action cem_plan(const State& s0, const TransitionModel& model, const RewardSource& reward,
                const Bounds& bounds, const PlannerConfig& cfg, RngStream rng,
                const GaussianActionDistribution* init, GaussianActionDistribution* fitted_out) {
    const GaussianActionDistribution dist =
        fit_root_distribution(s0, model, reward, bounds, cfg, rng, init);
    if (fitted_out != nullptr) *fitted_out = dist;
    return clip_action(Action{dist.mean.row(0).transpose()}, bounds);
}

}  // namespace mctscem
