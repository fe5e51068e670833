// types.hpp -- domain types shared by all planners.
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace mctscem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when a prediction is requested from an ensemble that has never
// been trained.
struct ModelNotTrainedError : std::runtime_error {
    ModelNotTrainedError() : std::runtime_error("model has not been trained") {}
};

// Environment state vector.
struct State {
    Vec values;

    Eigen::Index dim() const { return values.size(); }
    bool is_finite() const { return values.allFinite(); }
};

// Per-dimension closed action bounds.
struct Bounds {
    Vec lo;
    Vec hi;

    Eigen::Index dim() const { return lo.size(); }

    Vec clip(const Vec& a) const { return a.cwiseMax(lo).cwiseMin(hi); }

    bool contains(const Vec& a) const {
        return (a.array() >= lo.array()).all() && (a.array() <= hi.array()).all();
    }

    static Bounds symmetric(Eigen::Index d, double mag) {
        return Bounds{Vec::Constant(d, -mag), Vec::Constant(d, mag)};
    }
};

// Environment action vector.
struct Action {
    Vec values;

    Eigen::Index dim() const { return values.size(); }
    bool is_finite() const { return values.allFinite(); }
};

// H-step action sequence; row t is the action at step t.
struct ActionSequence {
    Mat steps;  // H x d_a

    Eigen::Index horizon() const { return steps.rows(); }
    Eigen::Index action_dim() const { return steps.cols(); }
    Action at(Eigen::Index t) const { return Action{steps.row(t).transpose()}; }
};

// Diagonal Gaussian over H-step action sequences.
struct GaussianActionDistribution {
    Mat mean;  // H x d_a
    Mat var;   // H x d_a, elementwise >= var_floor

    Eigen::Index horizon() const { return mean.rows(); }
    Eigen::Index action_dim() const { return mean.cols(); }

    static GaussianActionDistribution standard(Eigen::Index h, Eigen::Index d_a) {
        return GaussianActionDistribution{Mat::Zero(h, d_a), Mat::Ones(h, d_a)};
    }
};

// Replay-buffer record.
struct Transition {
    State state;
    Action action;
    State next_state;
    double reward = 0.0;
    bool done = false;
};

enum class RewardMode { oracle, learned };
enum class Propagation { mean, sample };

// Planner hyperparameters. Library defaults; benchmark values live in the
// checked-in per-environment config files.
struct PlannerConfig {
    int horizon = 12;          // H
    int n_candidates = 500;
    int k_elite = 50;
    int cem_iters = 5;
    double lambda = 0.1;       // information-gain weight
    double gamma = 0.99;       // rollout discount
    int n_sim = 50;            // tree-search simulations per planning step
    int n_children = 8;        // expansion budget per node
    double c_ucb = 1.0;
    int rollout_horizon = 12;
    int max_depth = 5;
    int knn_k = 3;
    int ensemble_m = 5;
    int ev_samples = 20;       // aggregate-distribution draws per member
    double var_floor = 1e-4;
    RewardMode reward_mode = RewardMode::oracle;

    Propagation propagation = Propagation::mean;
    bool warm_start = false;       // reuse previous step's distribution as CEM init
    bool clamp_ev = false;         // clamp negative information-gain estimates at 0
    bool rollout_intrinsic = false;  // add the information-gain bonus inside tree rollouts

    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("planner config: " + msg); };
        if (horizon < 1) fail("horizon must be positive");
        if (n_candidates < 1) fail("n_candidates must be positive");
        if (k_elite < 1) fail("k_elite must be positive");
        if (k_elite > n_candidates) fail("k_elite must be <= n_candidates");
        if (cem_iters < 0) fail("cem_iters must be >= 0");
        if (lambda < 0.0) fail("lambda must be >= 0");
        if (gamma <= 0.0 || gamma > 1.0) fail("gamma must be in (0, 1]");
        if (n_sim < 1) fail("n_sim must be positive");
        if (n_children < 1) fail("n_children must be positive");
        if (c_ucb < 0.0) fail("c_ucb must be >= 0");
        if (rollout_horizon < 1) fail("rollout_horizon must be positive");
        if (rollout_horizon > horizon) fail("rollout_horizon must be <= horizon");
        if (max_depth < 1) fail("max_depth must be positive");
        if (ensemble_m < 2) fail("ensemble_m must be >= 2");
        if (ev_samples < 1) fail("ev_samples must be positive");
        if (knn_k < 1 || knn_k >= ev_samples * ensemble_m)
            fail("knn_k must satisfy 1 <= knn_k < ev_samples * ensemble_m");
        if (var_floor <= 0.0) fail("var_floor must be positive");
    }
};

}  // namespace mctscem
