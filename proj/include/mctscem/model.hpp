// model.hpp -- probabilistic ensemble dynamics model.
//
// Each member is a two-hidden-layer Gaussian regressor over normalized
// next-state deltas, trained on its own bootstrap resample of the replay
// buffer with exact analytic gradients.
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mctscem/env.hpp"
#include "mctscem/rng.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

struct GaussianPrediction {
    Vec mean;
    Vec var;
};

// Read-only prediction interface shared by planners; implemented by
// EnsembleModel and by test stubs.
class TransitionModel {
public:
    virtual ~TransitionModel() = default;

    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual int num_members() const = 0;

    // Next-state Gaussian of one ensemble member.
    virtual GaussianPrediction predict_member(int member, const State& s, const Action& a) const = 0;

    // Row-per-sample batched variant; the default loops over rows.
    virtual void predict_member_batch(int member, const Mat& states, const Mat& actions,
                                      Mat& mean_out, Mat& var_out) const;

    // Ensemble-mean next state (the default propagation rule).
    State predict_mean_next(const State& s, const Action& a) const;

    // Draws from a uniformly chosen member's Gaussian.
    State predict_sampled_next(const State& s, const Action& a, RngStream& rng) const;

    // n draws per member, concatenated into an (M*n) x d_s sample matrix.
    Mat predict_aggregate_samples(const State& s, const Action& a, int n, RngStream& rng) const;
};

// Draws n samples from each member Gaussian in member-major order. Shared
// by predict_aggregate_samples and the batched candidate evaluator so both
// paths produce identical sample sets for identical streams.
Mat draw_aggregate_samples(const std::vector<GaussianPrediction>& members, int n, RngStream& rng);

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}

    void push(Transition t) {
        transitions_.push_back(std::move(t));
        if (transitions_.size() > capacity_) transitions_.pop_front();
    }

    std::size_t size() const { return transitions_.size(); }
    bool empty() const { return transitions_.empty(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return transitions_[i]; }

private:
    std::size_t capacity_;
    std::deque<Transition> transitions_;
};

// Per-dimension running mean / standard deviation used to normalize
// network inputs and targets.
struct NormalizationStats {
    Vec mean;
    Vec std;

    static NormalizationStats fit(const Mat& rows, double eps = 1e-8);

    Vec normalize(const Vec& x) const { return (x - mean).cwiseQuotient(std); }
    Vec denormalize(const Vec& x) const { return x.cwiseProduct(std) + mean; }
    Mat normalize_rows(const Mat& rows) const;
    Mat denormalize_rows(const Mat& rows) const;
};

struct MlpConfig {
    int hidden = 64;
    double logvar_min = -6.0;
    double logvar_max = 2.0;
};

// Feed-forward net: input -> hidden -> hidden -> (mean, log-variance,
// reward). tanh activations; log-variance soft-clamped to
// [logvar_min, logvar_max] so the loss stays smooth everywhere.
class GaussianMlp {
public:
    GaussianMlp(int input_dim, int target_dim, MlpConfig cfg, RngStream& rng);

    struct Output {
        Mat mean;    // n x target_dim
        Mat var;     // n x target_dim
        Vec reward;  // n
    };

    Output forward(const Mat& inputs) const;

    // Mean Gaussian NLL of targets plus reward MSE over the batch. When
    // grad_out is non-null it receives d(loss)/d(params) in flat layout.
    double loss(const Mat& inputs, const Mat& targets, const Vec& rewards,
                Vec* grad_out = nullptr) const;

    int num_params() const { return static_cast<int>(params_.size()); }
    const Vec& flat_params() const { return params_; }
    void set_flat_params(const Vec& p);

    int input_dim() const { return input_dim_; }
    int target_dim() const { return target_dim_; }
    const MlpConfig& config() const { return cfg_; }

private:
    friend class EnsembleModel;

    int input_dim_;
    int target_dim_;
    MlpConfig cfg_;
    Vec params_;
};

struct ModelConfig {
    int hidden = 64;
    double learning_rate = 1e-3;
    int epochs = 40;
    int batch_size = 32;
    double logvar_min = -6.0;
    double logvar_max = 2.0;
    std::size_t buffer_capacity = 100000;
};

class EnsembleModel : public TransitionModel {
public:
    EnsembleModel(int d_s, int d_a, int members, double var_floor, ModelConfig cfg,
                  std::uint64_t init_seed);

    int state_dim() const override { return d_s_; }
    int action_dim() const override { return d_a_; }
    int num_members() const override { return static_cast<int>(members_.size()); }
    bool trained() const { return trained_; }

    GaussianPrediction predict_member(int member, const State& s, const Action& a) const override;
    void predict_member_batch(int member, const Mat& states, const Mat& actions,
                              Mat& mean_out, Mat& var_out) const override;

    // Fits every member on its own bootstrap resample for the given number
    // of epochs; returns the per-member mean loss trace. epochs == 0 is a
    // no-op that leaves the model untouched.
    std::vector<std::vector<double>> train(const ReplayBuffer& buffer, int epochs, RngStream rng);

    // Ensemble-mean learned reward.
    double predict_reward_mean(const State& s, const Action& a) const;
    Vec predict_reward_mean_batch(const Mat& states, const Mat& actions) const;

    void save(const std::string& path) const;
    static EnsembleModel load(const std::string& path);

    const GaussianMlp& member(int m) const { return members_[static_cast<std::size_t>(m)]; }

private:
    void require_trained() const {
        if (!trained_) throw ModelNotTrainedError{};
    }
    Mat build_input(const Mat& states, const Mat& actions) const;

    int d_s_;
    int d_a_;
    double var_floor_;
    ModelConfig cfg_;
    std::uint64_t init_seed_;
    bool trained_ = false;

    std::vector<GaussianMlp> members_;
    std::vector<Vec> adam_m_;
    std::vector<Vec> adam_v_;
    std::vector<std::int64_t> adam_t_;

    NormalizationStats state_norm_;
    NormalizationStats action_norm_;
    NormalizationStats delta_norm_;
    NormalizationStats reward_norm_;
};

// Reward source used during planning: the environment's true reward
// function (oracle mode) or the ensemble's learned reward head.
class RewardSource {
public:
    virtual ~RewardSource() = default;
    virtual double operator()(const State& s, const Action& a) const = 0;
    // Default loops over rows.
    virtual Vec batch(const Mat& states, const Mat& actions) const;
};

class OracleReward final : public RewardSource {
public:
    explicit OracleReward(const Environment& env) : env_(&env) {}
    double operator()(const State& s, const Action& a) const override { return env_->reward(s, a); }

private:
    const Environment* env_;
};

class LearnedReward final : public RewardSource {
public:
    explicit LearnedReward(const EnsembleModel& model) : model_(&model) {}
    double operator()(const State& s, const Action& a) const override {
        return model_->predict_reward_mean(s, a);
    }
    Vec batch(const Mat& states, const Mat& actions) const override {
        return model_->predict_reward_mean_batch(states, actions);
    }

private:
    const EnsembleModel* model_;
};

}  // namespace mctscem
