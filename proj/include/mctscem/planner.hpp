// planner.hpp -- uniform planner interface for the experiment loop.
#pragma once

#include <memory>
#include <optional>
#include <string>

#include "mctscem/cem.hpp"
#include "mctscem/mcts.hpp"
#include "mctscem/model.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

class Planner {
public:
    virtual ~Planner() = default;
    virtual Action plan(const State& s, RngStream rng) = 0;
    // Search tree of the most recent plan() call, when the planner builds one.
    virtual const Tree* last_tree() const { return nullptr; }
};

class CemPlanner final : public Planner {
public:
    CemPlanner(const TransitionModel& model, const RewardSource& reward, Bounds bounds,
               PlannerConfig cfg)
        : model_(&model), reward_(&reward), bounds_(std::move(bounds)), cfg_(cfg) {}

    Action plan(const State& s, RngStream rng) override {
        GaussianActionDistribution fitted;
        const GaussianActionDistribution* init =
            (cfg_.warm_start && previous_.has_value()) ? &*previous_ : nullptr;
        Action a = cem_plan(s, *model_, *reward_, bounds_, cfg_, rng, init, &fitted);
        if (cfg_.warm_start) previous_ = std::move(fitted);
        return a;
    }

private:
    const TransitionModel* model_;
    const RewardSource* reward_;
    Bounds bounds_;
    PlannerConfig cfg_;
    std::optional<GaussianActionDistribution> previous_;
};

class MctsPlanner final : public Planner {
public:
    MctsPlanner(const TransitionModel& model, const RewardSource& reward, Bounds bounds,
                PlannerConfig cfg, MctsPolicy policy)
        : model_(&model), reward_(&reward), bounds_(std::move(bounds)), cfg_(cfg), policy_(policy) {}

    Action plan(const State& s, RngStream rng) override {
        tree_.emplace(s);
        return mcts_plan(s, *model_, *reward_, bounds_, cfg_, policy_, rng, &*tree_);
    }

    const Tree* last_tree() const override { return tree_.has_value() ? &*tree_ : nullptr; }

private:
    const TransitionModel* model_;
    const RewardSource* reward_;
    Bounds bounds_;
    PlannerConfig cfg_;
    MctsPolicy policy_;
    std::optional<Tree> tree_;
};

// Names: "cem", "mcts-cem", "mcts-random".
std::unique_ptr<Planner> make_planner(const std::string& name, const TransitionModel& model,
                                      const RewardSource& reward, const Bounds& bounds,
                                      const PlannerConfig& cfg);

bool is_known_planner(const std::string& name);

}  // namespace mctscem
