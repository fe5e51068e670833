#include "mctscem/planner.hpp"

#include <stdexcept>

namespace mctscem {

std::unique_ptr<Planner> make_planner(const std::string& name, const TransitionModel& model,
                                      const RewardSource& reward, const Bounds& bounds,
                                      const PlannerConfig& cfg) {
    if (name == "cem") return std::make_unique<CemPlanner>(model, reward, bounds, cfg);
    if (name == "mcts-cem")
        return std::make_unique<MctsPlanner>(model, reward, bounds, cfg, MctsPolicy::root_distribution);
    if (name == "mcts-random")
        return std::make_unique<MctsPlanner>(model, reward, bounds, cfg, MctsPolicy::uniform_random);
    throw std::invalid_argument("unknown planner: " + name);
}

bool is_known_planner(const std::string& name) {
    return name == "cem" || name == "mcts-cem" || name == "mcts-random";
}

}  // namespace mctscem
