// mcts.hpp -- tree search over model rollouts.
//
// The tree-search planner fits a single Gaussian action distribution at
// the root and reuses it for every expansion and rollout; the random
// baseline replaces that distribution with uniform draws over the action
// bounds. Final action selection is by visit count.
#pragma once

#include <iosfwd>
#include <vector>

#include "mctscem/cem.hpp"
#include "mctscem/model.hpp"
#include "mctscem/rng.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

struct TreeNode {
    State state;
    Vec action_from_parent;  // empty for the root
    int parent = -1;
    int depth = 0;
    int visits = 0;          // N_i
    double value_sum = 0.0;  // so Q_i = value_sum / visits
    std::vector<int> children;

    double q() const { return visits > 0 ? value_sum / static_cast<double>(visits) : 0.0; }
};

// Arena-allocated search tree; node 0 is the root.
class Tree {
public:
    explicit Tree(State root_state);

    int size() const { return static_cast<int>(nodes_.size()); }
    TreeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const TreeNode& root() const { return nodes_.front(); }

    int add_child(int parent_id, State state, Vec action);

    int max_depth() const;

    // One line per node: id parent depth visits q action...
    void dump(std::ostream& os) const;

private:
    std::vector<TreeNode> nodes_;
};

enum class MctsPolicy { root_distribution, uniform_random };

// UCB1 over the children of `parent_id`; returns the position within the
// children list. Unvisited children score +infinity and win immediately,
// ties broken by position.
int ucb_select(const Tree& tree, int parent_id, double c_ucb);

// Samples one action (first-step marginal of the root distribution, or
// uniform), advances the ensemble mean one step and appends the child.
// Throws if the node is fully expanded or at maximum depth.
int expand(Tree& tree, int node_id, const GaussianActionDistribution* root_dist,
           MctsPolicy policy, const Bounds& bounds, const TransitionModel& model,
           const PlannerConfig& cfg, RngStream& rng);

// Fixed-policy model rollout from s, returning the discounted return.
double simulate_rollout(const State& s, const GaussianActionDistribution* root_dist,
                        MctsPolicy policy, const Bounds& bounds, const TransitionModel& model,
                        const RewardSource& reward, const PlannerConfig& cfg, RngStream& rng);

// Adds the return to every node on the leaf -> root path.
void backpropagate(Tree& tree, int leaf_id, double value);

// Action of the most-visited root child (never the highest-Q child), ties
// broken by child position.
Action select_action_by_visits(const Tree& tree);

// Full planning step: fit the root distribution (tree-search planner only),
// run n_sim select/expand/rollout/backpropagate iterations, return the
// action of the most-visited root child.
Action mcts_plan(const State& s0, const TransitionModel& model, const RewardSource& reward,
                 const Bounds& bounds, const PlannerConfig& cfg, MctsPolicy policy, RngStream rng,
                 Tree* tree_out = nullptr, const GaussianActionDistribution* root_dist_init = nullptr);

}  // namespace mctscem
