#include "mctscem/mcts.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mctscem {

namespace {

constexpr std::uint64_t kTagRootFit = 0x7007;
constexpr std::uint64_t kTagSimulation = 0x51AA;
constexpr std::uint64_t kTagRolloutEv = 0x51EE;

Vec sample_policy_action(const GaussianActionDistribution* root_dist, MctsPolicy policy,
                         const Bounds& bounds, Eigen::Index row, RngStream& rng) {
    const Eigen::Index d = bounds.dim();
    Vec a(d);
    if (policy == MctsPolicy::uniform_random) {
        for (Eigen::Index j = 0; j < d; ++j) a(j) = rng.uniform(bounds.lo(j), bounds.hi(j));
        return a;
    }
    const Eigen::Index r = std::min<Eigen::Index>(row, root_dist->horizon() - 1);
    for (Eigen::Index j = 0; j < d; ++j)
        a(j) = rng.normal(root_dist->mean(r, j), std::sqrt(root_dist->var(r, j)));
    return bounds.clip(a);
}

}  // namespace

Tree::Tree(State root_state) {
    TreeNode root;
    root.state = std::move(root_state);
    nodes_.push_back(std::move(root));
}

int Tree::add_child(int parent_id, State state, Vec action) {
    TreeNode child;
    child.state = std::move(state);
    child.action_from_parent = std::move(action);
    child.parent = parent_id;
    child.depth = node(parent_id).depth + 1;
    nodes_.push_back(std::move(child));
    const int id = static_cast<int>(nodes_.size()) - 1;
    node(parent_id).children.push_back(id);
    return id;
}

int Tree::max_depth() const {
    int depth = 0;
    for (const TreeNode& n : nodes_) depth = std::max(depth, n.depth);
    return depth;
}

void Tree::dump(std::ostream& os) const {
    os << "# mctscem-tree v1\n";
    os << "# id parent depth visits q action...\n";
    char buf[64];
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const TreeNode& n = nodes_[id];
        os << id << ' ' << n.parent << ' ' << n.depth << ' ' << n.visits;
        std::snprintf(buf, sizeof(buf), " %.17g", n.q());
        os << buf;
        for (Eigen::Index j = 0; j < n.action_from_parent.size(); ++j) {
            std::snprintf(buf, sizeof(buf), " %.17g", n.action_from_parent(j));
            os << buf;
        }
        os << '\n';
    }
}

int ucb_select(const Tree& tree, int parent_id, double c_ucb) {
    const TreeNode& parent = tree.node(parent_id);
    if (parent.children.empty()) throw std::invalid_argument("ucb_select: node has no children");

    const double log_n = std::log(static_cast<double>(std::max(parent.visits, 1)));
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t pos = 0; pos < parent.children.size(); ++pos) {
        const TreeNode& child = tree.node(parent.children[pos]);
        if (child.visits == 0) return static_cast<int>(pos);
        const double value =
            child.q() + c_ucb * std::sqrt(log_n / static_cast<double>(child.visits));
        if (value > best_value) {
            best_value = value;
            best = static_cast<int>(pos);
        }
    }
    return best;
}

int expand(Tree& tree, int node_id, const GaussianActionDistribution* root_dist,
           MctsPolicy policy, const Bounds& bounds, const TransitionModel& model,
           const PlannerConfig& cfg, RngStream& rng) {
    const TreeNode& n = tree.node(node_id);
    if (static_cast<int>(n.children.size()) >= cfg.n_children)
        throw std::logic_error("expand: node is fully expanded");
    if (n.depth >= cfg.max_depth) throw std::logic_error("expand: node is at maximum depth");

    const Vec action = sample_policy_action(root_dist, policy, bounds, 0, rng);
    State child_state = model.predict_mean_next(n.state, Action{action});
    return tree.add_child(node_id, std::move(child_state), action);
}

double simulate_rollout(const State& s, const GaussianActionDistribution* root_dist,
                        MctsPolicy policy, const Bounds& bounds, const TransitionModel& model,
                        const RewardSource& reward, const PlannerConfig& cfg, RngStream& rng) {
    const EvParams ev_params{cfg.ev_samples, cfg.knn_k, cfg.clamp_ev};
    double total = 0.0;
    double discount = 1.0;
    State state = s;
    for (int t = 0; t < cfg.rollout_horizon; ++t) {
        const Vec a = sample_policy_action(root_dist, policy, bounds, t, rng);
        const Action action{a};
        double r = reward(state, action);
        if (cfg.rollout_intrinsic) {
            r += cfg.lambda * epistemic_value(state, action, model, ev_params,
                                              rng.child(kTagRolloutEv, static_cast<std::uint64_t>(t)));
        }
        total += discount * r;
        discount *= cfg.gamma;
        state = cfg.propagation == Propagation::mean
                    ? model.predict_mean_next(state, action)
                    : model.predict_sampled_next(state, action, rng);
    }
    return total;
}

void backpropagate(Tree& tree, int leaf_id, double value) {
    for (int id = leaf_id; id != -1; id = tree.node(id).parent) {
        TreeNode& n = tree.node(id);
        n.visits += 1;
        n.value_sum += value;
    }
}

Action mcts_plan(const State& s0, const TransitionModel& model, const RewardSource& reward,
                 const Bounds& bounds, const PlannerConfig& cfg, MctsPolicy policy, RngStream rng,
                 Tree* tree_out, const GaussianActionDistribution* root_dist_init) {
    GaussianActionDistribution root_dist;
    const GaussianActionDistribution* dist_ptr = nullptr;
    if (policy == MctsPolicy::root_distribution) {
        root_dist = fit_root_distribution(s0, model, reward, bounds, cfg,
                                          rng.child(kTagRootFit), root_dist_init);
        dist_ptr = &root_dist;
    }

    // The random baseline's rollouts never carry the information-gain
    // bonus; that term belongs to the fitted-distribution planner only.
    PlannerConfig rollout_cfg = cfg;
    if (policy == MctsPolicy::uniform_random) rollout_cfg.rollout_intrinsic = false;

    Tree tree(s0);
    for (int sim = 0; sim < cfg.n_sim; ++sim) {
        RngStream sim_rng = rng.child(kTagSimulation, static_cast<std::uint64_t>(sim));

        // Selection: descend while fully expanded and below the depth cap.
        int v = 0;
        while (tree.node(v).depth < cfg.max_depth &&
               static_cast<int>(tree.node(v).children.size()) >= cfg.n_children) {
            const int pos = ucb_select(tree, v, cfg.c_ucb);
            v = tree.node(v).children[static_cast<std::size_t>(pos)];
        }

        // Expansion.
        if (tree.node(v).depth < cfg.max_depth &&
            static_cast<int>(tree.node(v).children.size()) < cfg.n_children) {
            v = expand(tree, v, dist_ptr, policy, bounds, model, cfg, sim_rng);
        }

        // Simulation and backpropagation.
        const double value = simulate_rollout(tree.node(v).state, dist_ptr, policy, bounds, model,
                                              reward, rollout_cfg, sim_rng);
        backpropagate(tree, v, value);
    }

    Action chosen = select_action_by_visits(tree);
    if (tree_out != nullptr) *tree_out = std::move(tree);
    return chosen;
}

Action select_action_by_visits(const Tree& tree) {
    const TreeNode& root = tree.root();
    if (root.children.empty())
        throw std::logic_error("select_action_by_visits: root has no children");
    int best_child = root.children.front();
    for (int child_id : root.children) {
        if (tree.node(child_id).visits > tree.node(best_child).visits) best_child = child_id;
    }
    return Action{tree.node(best_child).action_from_parent};
}

}  // namespace mctscem
