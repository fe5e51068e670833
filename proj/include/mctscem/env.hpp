// env.hpp -- native benchmark environments with a uniform step/reset
// interface.
//
// The transition functions are pure; the Environment wrapper only adds the
// episode step counter that drives the step-limit termination.
#pragma once

#include <memory>
#include <string>

#include "mctscem/rng.hpp"
#include "mctscem/types.hpp"

namespace mctscem {

struct EnvSpec {
    int d_s = 0;
    int d_a = 0;
    Bounds action_bounds;
    int max_episode_steps = 200;
    std::string name;
};

struct StepResult {
    State next_state;
    double reward = 0.0;
    bool done = false;
};

// Wraps an angle to [-pi, pi].
double normalize_angle(double theta);

// Frictionless pendulum, state [cos(theta), sin(theta), theta_dot], single
// torque action in [-2, 2]. Reward -(theta^2 + 0.1 theta_dot^2 +
// 0.001 torque^2) on the incoming state; never terminates on its own.
StepResult pendulum_step(const State& s, const Action& a);
double pendulum_reward(const State& s, const Action& a);

// Continuous mountain car, state [x, v], force action in [-1, 1]. Reward +1
// with termination once the car sits at or past goal_x, otherwise a small
// constant penalty.
struct MountainCarParams {
    double step_penalty = -0.01;
    double goal_x = 0.45;
};
StepResult mountaincar_step(const State& s, const Action& a,
                            const MountainCarParams& params = {});
double mountaincar_reward(const State& s, const Action& a,
                          const MountainCarParams& params = {});

class Environment {
public:
    virtual ~Environment() = default;

    const EnvSpec& spec() const { return spec_; }

    // Draws an initial state and resets the step counter.
    State reset(RngStream& rng);

    // Advances the episode; done once a terminal transition or the step
    // limit is reached.
    StepResult step(const Action& a);

    const State& state() const { return state_; }
    int steps_taken() const { return t_; }

    // Oracle reward r(s, a), usable on model-predicted states.
    virtual double reward(const State& s, const Action& a) const = 0;

protected:
    explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {}
    virtual State sample_initial_state(RngStream& rng) const = 0;
    virtual StepResult transition(const State& s, const Action& a) const = 0;

    EnvSpec spec_;
    State state_;
    int t_ = 0;
};

// Supported names: "pendulum", "sparse-mountain-car".
std::unique_ptr<Environment> make_env(const std::string& name);

}  // namespace mctscem
