#include "mctscem/env.hpp"

#include <cmath>
#include <stdexcept>

namespace mctscem {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Pendulum constants: g = 10, m = 1, l = 1, dt = 0.05.
constexpr double kPendulumG = 10.0;
constexpr double kPendulumDt = 0.05;
constexpr double kMaxTorque = 2.0;
constexpr double kMaxSpeed = 8.0;

// Mountain car constants (canonical continuous variant).
constexpr double kMcPower = 0.0015;
constexpr double kMcGravity = 0.0025;
constexpr double kMcMinX = -1.2;
constexpr double kMcMaxX = 0.6;
constexpr double kMcMaxSpeed = 0.07;
constexpr double kMaxForce = 1.0;

void require_finite(const State& s, const char* env_name) {
    if (!s.is_finite()) {
        throw std::invalid_argument(std::string(env_name) + ": non-finite state");
    }
}

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

double normalize_angle(double theta) {
    double wrapped = std::fmod(theta + kPi, 2.0 * kPi);
    if (wrapped < 0.0) wrapped += 2.0 * kPi;
    return wrapped - kPi;
}

double pendulum_reward(const State& s, const Action& a) {
    const double theta = normalize_angle(std::atan2(s.values(1), s.values(0)));
    const double theta_dot = s.values(2);
    const double torque = clampd(a.values(0), -kMaxTorque, kMaxTorque);
    return -(theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque);
}

StepResult pendulum_step(const State& s, const Action& a) {
    require_finite(s, "pendulum");
    const double theta = std::atan2(s.values(1), s.values(0));
    const double theta_dot = s.values(2);
    const double torque = clampd(a.values(0), -kMaxTorque, kMaxTorque);

    const double reward = pendulum_reward(s, a);

    // theta_ddot = 3g/(2l) sin(theta) + 3u/(m l^2)
    double new_theta_dot =
        theta_dot + (1.5 * kPendulumG * std::sin(theta) + 3.0 * torque) * kPendulumDt;
    new_theta_dot = clampd(new_theta_dot, -kMaxSpeed, kMaxSpeed);
    const double new_theta = theta + new_theta_dot * kPendulumDt;

    State next;
    next.values = Vec(3);
    next.values << std::cos(new_theta), std::sin(new_theta), new_theta_dot;
    return StepResult{std::move(next), reward, false};
}

double mountaincar_reward(const State& s, const Action& a, const MountainCarParams& params) {
    (void)a;
    return s.values(0) >= params.goal_x ? 1.0 : params.step_penalty;
}

StepResult mountaincar_step(const State& s, const Action& a, const MountainCarParams& params) {
    require_finite(s, "mountain car");
    const double x = s.values(0);
    const double v = s.values(1);
    const double force = clampd(a.values(0), -kMaxForce, kMaxForce);

    // Reward and termination are functions of the incoming state, so the
    // goal pays out on the step taken from the goal region.
    const double reward = mountaincar_reward(s, a, params);
    const bool done = x >= params.goal_x;

    double new_v = v + force * kMcPower - kMcGravity * std::cos(3.0 * x);
    new_v = clampd(new_v, -kMcMaxSpeed, kMcMaxSpeed);
    double new_x = clampd(x + new_v, kMcMinX, kMcMaxX);
    if (new_x <= kMcMinX && new_v < 0.0) new_v = 0.0;

    State next;
    next.values = Vec(2);
    next.values << new_x, new_v;
    return StepResult{std::move(next), reward, done};
}

State Environment::reset(RngStream& rng) {
    state_ = sample_initial_state(rng);
    t_ = 0;
    return state_;
}

StepResult Environment::step(const Action& a) {
    StepResult result = transition(state_, a);
    ++t_;
    if (t_ >= spec_.max_episode_steps) result.done = true;
    state_ = result.next_state;
    return result;
}

namespace {

class PendulumEnv final : public Environment {
public:
    PendulumEnv()
        : Environment(EnvSpec{3, 1, Bounds::symmetric(1, kMaxTorque), 200, "pendulum"}) {}

    double reward(const State& s, const Action& a) const override {
        return pendulum_reward(s, a);
    }

protected:
    State sample_initial_state(RngStream& rng) const override {
        const double theta = rng.uniform(-kPi, kPi);
        const double theta_dot = rng.uniform(-1.0, 1.0);
        State s;
        s.values = Vec(3);
        s.values << std::cos(theta), std::sin(theta), theta_dot;
        return s;
    }

    StepResult transition(const State& s, const Action& a) const override {
        return pendulum_step(s, a);
    }
};

class MountainCarEnv final : public Environment {
public:
    MountainCarEnv()
        : Environment(EnvSpec{2, 1, Bounds::symmetric(1, kMaxForce), 200, "sparse-mountain-car"}) {}

    double reward(const State& s, const Action& a) const override {
        return mountaincar_reward(s, a, params_);
    }

protected:
    State sample_initial_state(RngStream& rng) const override {
        State s;
        s.values = Vec(2);
        s.values << rng.uniform(-0.6, -0.4), 0.0;
        return s;
    }

    StepResult transition(const State& s, const Action& a) const override {
        return mountaincar_step(s, a, params_);
    }

private:
    MountainCarParams params_;
};

}  // namespace

std::unique_ptr<Environment> make_env(const std::string& name) {
    if (name == "pendulum") return std::make_unique<PendulumEnv>();
    if (name == "sparse-mountain-car") return std::make_unique<MountainCarEnv>();
    throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace mctscem
