#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mctscem/core.hpp"
#include "mctscem/rng.hpp"

using namespace mctscem;

namespace {

// E[clip(Z, -b, b)^2] for Z ~ N(0,1), via Simpson quadrature plus the
// boundary mass.
double clipped_normal_variance(double b) {
    const int n = 20000;  // even
    const double h = 2.0 * b / n;
    auto f = [](double x) {
        return x * x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
    };
    double sum = f(-b) + f(b);
    for (int i = 1; i < n; ++i) sum += f(-b + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
    const double interior = sum * h / 3.0;
    const double tail = 0.5 * std::erfc(b / std::sqrt(2.0));  // P(Z > b)
    return interior + 2.0 * b * b * tail;  // mean is 0 by symmetry
}

ActionSequence scalar_sequence(double v) {
    ActionSequence seq;
    seq.steps = Mat::Constant(1, 1, v);
    return seq;
}

}  // namespace

TEST_CASE("clip_action projects onto bounds and is idempotent") {
    const Bounds bounds = Bounds::symmetric(1, 2.0);
    CHECK(clip_action(Action{Vec::Constant(1, 3.0)}, bounds).values(0) == 2.0);
    CHECK(clip_action(Action{Vec::Constant(1, 0.5)}, bounds).values(0) == 0.5);

    RngStream rng(11);
    for (int i = 0; i < 200; ++i) {
        Vec x(1);
        x << rng.uniform(-10.0, 10.0);
        const Action once = clip_action(Action{x}, bounds);
        const Action twice = clip_action(once, bounds);
        CHECK(once.values == twice.values);
        CHECK(bounds.contains(once.values));
    }
}

TEST_CASE("sample_sequence with floored variance returns the mean") {
    GaussianActionDistribution dist;
    dist.mean = Mat::Zero(4, 2);
    dist.var = Mat::Constant(4, 2, 1e-12);
    RngStream rng(3);
    const ActionSequence seq = sample_sequence(dist, rng, Bounds::symmetric(2, 2.0));
    CHECK(seq.steps.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("sample_sequence clips an out-of-bounds mean") {
    GaussianActionDistribution dist;
    dist.mean = Mat::Constant(3, 1, 3.0);
    dist.var = Mat::Constant(3, 1, 1e-4);
    RngStream rng(4);
    const ActionSequence seq = sample_sequence(dist, rng, Bounds::symmetric(1, 2.0));
    CHECK((seq.steps.array() == 2.0).all());
}

TEST_CASE("sample_sequence matches the clipped-normal moments") {
    GaussianActionDistribution dist;
    dist.mean = Mat::Zero(1, 2);
    dist.var = Mat::Ones(1, 2);
    const Bounds bounds = Bounds::symmetric(2, 2.0);

    RngStream rng(123);
    const int n = 10000;
    Vec sum = Vec::Zero(2), sumsq = Vec::Zero(2);
    for (int i = 0; i < n; ++i) {
        const ActionSequence seq = sample_sequence(dist, rng, bounds);
        sum += seq.steps.row(0).transpose();
        sumsq += seq.steps.row(0).transpose().cwiseAbs2();
    }
    const Vec mean = sum / n;
    const Vec var = sumsq / n - mean.cwiseAbs2();

    const double expected_var = clipped_normal_variance(2.0);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::fabs(mean(j)) < 0.05);
        CHECK(std::fabs(var(j) - expected_var) < 0.1);
    }
}

TEST_CASE("sample_sequence is deterministic for a fixed stream") {
    GaussianActionDistribution dist = GaussianActionDistribution::standard(5, 3);
    const Bounds bounds = Bounds::symmetric(3, 2.0);
    RngStream a(77), b(77);
    const ActionSequence sa = sample_sequence(dist, a, bounds);
    const ActionSequence sb = sample_sequence(dist, b, bounds);
    CHECK(sa.steps == sb.steps);
}

TEST_CASE("refit on scalar candidates") {
    const std::vector<ActionSequence> candidates = {scalar_sequence(1.0), scalar_sequence(2.0),
                                                    scalar_sequence(3.0), scalar_sequence(4.0)};
    const GaussianActionDistribution dist = refit(candidates, {3, 2}, 1e-4);
    CHECK(dist.mean(0, 0) == doctest::Approx(3.5));
    CHECK(dist.var(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("refit floors the variance for a single elite") {
    const std::vector<ActionSequence> candidates = {scalar_sequence(2.0)};
    const GaussianActionDistribution dist = refit(candidates, {0}, 1e-4);
    CHECK(dist.mean(0, 0) == doctest::Approx(2.0));
    CHECK(dist.var(0, 0) == 1e-4);
}

TEST_CASE("refit of identical elites keeps the sequence, floors the variance") {
    const std::vector<ActionSequence> candidates = {scalar_sequence(0.7), scalar_sequence(0.7),
                                                    scalar_sequence(0.7)};
    const GaussianActionDistribution dist = refit(candidates, {0, 1, 2}, 1e-4);
    CHECK(dist.mean(0, 0) == doctest::Approx(0.7));
    CHECK(dist.var(0, 0) == 1e-4);
}

TEST_CASE("refit rejects an empty elite set") {
    const std::vector<ActionSequence> candidates = {scalar_sequence(1.0)};
    CHECK_THROWS_AS(refit(candidates, {}, 1e-4), std::invalid_argument);
}

TEST_CASE("refit variance is floored elementwise for random elites") {
    RngStream rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<ActionSequence> candidates;
        std::vector<int> elites;
        const int n = 1 + rng.uniform_int(6);
        for (int i = 0; i < n; ++i) {
            ActionSequence seq;
            seq.steps = Mat::Zero(2, 2);
            for (int t = 0; t < 2; ++t)
                for (int j = 0; j < 2; ++j) seq.steps(t, j) = rng.uniform(-1.0, 1.0);
            candidates.push_back(std::move(seq));
            elites.push_back(i);
        }
        const GaussianActionDistribution dist = refit(candidates, elites, 1e-4);
        CHECK((dist.var.array() >= 1e-4).all());
    }
}

TEST_CASE("refit then sample with floored variance reproduces the elite mean") {
    const std::vector<ActionSequence> candidates = {scalar_sequence(1.3)};
    const GaussianActionDistribution dist = refit(candidates, {0}, 1e-8);
    RngStream rng(21);
    const ActionSequence seq = sample_sequence(dist, rng, Bounds::symmetric(1, 2.0));
    CHECK(seq.steps(0, 0) == doctest::Approx(1.3).epsilon(1e-3));
}

TEST_CASE("rng child streams are independent of parent position") {
    RngStream a(5);
    RngStream b(5);
    (void)b.uniform01();  // advance one stream only
    CHECK(a.child(1, 2).uniform01() == b.child(1, 2).uniform01());
    CHECK(a.child(1, 2).key() != a.child(1, 3).key());
    CHECK(a.child(1, 2).key() != a.child(2, 1).key());
}

TEST_CASE("rng normal moments are sane") {
    RngStream rng(99);
    const int n = 50000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    CHECK(std::fabs(sum / n) < 0.02);
    CHECK(std::fabs(sumsq / n - 1.0) < 0.03);
}

TEST_CASE("planner config validation") {
    PlannerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.k_elite = cfg.n_candidates + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PlannerConfig{};
    cfg.knn_k = cfg.ev_samples * cfg.ensemble_m;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = PlannerConfig{};
    cfg.rollout_horizon = cfg.horizon + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
