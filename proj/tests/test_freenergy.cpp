#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mctscem/freenergy.hpp"
#include "mctscem/rng.hpp"
#include "stubs.hpp"

using namespace mctscem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kStdNormalEntropy = 1.4189385332046727;  // 0.5 ln(2 pi e)

// Differential entropy of an equal-weight two-component Gaussian mixture
// with unit variances and mean separation delta, by Simpson quadrature.
double two_gaussian_mixture_entropy(double delta) {
    auto density = [delta](double x) {
        const double a = x - 0.5 * delta;
        const double b = x + 0.5 * delta;
        return 0.5 / std::sqrt(2.0 * kPi) * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b));
    };
    const double lo = -0.5 * delta - 12.0;
    const double hi = 0.5 * delta + 12.0;
    const int n = 40000;  // even
    const double h = (hi - lo) / n;
    auto integrand = [&](double x) {
        const double p = density(x);
        return p > 0.0 ? -p * std::log(p) : 0.0;
    };
    double sum = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) sum += integrand(lo + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
    return sum * h / 3.0;
}

std::vector<GaussianPrediction> two_member_preds(double delta) {
    GaussianPrediction lo, hi;
    lo.mean = Vec::Constant(1, -0.5 * delta);
    lo.var = Vec::Ones(1);
    hi.mean = Vec::Constant(1, 0.5 * delta);
    hi.var = Vec::Ones(1);
    return {lo, hi};
}

}  // namespace

TEST_CASE("gaussian_entropy closed forms") {
    CHECK(gaussian_entropy(Vec::Ones(1)) == doctest::Approx(kStdNormalEntropy).epsilon(1e-12));
    CHECK(gaussian_entropy(Vec::Ones(2)) == doctest::Approx(2.0 * kStdNormalEntropy).epsilon(1e-12));
    CHECK(gaussian_entropy(Vec::Constant(1, 4.0)) ==
          doctest::Approx(kStdNormalEntropy + 0.5 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("gaussian_entropy is additive over independent dimensions") {
    RngStream rng(12);
    for (int i = 0; i < 100; ++i) {
        Vec v1(2), v2(3);
        for (int j = 0; j < 2; ++j) v1(j) = rng.uniform(0.01, 5.0);
        for (int j = 0; j < 3; ++j) v2(j) = rng.uniform(0.01, 5.0);
        Vec joint(5);
        joint << v1, v2;
        CHECK(gaussian_entropy(joint) ==
              doctest::Approx(gaussian_entropy(v1) + gaussian_entropy(v2)).epsilon(1e-12));
    }
}

TEST_CASE("gaussian_entropy rejects nonpositive variances") {
    CHECK_THROWS_AS(gaussian_entropy(Vec::Zero(1)), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_entropy(Vec::Constant(2, -1.0)), std::invalid_argument);
}

TEST_CASE("knn_entropy recovers the standard normal entropy") {
    RngStream rng(2024);
    Mat samples(2000, 1);
    for (int i = 0; i < 2000; ++i) samples(i, 0) = rng.normal();
    CHECK(knn_entropy(samples, 3) == doctest::Approx(kStdNormalEntropy).epsilon(0.1 / kStdNormalEntropy));
    CHECK(std::fabs(knn_entropy(samples, 3) - kStdNormalEntropy) < 0.1);
}

TEST_CASE("knn_entropy recovers the uniform[0,1] entropy") {
    RngStream rng(77);
    Mat samples(2000, 1);
    for (int i = 0; i < 2000; ++i) samples(i, 0) = rng.uniform01();
    CHECK(std::fabs(knn_entropy(samples, 3)) < 0.1);
}

TEST_CASE("knn_entropy obeys the scaling law exactly") {
    RngStream rng(5);
    Mat samples(400, 2);
    for (int i = 0; i < 400; ++i)
        for (int j = 0; j < 2; ++j) samples(i, j) = rng.normal();
    const double base = knn_entropy(samples, 3);
    const double c = 3.7;
    const double scaled = knn_entropy(samples * c, 3);
    CHECK(scaled - base == doctest::Approx(2.0 * std::log(c)).epsilon(1e-9));
}

TEST_CASE("knn_entropy is translation invariant") {
    RngStream rng(6);
    Mat samples(300, 3);
    for (int i = 0; i < 300; ++i)
        for (int j = 0; j < 3; ++j) samples(i, j) = rng.normal();
    Mat shifted = samples;
    shifted.col(0).array() += 42.0;
    shifted.col(1).array() -= 17.0;
    shifted.col(2).array() += 0.5;
    CHECK(knn_entropy(shifted, 3) == doctest::Approx(knn_entropy(samples, 3)).epsilon(1e-9));
}

TEST_CASE("knn_entropy rejects too-few samples") {
    Mat samples = Mat::Zero(3, 1);
    CHECK_THROWS_AS(knn_entropy(samples, 3), std::invalid_argument);
    CHECK_THROWS_AS(knn_entropy(samples, 0), std::invalid_argument);
}

TEST_CASE("knn_entropy floors coincident points and reports them") {
    Mat samples = Mat::Zero(10, 1);  // all identical
    KnnDiagnostics diag;
    const double h = knn_entropy(samples, 3, &diag);
    CHECK(std::isfinite(h));
    CHECK(diag.floored_distances == 10);
}

TEST_CASE("knn_entropy parallel kernel matches the serial reference") {
    RngStream rng(9);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 50 + 150 * rep;
        Mat samples(n, 3);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 3; ++j) samples(i, j) = rng.normal();
        CHECK(knn_entropy(samples, 3) == doctest::Approx(knn_entropy_serial(samples, 3)).epsilon(1e-12));
    }
}

TEST_CASE("epistemic value vanishes for identical members") {
    auto model = testing::fixed_gaussian_ensemble(two_member_preds(0.0));
    const EvParams params{500, 3, false};
    const double ev = epistemic_value(State{Vec::Zero(1)}, Action{Vec::Zero(1)}, model, params,
                                      RngStream(1234));
    CHECK(std::fabs(ev) < 0.05);
}

TEST_CASE("epistemic value matches the mixture-entropy oracle and is monotone") {
    const EvParams params{1000, 3, false};
    double previous = -1.0;
    for (const double delta : {0.0, 2.0, 4.0}) {
        const double oracle = two_gaussian_mixture_entropy(delta) - kStdNormalEntropy;
        const EvBreakdown ev =
            epistemic_value_detail(two_member_preds(delta), params, RngStream(555));
        CHECK(std::fabs(ev.value - oracle) < 0.1);
        CHECK(ev.value > previous);
        previous = ev.value;
    }
}

TEST_CASE("epistemic value approaches ln 2 for well-separated members") {
    const EvParams params{1000, 3, false};
    const EvBreakdown ev = epistemic_value_detail(two_member_preds(10.0), params, RngStream(99));
    CHECK(std::fabs(ev.value - std::log(2.0)) < 0.1);
}

TEST_CASE("epistemic value is exactly aggregate entropy minus mean member entropy") {
    const auto preds = two_member_preds(2.0);
    const EvParams params{50, 3, false};
    const EvBreakdown ev = epistemic_value_detail(preds, params, RngStream(7));

    // Recompute both terms independently with the same stream.
    RngStream rng(7);
    const Mat samples = draw_aggregate_samples(preds, params.samples_per_member, rng);
    const double agg = knn_entropy(samples, params.k);
    const double mean_member =
        0.5 * (gaussian_entropy(preds[0].var) + gaussian_entropy(preds[1].var));
    CHECK(ev.aggregate_entropy == agg);
    CHECK(ev.mean_member_entropy == mean_member);
    CHECK(ev.value == agg - mean_member);
}

TEST_CASE("epistemic value requires at least two members") {
    auto model = testing::fixed_gaussian_ensemble({two_member_preds(0.0)[0]});
    CHECK_THROWS_AS(epistemic_value(State{Vec::Zero(1)}, Action{Vec::Zero(1)}, model, EvParams{},
                                    RngStream(1)),
                    std::invalid_argument);
}

TEST_CASE("clamping suppresses negative estimates") {
    EvParams params{100, 3, true};
    const EvBreakdown ev = epistemic_value_detail(two_member_preds(0.0), params, RngStream(31));
    CHECK(ev.value >= 0.0);
}

TEST_CASE("score_candidate combines reward and information gain") {
    SUBCASE("lambda 0 reduces to negative reward sum") {
        const CandidateEvaluation e = score_candidate({1.0, 2.0, 3.0}, {9.0, 9.0, 9.0}, 0.0);
        CHECK(e.reward_sum == 6.0);
        CHECK(e.score == -6.0);
    }
    SUBCASE("information gain lowers the score") {
        const CandidateEvaluation e = score_candidate({0.0, 0.0}, {0.5, 0.5}, 1.0);
        CHECK(e.ev_sum == 1.0);
        CHECK(e.score == -1.0);
    }
    SUBCASE("higher information gain ranks ahead at equal reward") {
        const CandidateEvaluation low = score_candidate({1.0}, {0.1}, 0.5);
        const CandidateEvaluation high = score_candidate({1.0}, {0.9}, 0.5);
        CHECK(high.score < low.score);
    }
    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(score_candidate({1.0, 2.0}, {0.0}, 0.1), std::invalid_argument);
    }
}
