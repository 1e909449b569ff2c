#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "llmpred/decompose.hpp"
#include "llmpred/errors.hpp"
#include "llmpred/postprocess.hpp"

using namespace llmpred;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -3.0,
                                  double hi = 3.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (double& v : out) v = dist(rng);
    return out;
}

} // namespace

TEST_CASE("moments: mean and population std") {
    CHECK(sample_mean({1.0, 2.0, 3.0}) == 2.0);
    // Population convention divides by n: var([0,2]) = (1+1)/2 = 1.
    CHECK(population_std({0.0, 2.0}) == 1.0);
    CHECK(population_std({4.0, 4.0, 4.0}) == 0.0);

    const MomentPair m = compute_moments({0.0, 2.0}, {-2.0, 2.0});
    CHECK(m.mu_p == 1.0);
    CHECK(m.sigma_p == 1.0);
    CHECK(m.mu_h == 0.0);
    CHECK(m.sigma_h == 2.0);

    try {
        sample_mean({});
        FAIL("expected empty_sample");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_sample);
    }
}

TEST_CASE("gaussian_match: worked example") {
    // predicted [0,2] has mu_p=1, sigma_p=1; history [-2,2] has mu_h=0,
    // sigma_h=2, so each element maps to ((x-1)/1)*2+0.
    const std::vector<double> out = gaussian_match({0.0, 2.0}, {-2.0, 2.0});
    REQUIRE(out.size() == 2);
    CHECK(out[0] == -2.0);
    CHECK(out[1] == 2.0);
}

TEST_CASE("gaussian_match: output moments equal the history's") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> len(2, 200);
    for (int trial = 0; trial < 50; ++trial) {
        const auto predicted = random_values(len(rng), rng());
        const auto history = random_values(len(rng), rng(), -10.0, 5.0);
        const std::vector<double> out = gaussian_match(predicted, history);
        REQUIRE(out.size() == predicted.size());

        const MomentPair m = compute_moments(predicted, history);
        CHECK(std::abs(sample_mean(out) - m.mu_h) < 1e-9);
        CHECK(std::abs(population_std(out) - m.sigma_h) < 1e-9);
    }
}

TEST_CASE("gaussian_match: identity when the moments already agree") {
    // Same vector twice: trivially matching moments.
    const std::vector<double> x{0.3, -1.7, 2.2, 0.9};
    CHECK(gaussian_match(x, x) == x);

    // A permutation has the same mean and spread (integer sums are exact),
    // so the transform must still be the bitwise identity.
    const std::vector<double> predicted{3.0, 1.0, 2.0};
    const std::vector<double> history{2.0, 3.0, 1.0};
    CHECK(gaussian_match(predicted, history) == predicted);
}

TEST_CASE("gaussian_match: invariant under affine maps of the prediction") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> scale(0.1, 5.0);
    std::uniform_real_distribution<double> shift(-10.0, 10.0);
    for (int trial = 0; trial < 25; ++trial) {
        const auto x = random_values(48, rng());
        const auto h = random_values(48, rng());
        const double a = scale(rng);
        const double b = shift(rng);
        std::vector<double> ax(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + b;

        const std::vector<double> base = gaussian_match(x, h);
        const std::vector<double> mapped = gaussian_match(ax, h);
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(std::abs(mapped[i] - base[i]) < 1e-9);
        }
    }
}

TEST_CASE("gaussian_match: constant prediction is degenerate") {
    for (const auto& predicted :
         {std::vector<double>{5.0, 5.0, 5.0}, std::vector<double>{0.0, 1e-10}}) {
        try {
            gaussian_match(predicted, {0.0, 1.0, 2.0});
            FAIL("expected degenerate_prediction");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::degenerate_prediction);
        }
    }
}

TEST_CASE("gaussian_match: series overload keeps the channel id") {
    Series predicted;
    predicted.channel_id = 3;
    predicted.values = {0.0, 2.0};
    Series history;
    history.channel_id = 3;
    history.values = {-2.0, 2.0};
    const Series out = gaussian_match(predicted, history);
    CHECK(out.channel_id == 3);
    CHECK(out.values == std::vector<double>{-2.0, 2.0});
}

TEST_CASE("recombine: element-wise sum") {
    CHECK(recombine({1.0, 2.0}, {3.0, 4.0}) == std::vector<double>{4.0, 6.0});

    const std::vector<double> low{0.5, -1.5, 2.0};
    CHECK(recombine(low, {0.0, 0.0, 0.0}) == low);

    // Commutative.
    const auto a = random_values(32, 9);
    const auto b = random_values(32, 10);
    CHECK(recombine(a, b) == recombine(b, a));

    try {
        recombine({1.0}, {1.0, 2.0});
        FAIL("expected dimension_mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::dimension_mismatch);
    }

    Series sl, sh;
    sl.channel_id = 2;
    sl.values = {1.0, 1.0};
    sh.channel_id = 2;
    sh.values = {0.25, -0.25};
    const Series sum = recombine(sl, sh);
    CHECK(sum.channel_id == 2);
    CHECK(sum.values == std::vector<double>{1.25, 0.75});
}

TEST_CASE("recombine: inverts decomposition") {
    std::vector<double> s(256);
    std::mt19937_64 rng(123);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (std::size_t t = 0; t < s.size(); ++t) {
        s[t] = std::sin(2.0 * M_PI * static_cast<double>(t) / 40.0) + noise(rng);
    }
    Series series;
    series.values = s;

    const auto [low, high] = decompose_at(series, FilterSpec{});
    const Series back = recombine(low, high);
    REQUIRE(back.values.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(std::abs(back.values[i] - s[i]) < 1e-12);
    }
}
