#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "obcomp/numerics.hpp"
#include "oracles.hpp"

using namespace obc;

TEST_CASE("minmax_normalize maps evenly spaced values affinely") {
    const std::vector<double> x{0, 2, 4};
    const auto out = minmax_normalize(x, 0.0);
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(0.5));
    CHECK(out[2] == doctest::Approx(1.0));
}

TEST_CASE("minmax_normalize flattens constant input to zero") {
    const std::vector<double> x{5, 5, 5};
    const auto out = minmax_normalize(x, 1e-8);
    for (double v : out) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("minmax_normalize hand evaluation with eps") {
    const std::vector<double> x{-1, 3};
    const auto out = minmax_normalize(x, 1e-8);
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(out[1] <= 1.0);
}

TEST_CASE("minmax_normalize rejects empty input") {
    CHECK_THROWS_AS(minmax_normalize(std::vector<double>{}, 1e-8), std::invalid_argument);
}

TEST_CASE("minmax_normalize output stays in [0,1]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-100.0, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(1 + rng() % 64);
        for (auto& v : x) v = dist(rng);
        const auto out = minmax_normalize(x, 1e-8);
        for (double v : out) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("bilinear_upsample passes identical sizes through") {
    Grid2D m(2, 2);
    m.values = {0, 1, 0, 1};
    const auto out = bilinear_upsample(m, 2, 2);
    CHECK(out.values == m.values);
}

TEST_CASE("bilinear_upsample extends a 1x1 map as a constant") {
    Grid2D m(1, 1);
    m.values = {0.7};
    const auto out = bilinear_upsample(m, 5, 3);
    for (double v : out.values) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("bilinear_upsample matches the scalar oracle on the 2x2 ramp") {
    Grid2D m(2, 2);
    m.values = {0, 1, 0, 1};
    const auto out = bilinear_upsample(m, 4, 4);
    const auto expect = oracle::upsample(m, 4, 4);
    for (size_t i = 0; i < out.values.size(); ++i) {
        CHECK(out.values[i] == doctest::Approx(expect.values[i]).epsilon(1e-9));
    }
    // column pattern 0, 0.25, 0.75, 1 in every row
    for (int y = 0; y < 4; ++y) {
        CHECK(out.at(y, 0) == doctest::Approx(0.0));
        CHECK(out.at(y, 1) == doctest::Approx(0.25));
        CHECK(out.at(y, 2) == doctest::Approx(0.75));
        CHECK(out.at(y, 3) == doctest::Approx(1.0));
    }
}

TEST_CASE("bilinear_upsample matches the oracle on random maps") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int h = 1 + static_cast<int>(rng() % 8);
        const int w = 1 + static_cast<int>(rng() % 8);
        Grid2D m(h, w);
        for (auto& v : m.values) v = dist(rng);
        const int oh = 1 + static_cast<int>(rng() % 24);
        const int ow = 1 + static_cast<int>(rng() % 24);
        const auto got = bilinear_upsample(m, oh, ow);
        const auto expect = oracle::upsample(m, oh, ow);
        for (size_t i = 0; i < got.values.size(); ++i) {
            CHECK(std::abs(got.values[i] - expect.values[i]) < 1e-12);
        }
        // no overshoot beyond the input range
        const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
        for (double v : got.values) {
            CHECK(v >= *lo - 1e-12);
            CHECK(v <= *hi + 1e-12);
        }
    }
}

TEST_CASE("bilinear_upsample preserves constants exactly") {
    Grid2D m(3, 5, 0.42);
    const auto out = bilinear_upsample(m, 17, 9);
    for (double v : out.values) CHECK(v == 0.42);
}

TEST_CASE("bilinear_upsample rejects zero target") {
    Grid2D m(2, 2, 0.0);
    CHECK_THROWS_AS(bilinear_upsample(m, 0, 4), std::invalid_argument);
}

TEST_CASE("avg_pool_3x3 is idempotent on constants") {
    Grid2D m(4, 4, 1.0);
    const auto out = avg_pool_3x3(m);
    for (double v : out.values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("avg_pool_3x3 spreads a center impulse") {
    Grid2D m(3, 3, 0.0);
    m.at(1, 1) = 9.0;
    const auto out = avg_pool_3x3(m);
    CHECK(out.at(1, 1) == doctest::Approx(1.0));
    for (double v : out.values) CHECK(v > 0.0);
    CHECK(out.at(0, 0) == doctest::Approx(9.0 / 4.0));  // corner window has 4 cells
    CHECK(out.at(0, 1) == doctest::Approx(9.0 / 6.0));  // edge window has 6 cells
}

TEST_CASE("avg_pool_3x3 degenerates to identity on 1x1") {
    Grid2D m(1, 1);
    m.values = {0.3};
    const auto out = avg_pool_3x3(m);
    CHECK(out.values[0] == doctest::Approx(0.3));
}

TEST_CASE("quantile endpoints and interpolation") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
    CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
}

TEST_CASE("quantile is monotone in q and bounded") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::vector<double> v(17);
    for (auto& x : v) x = dist(rng);
    double prev = quantile(v, 0.0);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    for (int i = 1; i <= 20; ++i) {
        const double q = i / 20.0;
        const double cur = quantile(v, q);
        CHECK(cur >= prev - 1e-12);
        CHECK(cur >= *lo);
        CHECK(cur <= *hi);
        prev = cur;
    }
}

TEST_CASE("quantile rejects empty input") {
    CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST_CASE("shannon_entropy on one-hot, uniform, and mixed distributions") {
    CHECK(shannon_entropy(std::vector<double>{1, 0, 0}) == doctest::Approx(0.0));
    CHECK(shannon_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(shannon_entropy(std::vector<double>{0.5, 0.25, 0.25}) ==
          doctest::Approx(1.039721).epsilon(1e-6));
}

TEST_CASE("shannon_entropy rejects negative entries") {
    CHECK_THROWS_AS(shannon_entropy(std::vector<double>{1.1, -0.1}), std::invalid_argument);
}

TEST_CASE("shannon_entropy is permutation invariant and bounded by log n") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> p(2 + rng() % 12);
        double sum = 0.0;
        for (auto& v : p) {
            v = dist(rng) + 1e-6;
            sum += v;
        }
        for (auto& v : p) v /= sum;
        const double h = shannon_entropy(p);
        CHECK(h <= std::log(static_cast<double>(p.size())) + 1e-12);
        CHECK(h >= 0.0);
        std::vector<double> shuffled = p;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(shannon_entropy(shuffled) == doctest::Approx(h).epsilon(1e-12));
    }
}
