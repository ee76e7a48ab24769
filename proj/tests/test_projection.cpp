#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "obcomp/projection.hpp"
#include "obcomp/rng.hpp"

using namespace obc;

TEST_CASE("lambda_schedule reproduces the configured maximum at step 0") {
    ProjectionConfig cfg;
    cfg.lambda_max = 0.10;
    cfg.r_max = 0.20;
    cfg.T = 30;
    CHECK(lambda_schedule(0, cfg) == doctest::Approx(0.10));
}

TEST_CASE("lambda_schedule cuts off at r_max") {
    ProjectionConfig cfg;
    cfg.lambda_max = 0.10;
    cfg.r_max = 0.20;
    cfg.T = 30;
    for (int i = 0; i < 30; ++i) {
        const double r = i / 29.0;
        if (r >= 0.20) {
            CHECK(lambda_schedule(i, cfg) == 0.0);
        } else {
            CHECK(lambda_schedule(i, cfg) > 0.0);
        }
    }
}

TEST_CASE("lambda_schedule hand evaluation at step 3") {
    ProjectionConfig cfg;
    cfg.lambda_max = 0.10;
    cfg.r_max = 0.20;
    cfg.T = 30;
    const double r = 3.0 / 29.0;
    const double expect = 0.10 * (1.0 - r / 0.20);
    CHECK(lambda_schedule(3, cfg) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(lambda_schedule(3, cfg) == doctest::Approx(0.04828).epsilon(1e-3));
}

TEST_CASE("lambda_schedule is non-increasing and continuous at the cutoff") {
    ProjectionConfig cfg;
    cfg.lambda_max = 0.25;
    cfg.r_max = 0.35;
    cfg.T = 50;
    double prev = lambda_schedule(0, cfg);
    for (int i = 1; i < 50; ++i) {
        const double cur = lambda_schedule(i, cfg);
        CHECK(cur <= prev + 1e-15);
        CHECK(cur >= 0.0);
        CHECK(cur <= cfg.lambda_max);
        prev = cur;
    }
    // value approaches zero from the left of the boundary
    ProjectionConfig fine = cfg;
    fine.T = 10000;
    int last_positive = -1;
    for (int i = 0; i < fine.T; ++i) {
        if (lambda_schedule(i, fine) > 0.0) last_positive = i;
    }
    CHECK(lambda_schedule(last_positive, fine) < 1e-3);
}

TEST_CASE("lambda_schedule rejects T < 2 and bad steps") {
    ProjectionConfig cfg;
    cfg.T = 1;
    CHECK_THROWS_AS(lambda_schedule(0, cfg), std::invalid_argument);
    cfg.T = 10;
    CHECK_THROWS_AS(lambda_schedule(-1, cfg), std::invalid_argument);
    CHECK_THROWS_AS(lambda_schedule(10, cfg), std::invalid_argument);
}

TEST_CASE("background_project identity at lam=0 and full blend at lam=1") {
    LatentState z(2, 2, 2, 5);
    LatentState z_bg(2, 2, 2, 5);
    GaussianRng rng(3);
    for (auto& v : z.values) v = rng.next();
    for (auto& v : z_bg.values) v = rng.next();
    SoftMask ones(2, 2, 1.0);

    const auto same = background_project(z, z_bg, ones, 0.0);
    CHECK(same.values == z.values);

    const auto swapped = background_project(z, z_bg, ones, 1.0);
    for (size_t i = 0; i < swapped.values.size(); ++i) {
        CHECK(swapped.values[i] == doctest::Approx(z_bg.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("background_project elementwise arithmetic") {
    LatentState z(1, 1, 2, 3, 0.0);
    LatentState z_bg(1, 1, 2, 3, 4.0);
    SoftMask mask(1, 2);
    mask.values = {1.0, 0.0};
    const auto out = background_project(z, z_bg, mask, 0.5);
    CHECK(out.values[0] == doctest::Approx(2.0));
    CHECK(out.values[1] == doctest::Approx(0.0));
}

TEST_CASE("background_project leaves mask-0 cells bitwise unchanged") {
    GaussianRng rng(17);
    LatentState z(3, 4, 4, 2);
    LatentState z_bg(3, 4, 4, 2);
    for (auto& v : z.values) v = rng.next();
    for (auto& v : z_bg.values) v = rng.next();
    SoftMask mask(4, 4, 0.0);
    mask.at(1, 2) = 0.8;
    const auto out = background_project(z, z_bg, mask, 0.7);
    const size_t plane = 16;
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < plane; ++i) {
            if (mask.values[i] == 0.0) {
                CHECK(out.values[c * plane + i] == z.values[c * plane + i]);
            }
        }
    }
}

TEST_CASE("background_project satisfies the convexity bound on random latents") {
    GaussianRng rng(23);
    std::mt19937_64 u(24);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        LatentState z(2, 3, 3, 1);
        LatentState z_bg(2, 3, 3, 1);
        for (auto& v : z.values) v = rng.next();
        for (auto& v : z_bg.values) v = rng.next();
        SoftMask mask(3, 3);
        for (auto& v : mask.values) v = unit(u);
        const double lam = unit(u);
        const auto out = background_project(z, z_bg, mask, lam);
        for (size_t i = 0; i < out.values.size(); ++i) {
            const double moved = std::abs(out.values[i] - z.values[i]);
            const double full = std::abs(z_bg.values[i] - z.values[i]);
            CHECK(moved <= full + 1e-12);
        }
    }
}

TEST_CASE("background_project validates shapes and lam") {
    LatentState z(1, 2, 2, 1, 0.0);
    LatentState other(2, 2, 2, 1, 0.0);
    SoftMask mask(2, 2, 0.5);
    CHECK_THROWS_AS(background_project(z, other, mask, 0.5), std::invalid_argument);
    SoftMask bad(3, 2, 0.5);
    CHECK_THROWS_AS(background_project(z, z, bad, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(background_project(z, z, mask, 1.5), std::invalid_argument);
}
