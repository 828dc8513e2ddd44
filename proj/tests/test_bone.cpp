#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ptm/bone.hpp"
#include "ptm/error.hpp"

using namespace ptm;
using doctest::Approx;

TEST_CASE("bone_residual for the PT families")
{
    const auto grid = uniform_grid();
    CHECK(bone_residual(CountingLaw::poisson(2.0), 0.5, grid) < 1e-12);
    CHECK(bone_residual(CountingLaw::negative_binomial(3.0, 0.4), 0.25, grid) < 1e-12);
    CHECK(bone_residual(CountingLaw::binomial(7, 0.3), 1.0, grid) == 0.0);
    CHECK(bone_residual(CountingLaw::poisson(2.0), 1.0, grid) == 0.0);
}

TEST_CASE("bone_residual over a parameter grid")
{
    const auto grid = uniform_grid();
    for (double a : {0.1, 0.5, 0.9}) {
        for (double lambda : {0.1, 0.5, 1.0, 3.0, 10.0}) CHECK(bone_residual(CountingLaw::poisson(lambda), a, grid) < 1e-12);
        for (double p : {0.05, 0.2, 0.5, 0.8, 0.95}) CHECK(bone_residual(CountingLaw::binomial(12, p), a, grid) < 1e-12);
        for (double th : {0.05, 0.2, 0.5, 0.8, 0.95})
            CHECK(bone_residual(CountingLaw::negative_binomial(2.5, th), a, grid) < 1e-12);
    }
}

TEST_CASE("nnps_bone_test: geometric is negative-binomial-like")
{
    const auto v = nnps_bone_test(NnpsFamily::geometric(), 0.5, 0.5, uniform_grid());
    CHECK(v.classification == BoneClass::PositiveLog);
    CHECK(v.max_residual < 1e-10);
    REQUIRE(v.A);
    REQUIRE(v.B);
    // log g(x) = -log(1 - x): A = -1, B = -1.
    CHECK(*v.A == Approx(-1.0).epsilon(1e-4));
    CHECK(*v.B == Approx(-1.0).epsilon(1e-4));
    // thin_map of the geometric law NegBin(1, 0.5) at a = 0.5 gives 1/3.
    REQUIRE(v.h);
    CHECK(std::abs(*v.h - 1.0 / 3.0) < 1e-8);
}

TEST_CASE("nnps_bone_test: exponential coefficients are Poisson-like")
{
    const auto v = nnps_bone_test(NnpsFamily::exponential(), 2.0, 0.3, uniform_grid());
    CHECK(v.classification == BoneClass::LinearLog);
    REQUIRE(v.h);
    CHECK(std::abs(*v.h - 0.6) < 1e-8);
    REQUIRE(v.A);
    CHECK(*v.A == Approx(1.0).epsilon(1e-6));
    CHECK_FALSE(v.B);
}

TEST_CASE("nnps_bone_test: binomial coefficients are binomial-like")
{
    const auto v = nnps_bone_test(NnpsFamily::binomial(6), 0.7, 0.4, uniform_grid());
    CHECK(v.classification == BoneClass::NegativeLog);
    CHECK(v.max_residual < 1e-10);
    REQUIRE(v.A);
    REQUIRE(v.B);
    CHECK(*v.A == Approx(1.0).epsilon(1e-4));
    CHECK(*v.B == Approx(6.0).epsilon(1e-4));
    // Binomial(6, p) with theta = p/(1-p): thinned theta' = a p / (1 - a p).
    const double p = 0.7 / 1.7;
    REQUIRE(v.h);
    CHECK(std::abs(*v.h - 0.4 * p / (1 - 0.4 * p)) < 1e-8);
}

TEST_CASE("nnps_bone_test: non-PT families")
{
    // g = 1 + x + x^3. The t = 1 slice fixes h = 0.26528, then t in (0, 1) misses by ~5e-3.
    const auto cubic = nnps_bone_test(NnpsFamily::from_coeffs({1, 1, 0, 1}), 0.5, 0.5, uniform_grid());
    CHECK(cubic.classification == BoneClass::NotBone);
    CHECK(cubic.max_residual == Approx(0.00538).epsilon(0.01));
    CHECK(cubic.max_residual > cubic.tolerance);
    REQUIRE(cubic.h);
    CHECK(*cubic.h == Approx(0.26528).epsilon(1e-4));
    CHECK_FALSE(cubic.A);
    CHECK_FALSE(cubic.B);

    // g = (1 + x) e^x.
    const auto mix = nnps_bone_test(NnpsFamily::exp_times_linear(), 0.5, 0.5, uniform_grid());
    CHECK(mix.classification == BoneClass::NotBone);
    CHECK(mix.max_residual == Approx(8.85e-4).epsilon(0.01));
    REQUIRE(mix.h);
    CHECK(*mix.h == Approx(0.22741).epsilon(1e-4));
    const auto mix2 = nnps_bone_test(NnpsFamily::exp_times_linear(), 2.0, 0.3, uniform_grid());
    CHECK(mix2.classification == BoneClass::NotBone);
    CHECK(mix2.max_residual == Approx(7.5e-3).epsilon(0.01));
}

TEST_CASE("nnps_bone_test hypotheses")
{
    CHECK_THROWS_AS(nnps_bone_test(NnpsFamily::from_coeffs({1, 0, 1}), 0.5, 0.5, uniform_grid()), HypothesisViolation);
    CHECK_THROWS_AS(nnps_bone_test(NnpsFamily::from_coeffs({2, 1}), 0.5, 0.5, uniform_grid()), HypothesisViolation);
    CHECK(nnps_tolerance(NnpsFamily::from_coeffs({1, 1})) == 1e-10);
    CHECK(nnps_tolerance(NnpsFamily::geometric()) == 1e-6);
}

TEST_CASE("fitted h agrees with thin_map for PT families")
{
    for (double th : {0.1, 0.3, 0.6})
        for (double a : {0.1, 0.5, 0.9}) {
            const auto geo = nnps_bone_test(NnpsFamily::geometric(), th, a, uniform_grid());
            const auto nb = std::get<NegativeBinomial>(thin_map(CountingLaw::negative_binomial(1.0, th), a).variant());
            REQUIRE(geo.h);
            CHECK(std::abs(*geo.h - nb.theta) < 1e-8);

            const auto ex = nnps_bone_test(NnpsFamily::exponential(), 3 * th, a, uniform_grid());
            REQUIRE(ex.h);
            CHECK(std::abs(*ex.h - a * 3 * th) < 1e-8);
        }
}

TEST_CASE("cauchy_classify examples")
{
    const auto s = log_grid(1e-3, 0.5);
    const auto lin = cauchy_classify([](double t) { return 2 * t; }, s);
    CHECK(lin.classification == BoneClass::LinearLog);
    REQUIRE(lin.A);
    CHECK(*lin.A == Approx(2.0).epsilon(1e-6));
    CHECK(lin.max_residual < 1e-8);

    const auto lg = cauchy_classify([](double t) { return 3 * std::log1p(0.5 * t); }, s);
    CHECK(lg.classification == BoneClass::PositiveLog);
    REQUIRE(lg.A);
    REQUIRE(lg.B);
    CHECK(*lg.A == Approx(0.5).epsilon(1e-4));
    CHECK(*lg.B == Approx(3.0).epsilon(1e-4));

    CHECK_THROWS_AS(cauchy_classify([](double t) { return t * t; }, s), HypothesisViolation);
    CHECK_THROWS_AS(cauchy_classify([](double t) { return -t; }, s), HypothesisViolation);
}

TEST_CASE("cauchy_classify parameter recovery")
{
    const auto s = log_grid(1e-3, 0.5);
    for (double a : {0.01, 0.7, 3.0, 25.0}) {
        const auto v = cauchy_classify([a](double t) { return a * t; }, s);
        CHECK(v.classification == BoneClass::LinearLog);
        REQUIRE(v.A);
        CHECK(std::abs(*v.A - a) <= 1e-6 * a);
    }
    for (auto [a, b] : {std::pair{0.2, 1.0}, std::pair{-0.8, -2.0}, std::pair{1.5, 0.4}, std::pair{-0.3, -5.0}}) {
        const auto v = cauchy_classify([a = a, b = b](double t) { return b * std::log1p(a * t); }, s);
        CHECK(v.classification != BoneClass::NotBone);
        REQUIRE(v.A);
        REQUIRE(v.B);
        CHECK(std::abs(*v.A - a) <= 1e-4 * std::abs(a));
        CHECK(std::abs(*v.B - b) <= 1e-4 * std::abs(b));
    }
}

TEST_CASE("cauchy_classify rejects functions outside the dichotomy")
{
    const auto s = log_grid(1e-3, 0.5);
    const auto v = cauchy_classify([](double t) { return t + t * t * t; }, s);
    CHECK(v.classification == BoneClass::NotBone);
    CHECK(v.max_residual > v.tolerance);
}

TEST_CASE("atomic counterexample")
{
    const auto grid = uniform_grid();
    const double two[] = {0.0, 0.0, 1.0};
    const double t0[] = {0.0, 1.0};
    const auto c = atomic_counterexample(two, t0);
    CHECK(c.lhs[0] == Approx(0.25).epsilon(1e-15));
    CHECK(c.rhs[0] == Approx(0.25).epsilon(1e-15));
    CHECK(c.lhs[1] == 1.0);
    CHECK(c.rhs[1] == Approx(1.0).epsilon(1e-15));
    CHECK(c.max_residual < 1e-15);

    const auto pois = atomic_counterexample(CountingLaw::poisson(1.0), grid);
    CHECK(pois.max_residual < 1e-10);
    // Fair-coin thinning of Poisson(1) is Poisson(1/2).
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(pois.rhs[i] == Approx(std::exp(0.5 * (grid[i] - 1))).epsilon(1e-12));

    const double lumpy[] = {0.1, 0.0, 0.3, 0.0, 0.0, 0.6};
    CHECK(atomic_counterexample(lumpy, grid).max_residual < 1e-14);
}

TEST_CASE("grids")
{
    const auto u = uniform_grid();
    CHECK(u.size() == 101);
    CHECK(u.front() == 0.0);
    CHECK(u.back() == 1.0);
    const auto l = log_grid(1e-3, 0.5);
    CHECK(l.size() == 50);
    CHECK(l.front() == Approx(1e-3));
    CHECK(l.back() == Approx(0.5));
    CHECK(to_string(BoneClass::NegativeLog) == "NegativeLog");
}
