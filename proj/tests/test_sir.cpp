#include <cmath>
#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "ptm/error.hpp"
#include "ptm/sir.hpp"

using namespace ptm;
using namespace ptm::sir;
using doctest::Approx;

namespace {

const SirTrajectory& base()
{
    static const SirTrajectory tr = solve_sir({2.0, 1.0, 0.01});
    return tr;
}

}  // namespace

TEST_CASE("final_size")
{
    CHECK(final_size(2.0, 0.01) == Approx(0.80346993926386608).epsilon(1e-14));
    CHECK(final_size(2.0, 0.01) == Approx(oracle::final_size_fixed_point(2.0, 0.01)).epsilon(1e-12));
    double prev = 0.0;
    for (double rho : {1e-6, 0.01, 0.1, 1.0, 5.0}) {
        for (double r0 : {1.05, 1.5, 2.0, 5.0, 20.0}) {
            const double tau = final_size(r0, rho);
            CHECK(tau > 0.0);
            CHECK(tau <= 1.0);
            if (r0 * (1 + rho) < 30) CHECK(tau < 1.0);
            CHECK(std::abs(1.0 - tau - std::exp(-r0 * (tau + rho))) < 1e-12);
        }
        const double tau = final_size(2.0, rho);
        CHECK(tau > prev);
        prev = tau;
    }
    CHECK(final_size(2.0, 5.0) > 0.9999);
    CHECK_THROWS_AS(final_size(1.0, 0.01), DomainError);
    CHECK_THROWS_AS(final_size(2.0, 0.0), DomainError);
}

TEST_CASE("solve_sir invariants")
{
    const auto& tr = base();
    CHECK(tr.S[0] == 1.0);
    CHECK(tr.I[0] == 0.01);
    CHECK(tr.R[0] == 0.0);
    CHECK(tr.I.back() < 1e-8);
    CHECK(tr.warnings.empty());
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        CHECK(std::abs(tr.S[k] + tr.I[k] + tr.R[k] - 1.01) < 1e-6);
        CHECK(std::abs(tr.S[k] * std::exp(2.0 * tr.R[k]) - 1.0) < 1e-6);
        if (k) {
            CHECK(tr.S[k] <= tr.S[k - 1]);
            CHECK(tr.R[k] >= tr.R[k - 1]);
        }
    }
    CHECK(tr.S.back() == Approx(1.0 - 0.80346993926386608).epsilon(1e-6));
    CHECK(tr.tau == Approx(0.80346993926386608).epsilon(1e-14));
}

TEST_CASE("conservation across R0 up to 5")
{
    for (double beta : {1.2, 3.0, 5.0}) {
        const auto tr = solve_sir({beta, 1.0, 0.02});
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.t.size(); ++k) worst = std::max(worst, std::abs(tr.S[k] + tr.I[k] + tr.R[k] - 1.02));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("solve_sir errors and warnings")
{
    CHECK_THROWS_AS(solve_sir({1.0, 1.0, 0.01}), DomainError);
    CHECK_THROWS_AS(solve_sir({2.0, 1.0, 0.01}, {0.0, 10.0}), StepSizeError);
    CHECK_THROWS_AS(solve_sir({20.0, 1.0, 0.5}, {1.0, 30.0}), StepSizeError);
    const auto short_run = solve_sir({2.0, 1.0, 0.01}, {1e-2, 5.0});
    CHECK(short_run.warnings.size() == 1);
    CHECK(short_run.t_max() == Approx(5.0));
    CHECK_THROWS_AS(infection_density(short_run), HorizonError);
}

TEST_CASE("infection density")
{
    const auto& tr = base();
    std::vector<std::string> warn;
    const auto nu = infection_density(tr, &warn);
    CHECK(tail_mass(tr) < 1e-6);
    CHECK(warn.empty());
    const auto& tab = std::get<SpatialLaw::Table>(nu.kind());
    for (double d : tab.density) CHECK(d >= 0.0);
    CHECK(nu.mass(IntervalSet::interval(0.0, tr.t_max())) == Approx(1.0).epsilon(1e-12));
    for (double t : {0.5, 2.0, 4.0, 7.5, 15.0}) {
        const auto y = state_at(tr, t);
        CHECK(std::abs(nu.mass(IntervalSet::interval(0.0, t)) - (1.0 - y[0]) / tr.tau) < 1e-6);
    }
}

TEST_CASE("state_at")
{
    const auto& tr = base();
    const auto y = state_at(tr, 0.0);
    CHECK(y[0] == 1.0);
    // Midpoint of a step agrees with a finer solve.
    const auto fine = solve_sir({2.0, 1.0, 0.01}, {1e-4, 6.0});
    const auto a = state_at(tr, 5.0005);
    const auto b = state_at(fine, 5.0005);
    for (int j = 0; j < 3; ++j) CHECK(a[j] == Approx(b[j]).epsilon(1e-10));
    CHECK_THROWS_AS(state_at(tr, tr.t_max() + 1.0), HorizonError);
}

TEST_CASE("recovery kernel")
{
    const SirParams p{2.0, 1.5, 0.01};
    const auto k = recovery_kernel(p);
    Stream rng(8);
    std::vector<double> d(100000);
    std::size_t beyond = 0;
    for (auto& v : d) {
        const MarkedPoint x{{Value::scalar(3.0)}};
        const double y = k.sampler(x, rng).scalar();
        CHECK(y > 3.0);
        v = y - 3.0;
        beyond += v > 1.0 ? 1 : 0;
    }
    CHECK(stats::mean_estimate(d).within(1.0 / 1.5));
    const double q = std::exp(-1.5);
    const double se = std::sqrt(q * (1 - q) / 1e5);
    CHECK(std::abs(static_cast<double>(beyond) / 1e5 - q) <= 4 * se);

    const MarkedPoint x{{Value::scalar(2.0)}};
    CHECK(k.integrator(x, [](const Value& y) { return y.scalar(); }) == Approx(2.0 + 1.0 / 1.5).epsilon(1e-10));
    CHECK(k.integrator(x, [](const Value& y) { return y.scalar() > 3.0 ? 1.0 : 0.0; }) == Approx(q).epsilon(1e-9));
}

TEST_CASE("label probabilities")
{
    const auto& tr = base();
    const auto p0 = label_probabilities(tr, 0.0);
    CHECK(p0.s == 1.0);
    CHECK(p0.i == 0.0);
    CHECK(p0.r == 0.0);
    const auto inf = label_probabilities(tr, tr.t_max());
    CHECK(inf.s == Approx(1.0 - tr.tau).epsilon(1e-7));
    CHECK(inf.i < 1e-7);
    CHECK(inf.r == Approx(tr.tau).epsilon(1e-6));
    for (double t : {0.3, 1.0, 3.0, 6.0, 10.0, 20.0}) {
        const auto p = label_probabilities(tr, t);
        CHECK(std::abs(p.s + p.i + p.r - 1.0) <= 2 * std::numeric_limits<double>::epsilon());
        CHECK((p.s >= 0 && p.i >= 0 && p.r >= 0));
        // tau * int_0^t nu(x) e^{-gamma (t - x)} dx by Simpson on the ODE.
        const double direct = oracle::simpson(
            [&](double x) {
                const auto y = state_at(tr, x);
                return 2.0 * y[0] * y[1] * std::exp(-(t - x));
            },
            0.0, t, 2000);
        CHECK(p.i == Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("label_count_pmf")
{
    const auto& tr = base();
    const double t = 3.0;
    const auto p = label_probabilities(tr, t);
    CHECK(label_count_pmf(20, tr, t, 0, 0) == Approx(std::pow(p.s, 20)).epsilon(1e-12));
    double total = 0.0;
    std::vector<double> marginal(21, 0.0);
    for (int ki = 0; ki <= 20; ++ki)
        for (int kr = 0; ki + kr <= 20; ++kr) {
            const double v = label_count_pmf(20, tr, t, ki, kr);
            total += v;
            marginal[static_cast<std::size_t>(ki + kr)] += v;
        }
    CHECK(total == Approx(1.0).epsilon(1e-12));
    const auto bin = oracle::binomial_pmf_enumerated(20, 1.0 - p.s);
    for (std::size_t k = 0; k <= 20; ++k) CHECK(marginal[k] == Approx(bin[k]).epsilon(1e-9));
    CHECK(label_count_pmf(20, tr, t, 15, 6) == 0.0);
}

TEST_CASE("simulated labels match the trinomial law")
{
    const auto& tr = base();
    const double t = 3.0;
    const auto sim = simulate_labels(20, tr, t, 100000, {42, 2});
    std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> hist;
    for (std::size_t r = 0; r < sim.k_i.size(); ++r) ++hist[{sim.k_i[r], sim.k_r[r]}];
    std::vector<double> probs;
    std::vector<std::uint64_t> obs;
    for (int ki = 0; ki <= 20; ++ki)
        for (int kr = 0; ki + kr <= 20; ++kr) {
            probs.push_back(label_count_pmf(20, tr, t, ki, kr));
            const auto it = hist.find({ki, kr});
            obs.push_back(it == hist.end() ? 0 : it->second);
        }
    CHECK(stats::chi_square_gof(probs, obs, sim.k_i.size()).pass);

    std::vector<double> ka(sim.k_i.size());
    for (std::size_t r = 0; r < ka.size(); ++r) ka[r] = static_cast<double>(sim.k_i[r] + sim.k_r[r]);
    const double st = state_at(tr, t)[0];
    CHECK(stats::mean_estimate(ka).within(20 * (1 - st)));
    CHECK(stats::variance_estimate(ka).within(20 * st * (1 - st)));
}

TEST_CASE("restricted count over (0, t] is binomial(n, 1 - S_t)")
{
    const auto& tr = base();
    std::uint64_t seed = 7;
    for (double t : {1.0, 3.0, 10.0}) {
        const auto sim = simulate_labels(20, tr, t, 100000, {seed++, 2});
        std::vector<std::int64_t> ka(sim.k_i.size());
        for (std::size_t r = 0; r < ka.size(); ++r) ka[r] = sim.k_i[r] + sim.k_r[r];
        const auto law = CountingLaw::binomial(20, 1.0 - state_at(tr, t)[0]);
        CHECK(stats::chi_square_counts(ka, [&](std::int64_t k) { return pmf(law, k); }).pass);
    }
}

TEST_CASE("single-individual label frequencies")
{
    const auto& tr = base();
    const auto sim = simulate_labels(1, tr, 4.0, 100000, {11, 1});
    const auto p = label_probabilities(tr, 4.0);
    std::vector<double> s(sim.k_s.begin(), sim.k_s.end()), i(sim.k_i.begin(), sim.k_i.end()),
        r(sim.k_r.begin(), sim.k_r.end());
    CHECK(stats::mean_estimate(s).within(p.s));
    CHECK(stats::mean_estimate(i).within(p.i));
    CHECK(stats::mean_estimate(r).within(p.r));
}
