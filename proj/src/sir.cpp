#include "ptm/sir.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ptm/error.hpp"

namespace ptm::sir {

namespace {

using State = std::array<double, 3>;

State deriv(const SirParams& p, const State& y)
{
    const double inf = p.beta * y[1] * y[0];
    const double rec = p.gamma * y[1];
    return {-inf, inf - rec, rec};
}

State rk4(const SirParams& p, const State& y, double h)
{
    auto axpy = [](const State& a, double s, const State& b) {
        return State{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
    };
    const State k1 = deriv(p, y);
    const State k2 = deriv(p, axpy(y, 0.5 * h, k1));
    const State k3 = deriv(p, axpy(y, 0.5 * h, k2));
    const State k4 = deriv(p, axpy(y, h, k3));
    State out;
    for (int j = 0; j < 3; ++j) out[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    return out;
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace

void SirParams::validate() const
{
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("rho must be positive");
    if (!(r0() > 1.0)) throw DomainError("R0 = beta/gamma must exceed 1, got " + fmt(r0()));
}

double final_size(double r0, double rho)
{
    if (!(r0 > 1.0) || !std::isfinite(r0)) throw DomainError("final_size needs R0 > 1");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("final_size needs rho > 0");
    // F(tau) = 1 - tau - exp(-R0 (tau + rho)): F(0) > 0 > F(1), F concave.
    auto F = [&](double x) { return 1.0 - x - std::exp(-r0 * (x + rho)); };
    double lo = 0.0, hi = 1.0;
    double x = 1.0 - std::exp(-r0 * (1.0 + rho));
    for (int it = 0; it < 200; ++it) {
        const double fx = F(x);
        if (fx > 0.0) lo = x; else hi = x;
        if (fx == 0.0) break;
        const double d = -1.0 + r0 * std::exp(-r0 * (x + rho));
        double next = x - fx / d;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-16 * std::max(1.0, x)) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

SirTrajectory solve_sir(const SirParams& params, const SolveOptions& opts)
{
    params.validate();
    if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) throw StepSizeError("dt must be positive");
    if (opts.t_max && !(*opts.t_max > opts.dt)) throw DomainError("t_max must exceed dt");

    SirTrajectory tr;
    tr.params = params;
    tr.dt = opts.dt;
    tr.tau = final_size(params.r0(), params.rho);
    const double total = 1.0 + params.rho;
    const std::size_t steps = opts.t_max ? static_cast<std::size_t>(std::ceil(*opts.t_max / opts.dt - 1e-9)) : 0;
    const std::size_t cap = 50'000'000;

    State y{1.0, params.rho, 0.0};
    auto push = [&](double t, const State& s) {
        tr.t.push_back(t);
        tr.S.push_back(s[0]);
        tr.I.push_back(s[1]);
        tr.R.push_back(s[2]);
    };
    push(0.0, y);
    double peak = y[1];
    for (std::size_t k = 1;; ++k) {
        if (opts.t_max && k > steps) break;
        if (!opts.t_max && k > cap) throw HorizonError("epidemic did not die out within the step cap");
        y = rk4(params, y, opts.dt);
        const double t = opts.t_max ? std::min(*opts.t_max, static_cast<double>(k) * opts.dt)
                                    : static_cast<double>(k) * opts.dt;
        const double drift = std::abs(y[0] + y[1] + y[2] - total);
        if (!std::isfinite(drift) || drift > 1e-6 || y[1] < -1e-12)
            throw StepSizeError("conservation S+I+R = 1+rho violated at t = " + fmt(t) + "; reduce dt");
        push(t, y);
        peak = std::max(peak, y[1]);
        if (!opts.t_max && y[1] < 1e-8 && y[1] < peak) break;
    }
    if (tr.I.back() >= 1e-8)
        tr.warnings.push_back("I(t_max) = " + fmt(tr.I.back()) + " is not below 1e-8; extend t_max");
    return tr;
}

std::array<double, 3> state_at(const SirTrajectory& traj, double t)
{
    if (!(t >= 0.0)) throw DomainError("time must be non-negative");
    if (t > traj.t_max() + 1e-12) throw HorizonError("time " + fmt(t) + " is beyond the solved horizon " + fmt(traj.t_max()));
    const auto it = std::upper_bound(traj.t.begin(), traj.t.end(), t);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - traj.t.begin() - 1));
    const State y{traj.S[k], traj.I[k], traj.R[k]};
    const double h = t - traj.t[k];
    return h > 0.0 ? rk4(traj.params, y, h) : y;
}

double tail_mass(const SirTrajectory& traj)
{
    return 1.0 - (1.0 - traj.S.back()) / traj.tau;
}

SpatialLaw infection_density(const SirTrajectory& traj, std::vector<std::string>* warnings)
{
    const double tail = tail_mass(traj);
    if (tail > 1e-3)
        throw HorizonError("infection law has mass " + fmt(tail) + " beyond t_max = " + fmt(traj.t_max()) +
                           "; extend the horizon");
    if (tail > 1e-6 && warnings)
        warnings->push_back("infection-time tail mass " + fmt(tail) + " folded into the last cell");

    const std::size_t m = traj.t.size();
    std::vector<double> dens(m);
    for (std::size_t k = 0; k < m; ++k)
        dens[k] = std::max(0.0, traj.params.beta * traj.I[k] * traj.S[k] / traj.tau);
    double mass = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) mass += 0.5 * (dens[k] + dens[k + 1]) * (traj.t[k + 1] - traj.t[k]);
    const double missing = 1.0 - mass;
    if (missing > 0.0) dens[m - 1] += 2.0 * missing / (traj.t[m - 1] - traj.t[m - 2]);
    return SpatialLaw::density_table(traj.t, std::move(dens));
}

MarkKernel recovery_kernel(const SirParams& params)
{
    if (!(params.gamma > 0.0)) throw DomainError("gamma must be positive");
    const double g = params.gamma;
    MarkKernel k;
    k.name = "recovery";
    k.sampler = [g](const MarkedPoint& p, Stream& rng) {
        std::exponential_distribution<double> e(g);
        return Value::scalar(p.location().scalar() + e(rng));
    };
    k.integrator = [g](const MarkedPoint& p, const std::function<double(const Value&)>& h) {
        const double x = p.location().scalar();
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&](double u) { return g * std::exp(-g * u) * h(Value::scalar(x + u)); }, 0.0,
            std::numeric_limits<double>::infinity(), 20, 1e-12);
    };
    return k;
}

LabelProbs label_probabilities(const SirTrajectory& traj, double t)
{
    const auto y = state_at(traj, t);
    double pi = y[1] - traj.params.rho * std::exp(-traj.params.gamma * t);
    if (pi < 0.0) {
        if (pi < -1e-12) throw NumericError("negative infected label probability " + fmt(pi));
        pi = 0.0;
    }
    const double ps = std::clamp(y[0], 0.0, 1.0);
    pi = std::min(pi, 1.0 - ps);
    return {ps, pi, 1.0 - ps - pi};
}

double label_count_pmf(std::int64_t n, const SirTrajectory& traj, double t, std::int64_t k_i, std::int64_t k_r)
{
    if (n < 0) throw DomainError("n must be non-negative");
    if (k_i < 0 || k_r < 0 || k_i + k_r > n) return 0.0;
    const auto p = label_probabilities(traj, t);
    const std::int64_t k_s = n - k_i - k_r;
    auto term = [](std::int64_t k, double q) {
        if (k == 0) return 0.0;
        return q > 0.0 ? static_cast<double>(k) * std::log(q) - std::lgamma(static_cast<double>(k) + 1.0)
                       : -std::numeric_limits<double>::infinity();
    };
    const double lg = std::lgamma(static_cast<double>(n) + 1.0) + term(k_s, p.s) + term(k_i, p.i) + term(k_r, p.r);
    return std::exp(lg);
}

MeasureSpec infected_spec(std::int64_t n, const SirTrajectory& traj)
{
    if (n < 1 || n > std::numeric_limits<int>::max()) throw DomainError("population size n must be positive");
    MeasureSpec spec{CountingLaw::binomial(static_cast<int>(n), traj.tau), infection_density(traj), {}};
    return mark(std::move(spec), recovery_kernel(traj.params));
}

LabelSimulation simulate_labels(std::int64_t n, const SirTrajectory& traj, double t, std::size_t n_rep,
                                const McOptions& mc)
{
    if (n_rep == 0) throw DomainError("simulate_labels needs at least one replicate");
    if (!(t >= 0.0) || t > traj.t_max()) throw HorizonError("label time outside the solved horizon");
    const MeasureSpec spec = infected_spec(n, traj);
    LabelSimulation out{n, t, std::vector<std::int64_t>(n_rep), std::vector<std::int64_t>(n_rep),
                        std::vector<std::int64_t>(n_rep)};
    StreamFactory streams(mc.seed);
    parallel_for(n_rep, mc.threads, [&](std::size_t r) {
        Stream rng = streams.stream(r);
        const auto pattern = sample_pattern(spec, rng);
        std::int64_t ki = 0, kr = 0;
        for (const auto& p : pattern.points) {
            const double x = p.location().scalar();
            const double y = p.mark(0).scalar();
            if (x <= t && t < y) ++ki;
            else if (y <= t) ++kr;
        }
        out.k_i[r] = ki;
        out.k_r[r] = kr;
        out.k_s[r] = n - ki - kr;
    });
    return out;
}

}  // namespace ptm::sir
