#include "ptm/compound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "ptm/error.hpp"

namespace ptm::compound {

namespace {

std::vector<double> breaks_for(const StoreModel& m, const IntervalSet& b)
{
    auto out = b.breakpoints();
    out.insert(out.end(), m.state_breaks.begin(), m.state_breaks.end());
    return out;
}

// Integral over B of nu(dt) sum_x p^t_x w_x.
double weighted(const StoreModel& m, const IntervalSet& b, const std::vector<double>& w)
{
    const double v = m.arrivals.integrate(
        [&](const Value& t) {
            if (!b.contains(t.scalar())) return 0.0;
            const auto p = m.state_probs(t.scalar());
            double acc = 0.0;
            for (std::size_t x = 0; x < w.size(); ++x) acc += p[x] * w[x];
            return acc;
        },
        breaks_for(m, b));
    if (!std::isfinite(v)) throw NumericError("store quadrature is not finite");
    return v;
}

std::vector<double> second_moments(const StoreModel& m)
{
    std::vector<double> out(m.states());
    for (std::size_t x = 0; x < out.size(); ++x) out[x] = m.spend_mean[x] * m.spend_mean[x] + m.spend_var[x];
    return out;
}

double gamma_expect(double mean, double var, const std::function<double(const Value&)>& h)
{
    if (var == 0.0) return h(Value::scalar(mean));
    const boost::math::gamma_distribution<double> g(mean * mean / var, var / mean);
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([&](double y) {
        const double d = boost::math::pdf(g, y);
        return d == 0.0 ? 0.0 : d * h(Value::scalar(y));
    });
}

}  // namespace

std::string to_string(SpendLaw s)
{
    switch (s) {
        case SpendLaw::Gamma: return "gamma";
    }
    return "unknown";
}

StoreModel StoreModel::make(CountingLaw counting, double days, std::vector<double> breaks,
                            std::vector<std::vector<double>> probs, std::vector<double> spend_mean,
                            std::vector<double> spend_var)
{
    if (!(days > 0.0) || !std::isfinite(days)) throw DomainError("days must be positive");
    if (probs.size() != breaks.size() + 1)
        throw DomainError("piecewise state probabilities need one more row than breakpoints");
    if (!std::is_sorted(breaks.begin(), breaks.end()) ||
        std::any_of(breaks.begin(), breaks.end(), [&](double b) { return !(b > 0.0 && b < days); }))
        throw DomainError("state breakpoints must be increasing inside (0, days)");
    StoreModel m{std::move(counting), days, SpatialLaw::uniform(0.0, days), {}, breaks, std::move(spend_mean),
                 std::move(spend_var)};
    m.state_probs = [breaks, probs = std::move(probs)](double t) {
        const auto j = static_cast<std::size_t>(std::lower_bound(breaks.begin(), breaks.end(), t) - breaks.begin());
        return probs[j];
    };
    m.validate();
    return m;
}

void StoreModel::validate() const
{
    if (!std::holds_alternative<Poisson>(counting.variant()) &&
        !std::holds_alternative<NegativeBinomial>(counting.variant()))
        throw UnsupportedFamily("store counting law must be Poisson or negative binomial, got " + counting.describe());
    if (!(days > 0.0)) throw DomainError("days must be positive");
    if (spend_mean.empty()) throw DomainError("at least one state is required");
    if (spend_var.size() != spend_mean.size()) throw DomainError("spend_mean and spend_var differ in length");
    if (!state_probs) throw DomainError("state probabilities missing");
    for (std::size_t x = 0; x < spend_mean.size(); ++x) {
        if (!(spend_mean[x] >= 0.0) || !std::isfinite(spend_mean[x]))
            throw DomainError("spend_mean[" + std::to_string(x) + "] must be non-negative");
        if (!(spend_var[x] >= 0.0) || !std::isfinite(spend_var[x]))
            throw DomainError("spend_var[" + std::to_string(x) + "] must be non-negative");
        if (spend_mean[x] == 0.0 && spend_var[x] > 0.0)
            throw DomainError("state " + std::to_string(x) + ": positive spend with zero mean needs zero variance");
    }
    // Check the probability rows at every piece midpoint.
    std::vector<double> probe{0.0};
    probe.insert(probe.end(), state_breaks.begin(), state_breaks.end());
    probe.push_back(days);
    for (std::size_t i = 0; i + 1 < probe.size(); ++i) {
        const auto p = state_probs(0.5 * (probe[i] + probe[i + 1]));
        if (p.size() != states()) throw DomainError("state probability row has the wrong length");
        double s = 0.0;
        for (double v : p) {
            if (!(v >= 0.0)) throw DomainError("state probabilities must be non-negative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw DomainError("state probabilities must sum to 1");
    }
}

ZMoments z_moments(const StoreModel& model, const IntervalSet& b)
{
    model.validate();
    const double m1 = weighted(model, b, model.spend_mean);
    const double m2 = weighted(model, b, second_moments(model));
    const Moments k = moments(model.counting);
    return {k.mean * m1, k.mean * m2 + (k.variance - k.mean) * m1 * m1};
}

double z_covariance(const StoreModel& model, const IntervalSet& a)
{
    model.validate();
    const Moments k = moments(model.counting);
    const double excess = k.variance - k.mean;
    if (excess == 0.0) return 0.0;
    const auto ac = a.complement(0.0, model.days);
    return excess * weighted(model, a, model.spend_mean) * weighted(model, ac, model.spend_mean);
}

Decomposition decompose_total(const StoreModel& model, const IntervalSet& a)
{
    const auto whole = IntervalSet::interval(0.0, model.days);
    const auto za = z_moments(model, a.intersect(whole));
    const auto zac = z_moments(model, a.complement(0.0, model.days));
    const auto z = z_moments(model, whole);
    return {z.mean, za.mean, zac.mean, z.variance, za.variance, zac.variance, z_covariance(model, a)};
}

MeasureSpec store_spec(const StoreModel& model)
{
    model.validate();
    MarkKernel state;
    state.name = "state";
    state.sampler = [probs = model.state_probs](const MarkedPoint& p, Stream& rng) {
        const auto row = probs(p.location().scalar());
        std::discrete_distribution<int> d(row.begin(), row.end());
        return Value::scalar(d(rng));
    };
    state.integrator = [probs = model.state_probs](const MarkedPoint& p, const std::function<double(const Value&)>& h) {
        const auto row = probs(p.location().scalar());
        double acc = 0.0;
        for (std::size_t x = 0; x < row.size(); ++x)
            if (row[x] > 0.0) acc += row[x] * h(Value::scalar(static_cast<double>(x)));
        return acc;
    };

    MarkKernel spend;
    spend.name = "spend-" + to_string(model.spend_law);
    spend.sampler = [mean = model.spend_mean, var = model.spend_var](const MarkedPoint& p, Stream& rng) {
        const auto x = static_cast<std::size_t>(p.mark(0).scalar());
        if (var[x] == 0.0) return Value::scalar(mean[x]);
        std::gamma_distribution<double> g(mean[x] * mean[x] / var[x], var[x] / mean[x]);
        return Value::scalar(g(rng));
    };
    spend.integrator = [mean = model.spend_mean, var = model.spend_var](const MarkedPoint& p,
                                                                        const std::function<double(const Value&)>& h) {
        const auto x = static_cast<std::size_t>(p.mark(0).scalar());
        return gamma_expect(mean[x], var[x], h);
    };

    MeasureSpec spec{model.counting, model.arrivals, {}};
    spec = mark(std::move(spec), std::move(state));
    return mark(std::move(spec), std::move(spend));
}

StoreSimulation simulate_store(const StoreModel& model, const IntervalSet& a, std::size_t n_rep, const McOptions& mc)
{
    if (n_rep == 0) throw DomainError("simulate_store needs at least one replicate");
    const MeasureSpec spec = store_spec(model);
    std::vector<double> za(n_rep), zac(n_rep), z(n_rep);
    StreamFactory streams(mc.seed);
    parallel_for(n_rep, mc.threads, [&](std::size_t i) {
        Stream rng = streams.stream(i);
        const auto pattern = sample_pattern(spec, rng);
        double in = 0.0, out = 0.0;
        for (const auto& p : pattern.points) (a.contains(p.location().scalar()) ? in : out) += p.mark(1).scalar();
        za[i] = in;
        zac[i] = out;
        z[i] = in + out;
    });
    StoreSimulation s;
    s.replicates = n_rep;
    s.mean_z = stats::mean_estimate(z);
    s.mean_a = stats::mean_estimate(za);
    s.mean_ac = stats::mean_estimate(zac);
    if (n_rep > 1) {
        s.var_z = stats::variance_estimate(z);
        s.var_a = stats::variance_estimate(za);
        s.var_ac = stats::variance_estimate(zac);
        s.cov = stats::covariance_estimate(za, zac);
    }
    return s;
}

}  // namespace ptm::compound
