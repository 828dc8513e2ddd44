#include "ptm/stc.hpp"

#include <algorithm>
#include <cmath>

#include "ptm/error.hpp"

namespace ptm {

namespace {

double expect_marks(const MeasureSpec& spec, std::size_t level, const MarkedPoint& prefix, const Integrand& h)
{
    if (level == spec.marks.size()) return h(prefix);
    if (prefix.cemetery()) {
        MarkedPoint next = prefix;
        next.parts.push_back(Value::dead());
        return expect_marks(spec, level + 1, next, h);
    }
    const MarkKernel& k = spec.marks[level];
    if (!k.integrator) throw AnalyticUnavailable("mark kernel '" + k.name + "' has no integrator");
    double total = k.integrator(prefix, [&](const Value& y) {
        MarkedPoint next = prefix;
        next.parts.push_back(y);
        return expect_marks(spec, level + 1, next, h);
    });
    const double defect = k.defective_mass ? k.defective_mass(prefix) : 0.0;
    if (defect > 0.0) {
        MarkedPoint next = prefix;
        next.parts.push_back(Value::dead());
        total += defect * expect_marks(spec, level + 1, next, h);
    }
    return total;
}

Integrand with_policy(const Integrand& f, CemeteryPolicy policy)
{
    if (policy == CemeteryPolicy::Strict) return f;
    return [f](const MarkedPoint& p) { return p.cemetery() ? 0.0 : f(p); };
}

}  // namespace

bool MarkedPoint::cemetery() const noexcept
{
    return std::any_of(parts.begin(), parts.end(), [](const Value& v) { return v.cemetery; });
}

TestFunction TestFunction::constant(double v)
{
    return {[v](const MarkedPoint&) { return v; }, {}};
}

TestFunction TestFunction::indicator(const IntervalSet& a, double weight)
{
    return {[a, weight](const MarkedPoint& p) { return a.contains(p.location().x[0]) ? weight : 0.0; },
            a.breakpoints()};
}

PointPattern sample_pattern(const MeasureSpec& spec, Stream& rng)
{
    PointPattern out;
    const std::int64_t k = sample_count(spec.counting, rng);
    out.points.reserve(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < k; ++i) {
        MarkedPoint p;
        p.parts.reserve(1 + spec.marks.size());
        p.parts.push_back(spec.spatial.sample(rng));
        for (const auto& kernel : spec.marks) {
            if (p.cemetery())
                p.parts.push_back(Value::dead());
            else
                p.parts.push_back(kernel.sampler(p, rng));
        }
        out.points.push_back(std::move(p));
    }
    return out;
}

double integrate(const PointPattern& pattern, const Integrand& f, CemeteryPolicy policy)
{
    double acc = 0.0;
    for (const auto& p : pattern.points) {
        if (policy == CemeteryPolicy::Skip && p.cemetery()) continue;
        acc += f(p);
    }
    return acc;
}

MeasureSpec restrict(const MeasureSpec& spec, const IntervalSet& a)
{
    if (!spec.counting.is_pt())
        throw UnsupportedFamily("restriction keeps the family only for Poisson, binomial and negative binomial laws");
    const double mass = spec.spatial.mass(a);
    if (!(mass > 0.0)) throw NullRestriction("restriction set " + a.describe() + " has zero mass");
    if (mass == 1.0) return spec;
    MeasureSpec out = spec;
    out.counting = thin_map(spec.counting, mass);
    out.spatial = spec.spatial.conditioned_on(a);
    return out;
}

MeasureSpec mark(MeasureSpec spec, MarkKernel kernel)
{
    if (!kernel.sampler) throw DomainError("mark kernel '" + kernel.name + "' has no sampler");
    spec.marks.push_back(std::move(kernel));
    return spec;
}

double mean_law_integral(const MeasureSpec& spec, const TestFunction& h)
{
    return spec.spatial.integrate(
        [&](const Value& x) {
            MarkedPoint p;
            p.parts.push_back(x);
            return expect_marks(spec, 0, p, h.f);
        },
        h.breaks);
}

double laplace_analytic(const MeasureSpec& spec, const TestFunction& f)
{
    const Integrand eff = with_policy(f.f, CemeteryPolicy::Skip);
    const double s = mean_law_integral(spec, {[&](const MarkedPoint& p) { return std::exp(-eff(p)); }, f.breaks});
    if (!std::isfinite(s)) throw NumericError("quadrature of exp(-f) is not finite");
    return pgf(spec.counting, std::clamp(s, 0.0, 1.0));
}

stats::Estimate laplace_mc(const MeasureSpec& spec, const Integrand& f, std::size_t n_rep, const McOptions& mc)
{
    if (n_rep < 100) throw DomainError("laplace_mc needs at least 100 replicates");
    StreamFactory streams(mc.seed);
    std::vector<double> values(n_rep);
    parallel_for(n_rep, mc.threads, [&](std::size_t i) {
        Stream rng = streams.stream(i);
        values[i] = std::exp(-integrate(sample_pattern(spec, rng), f));
    });
    return stats::mean_estimate(values);
}

FunctionalMoments moments_analytic(const MeasureSpec& spec, const TestFunction& f)
{
    const Integrand eff = with_policy(f.f, CemeteryPolicy::Skip);
    const double m1 = mean_law_integral(spec, {eff, f.breaks});
    const double m2 = mean_law_integral(spec, {[&](const MarkedPoint& p) {
                                                   const double v = eff(p);
                                                   return v * v;
                                               },
                                               f.breaks});
    if (!std::isfinite(m1) || !std::isfinite(m2)) throw NumericError("quadrature of f or f^2 is not finite");
    const Moments k = moments(spec.counting);
    return {k.mean * m1, k.mean * m2 + (k.variance - k.mean) * m1 * m1};
}

double pair_covariance_analytic(const MeasureSpec& spec, const IntervalSet& a, const IntervalSet& b)
{
    if (!a.disjoint(b)) throw DisjointnessError("sets " + a.describe() + " and " + b.describe() + " overlap");
    const Moments k = moments(spec.counting);
    return (k.variance - k.mean) * spec.spatial.mass(a) * spec.spatial.mass(b);
}

std::vector<std::int64_t> partition_counts(const PointPattern& pattern, std::span<const IntervalSet> cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = i + 1; j < cells.size(); ++j)
            if (!cells[i].disjoint(cells[j])) throw PartitionError("partition cells overlap");
    std::vector<std::int64_t> counts(cells.size(), 0);
    for (const auto& p : pattern.points) {
        const double x = p.location().x[0];
        auto it = std::find_if(cells.begin(), cells.end(), [x](const IntervalSet& c) { return c.contains(x); });
        if (it == cells.end()) throw PartitionError("partition does not cover location " + std::to_string(x));
        ++counts[static_cast<std::size_t>(it - cells.begin())];
    }
    return counts;
}

std::vector<std::int64_t> partition_counts(const PointPattern& pattern, std::span<const IntervalSet> cells,
                                           const SpatialLaw& law)
{
    IntervalSet all;
    for (const auto& c : cells) all = all.unite(c);
    if (law.mass(all) < 1.0 - 1e-12) throw PartitionError("partition does not cover the support of the law");
    return partition_counts(pattern, cells);
}

double joint_pmf(const CountingLaw& law, std::span<const double> masses, std::span<const std::int64_t> counts)
{
    if (masses.size() != counts.size()) throw DomainError("joint_pmf: one count per cell required");
    double total_mass = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0)) throw DomainError("joint_pmf: masses must be non-negative");
        total_mass += m;
    }
    if (total_mass > 1.0 + 1e-12) throw DomainError("joint_pmf: masses sum above 1");

    std::int64_t k = 0;
    double log_multi = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0) return 0.0;
        if (counts[i] == 0) continue;
        if (masses[i] == 0.0) return 0.0;
        k += counts[i];
        log_multi += static_cast<double>(counts[i]) * std::log(masses[i]) - std::lgamma(counts[i] + 1.0);
    }
    const double rest = std::max(0.0, 1.0 - total_mass);
    if (rest <= 1e-12) return std::exp(log_multi + std::lgamma(k + 1.0)) * pmf(law, k);

    // Cells that do not cover the space: marginalise over the unlisted remainder.
    double below = 0.0;
    for (std::int64_t i = 0; i < k; ++i) below += pmf(law, i);
    const auto cap = law.support_max();
    double acc = 0.0;
    double seen = below;
    for (std::int64_t j = 0; j < 10'000'000; ++j) {
        if (cap && k + j > *cap) break;
        const double pk = pmf(law, k + j);
        seen += pk;
        if (pk > 0.0) {
            const double log_term = log_multi + std::lgamma(k + j + 1.0) - std::lgamma(j + 1.0) +
                                    static_cast<double>(j) * std::log(rest);
            acc += std::exp(log_term) * pk;
        }
        if (seen >= 1.0 - 1e-14) break;
    }
    return acc;
}

}  // namespace ptm
