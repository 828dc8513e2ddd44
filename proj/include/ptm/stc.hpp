#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ptm/counting.hpp"
#include "ptm/random.hpp"
#include "ptm/spatial.hpp"
#include "ptm/stats.hpp"

namespace ptm {

/// A location followed by its marks, in kernel order.
struct MarkedPoint {
    std::vector<Value> parts;

    const Value& location() const { return parts.front(); }
    const Value& mark(std::size_t i) const { return parts.at(i + 1); }
    std::size_t arity() const noexcept { return parts.size(); }
    bool cemetery() const noexcept;
};

/// One realisation of the random measure: an exchangeable list of points.
struct PointPattern {
    std::vector<MarkedPoint> points;

    std::size_t count() const noexcept { return points.size(); }
};

using Integrand = std::function<double(const MarkedPoint&)>;

/// A non-negative test function together with the locations (first axis)
/// where it may jump, so quadrature can split there.
struct TestFunction {
    Integrand f;
    std::vector<double> breaks;

    static TestFunction constant(double v);
    static TestFunction indicator(const IntervalSet& a, double weight = 1.0);
    static TestFunction smooth(Integrand f) { return {std::move(f), {}}; }
};

/// Transition kernel Q(x, .) attaching one mark to a (partially marked) point.
///
/// `integrator(prefix, h)` returns the integral of h against the proper part
/// of Q(prefix, .). It may be left empty, in which case analytic routines
/// report AnalyticUnavailable. `defective_mass(prefix)` is the probability of
/// the cemetery mark; an empty function means a proper kernel.
struct MarkKernel {
    using Sampler = std::function<Value(const MarkedPoint&, Stream&)>;
    using Integrator = std::function<double(const MarkedPoint&, const std::function<double(const Value&)>&)>;
    using Defect = std::function<double(const MarkedPoint&)>;

    std::string name;
    Sampler sampler;
    Integrator integrator;
    Defect defective_mass;
};

/// N = (kappa, nu) possibly marked by kernels applied left to right.
struct MeasureSpec {
    CountingLaw counting;
    SpatialLaw spatial;
    std::vector<MarkKernel> marks;
};

enum class CemeteryPolicy {
    Skip,   // f is taken as 0 on tuples containing the cemetery
    Strict  // f is evaluated on every tuple
};

PointPattern sample_pattern(const MeasureSpec& spec, Stream& rng);

/// Nf = sum of f over the points of the pattern.
double integrate(const PointPattern& pattern, const Integrand& f, CemeteryPolicy policy = CemeteryPolicy::Skip);

/// N_A: thinned counting law and conditional location law; marks unchanged.
MeasureSpec restrict(const MeasureSpec& spec, const IntervalSet& a);

MeasureSpec mark(MeasureSpec spec, MarkKernel kernel);

/// Integral of h against the mean law nu x Q_1 x ... x Q_m. h is evaluated on
/// every tuple, cemetery ones included.
double mean_law_integral(const MeasureSpec& spec, const TestFunction& h);

/// E exp(-Nf) = psi(nu e^{-f}), with marks folded in through the kernels.
double laplace_analytic(const MeasureSpec& spec, const TestFunction& f);

/// Monte Carlo mean of exp(-Nf) over n_rep patterns; replicate i uses stream i.
stats::Estimate laplace_mc(const MeasureSpec& spec, const Integrand& f, std::size_t n_rep, const McOptions& mc);

struct FunctionalMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// E Nf = c nu f and Var Nf = c nu f^2 + (delta^2 - c)(nu f)^2.
FunctionalMoments moments_analytic(const MeasureSpec& spec, const TestFunction& f);

/// Cov(N(A), N(B)) = (delta^2 - c) nu(A) nu(B) for disjoint A, B.
double pair_covariance_analytic(const MeasureSpec& spec, const IntervalSet& a, const IntervalSet& b);

/// Counts per cell of a partition of the location axis. Cells must be
/// pairwise disjoint and cover every point of the pattern.
std::vector<std::int64_t> partition_counts(const PointPattern& pattern, std::span<const IntervalSet> cells);

/// As above, and additionally checks that the cells carry all of nu's mass.
std::vector<std::int64_t> partition_counts(const PointPattern& pattern, std::span<const IntervalSet> cells,
                                           const SpatialLaw& law);

/// P(N(A_1) = i_1, ..., N(A_m) = i_m) = k!/(i_1!...i_m!) prod nu(A_j)^{i_j} P(K = k).
double joint_pmf(const CountingLaw& law, std::span<const double> masses, std::span<const std::int64_t> counts);

}  // namespace ptm
