#include "ptm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "ptm/error.hpp"

namespace ptm::stats {

bool Estimate::within(double reference, double k) const
{
    const double diff = std::abs(value - reference);
    if (stderr_ == 0.0)
        return diff <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(reference));
    return diff <= k * stderr_;
}

Estimate mean_estimate(std::span<const double> xs)
{
    RunningMoments m;
    for (double x : xs) m.push(x);
    return {m.mean(), m.stderr_mean()};
}

Estimate variance_estimate(std::span<const double> xs)
{
    const std::size_t n = xs.size();
    if (n < 2) throw DomainError("variance_estimate: need at least two samples");
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    RunningMoments sq;
    for (double x : xs) sq.push((x - mean) * (x - mean));
    const double correction = static_cast<double>(n) / static_cast<double>(n - 1);
    return {sq.mean() * correction, sq.stderr_mean() * correction};
}

Estimate covariance_estimate(std::span<const double> xs, std::span<const double> ys)
{
    const std::size_t n = xs.size();
    if (n != ys.size()) throw DomainError("covariance_estimate: length mismatch");
    if (n < 2) throw DomainError("covariance_estimate: need at least two samples");
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    RunningMoments prod;
    for (std::size_t i = 0; i < n; ++i) prod.push((xs[i] - mx) * (ys[i] - my));
    const double correction = static_cast<double>(n) / static_cast<double>(n - 1);
    return {prod.mean() * correction, prod.stderr_mean() * correction};
}

void RunningMoments::push(double x) noexcept
{
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

double RunningMoments::variance() const noexcept
{
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double RunningMoments::stderr_mean() const noexcept
{
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
}

ChiSquareResult chi_square_gof(std::span<const double> probs,
                               std::span<const std::uint64_t> observed,
                               std::uint64_t n, double level, double min_expected)
{
    if (probs.size() != observed.size()) throw DomainError("chi_square_gof: length mismatch");
    if (n == 0) throw DomainError("chi_square_gof: no draws");
    const double total = static_cast<double>(n);

    struct Cell {
        double expected;
        double observed;
    };
    std::vector<Cell> cells;
    Cell pooled{0.0, 0.0};
    double covered_p = 0.0;
    std::uint64_t covered_n = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        covered_p += probs[i];
        covered_n += observed[i];
        const Cell c{probs[i] * total, static_cast<double>(observed[i])};
        if (c.expected < min_expected) {
            pooled.expected += c.expected;
            pooled.observed += c.observed;
        } else {
            cells.push_back(c);
        }
    }
    pooled.expected += std::max(0.0, 1.0 - covered_p) * total;
    pooled.observed += static_cast<double>(n - std::min(n, covered_n));
    if (pooled.expected > 0.0 || pooled.observed > 0.0) {
        if (pooled.expected < min_expected && !cells.empty()) {
            auto smallest = std::min_element(cells.begin(), cells.end(),
                                             [](const Cell& a, const Cell& b) { return a.expected < b.expected; });
            smallest->expected += pooled.expected;
            smallest->observed += pooled.observed;
        } else {
            cells.push_back(pooled);
        }
    }

    ChiSquareResult r;
    r.cells = cells.size();
    r.dof = static_cast<int>(cells.size()) - 1;
    if (r.dof < 1) {
        // A single cell carries no information; the fit is trivially perfect.
        r.dof = 0;
        return r;
    }
    for (const auto& c : cells) {
        if (c.expected <= 0.0) {
            r.statistic = std::numeric_limits<double>::infinity();
            break;
        }
        const double d = c.observed - c.expected;
        r.statistic += d * d / c.expected;
    }
    boost::math::chi_squared dist(r.dof);
    r.critical = boost::math::quantile(dist, level);
    r.p_value = std::isfinite(r.statistic) ? boost::math::cdf(boost::math::complement(dist, r.statistic)) : 0.0;
    r.pass = r.statistic <= r.critical;
    return r;
}

}  // namespace ptm::stats
