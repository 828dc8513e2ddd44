#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ptm::stats {

/// Sample mean with its standard error.
struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;

    /// |value - reference| <= k * stderr. A zero stderr demands exact equality
    /// up to a few ulps of the reference.
    bool within(double reference, double k = 4.0) const;
};

Estimate mean_estimate(std::span<const double> xs);

/// Unbiased sample variance; the standard error uses the delta method on the
/// squared deviations.
Estimate variance_estimate(std::span<const double> xs);

/// Sample covariance; the standard error is that of the mean of centred products.
Estimate covariance_estimate(std::span<const double> xs, std::span<const double> ys);

/// Welford accumulator, for streaming use where samples are not kept.
class RunningMoments {
public:
    void push(double x) noexcept;
    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept;
    double stderr_mean() const noexcept;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
    double critical = 0.0;  // upper quantile at the requested level
    bool pass = true;
    std::size_t cells = 0;
};

/// Pearson goodness-of-fit over arbitrary cells.
///
/// probs[i] is the model probability of cell i and observed[i] its count out
/// of n draws. Any probability mass not covered by the cells (and any draws
/// not counted in them) forms an implicit remainder cell. Cells with expected
/// count below min_expected are pooled into one cell before testing.
ChiSquareResult chi_square_gof(std::span<const double> probs,
                               std::span<const std::uint64_t> observed,
                               std::uint64_t n,
                               double level = 0.99,
                               double min_expected = 5.0);

/// Convenience wrapper for a count variable: histogram of `draws` against
/// pmf(k) for k = 0..max_k.
template <class Pmf>
ChiSquareResult chi_square_counts(std::span<const std::int64_t> draws, Pmf&& pmf,
                                  double level = 0.99)
{
    std::int64_t max_k = 0;
    for (auto k : draws) max_k = k > max_k ? k : max_k;
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(max_k) + 1, 0);
    for (auto k : draws) ++hist[static_cast<std::size_t>(k)];
    std::vector<double> probs(hist.size());
    for (std::size_t k = 0; k < hist.size(); ++k) probs[k] = pmf(static_cast<std::int64_t>(k));
    return chi_square_gof(probs, hist, draws.size(), level);
}

}  // namespace ptm::stats
