#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ptm/random.hpp"

namespace ptm {

/// Non-negative power series family p_k(theta) = a_k theta^k / g(theta).
///
/// Coefficients come either from a finite list (g is a polynomial and is
/// summed exactly) or from a generator k -> a_k, in which case g is summed
/// until three consecutive terms fall below 1e-15 of the partial sum, with a
/// hard cap of 10^6 terms.
class NnpsFamily {
public:
    using Generator = std::function<double(std::size_t)>;

    static constexpr double kRelativeCutoff = 1e-15;
    static constexpr std::size_t kTermCap = 1'000'000;

    static NnpsFamily from_coeffs(std::vector<double> coeffs, std::string name = "coeffs");
    static NnpsFamily from_generator(Generator gen, double radius, std::string name);

    // a_k = 1: geometric, g = 1/(1-x).
    static NnpsFamily geometric();
    // a_k = 1/k!: Poisson, g = e^x.
    static NnpsFamily exponential();
    // a_k = C(n, k): binomial, g = (1+x)^n.
    static NnpsFamily binomial(int n);
    // a_k = 1/k! + 1/(k-1)!: g = (1+x) e^x, not closed under thinning.
    static NnpsFamily exp_times_linear();

    double coeff(std::size_t k) const;
    bool finite() const noexcept { return !generator_; }
    // Index of the last non-zero coefficient for finite families.
    std::optional<std::size_t> degree() const;
    double radius() const noexcept { return radius_; }
    const std::string& name() const noexcept { return name_; }
    bool canonical() const { return coeff(0) == 1.0; }

    /// g(x) = sum a_k x^k. Throws DivergedSeries.
    double g(double x) const;

    struct Sums {
        double g = 0.0;   // sum a_k x^k
        double dg = 0.0;  // sum k a_k x^k        = x g'(x)
        double d2g = 0.0; // sum k(k-1) a_k x^k   = x^2 g''(x)
    };
    Sums sums(double x) const;

    /// The individual terms a_k x^k up to the truncation point.
    std::vector<double> terms(double x) const;

private:
    NnpsFamily() = default;

    std::vector<double> coeffs_;
    Generator generator_;
    double radius_ = 0.0;
    std::string name_;
};

struct Poisson {
    double lambda;
};

struct Binomial {
    int n;
    double p;
};

/// pmf C(k+r-1, k) theta^k (1-theta)^r; r = 1 is the geometric law.
struct NegativeBinomial {
    double r;
    double theta;
};

struct Nnps {
    std::shared_ptr<const NnpsFamily> family;
    double theta;
    double g_theta;  // cached normaliser
};

enum class PtFamily { Poisson, Binomial, NegativeBinomial };

/// Law of the total count K. Immutable; cheap to copy.
class CountingLaw {
public:
    using Variant = std::variant<Poisson, Binomial, NegativeBinomial, Nnps>;

    static CountingLaw poisson(double lambda);
    static CountingLaw binomial(int n, double p);
    static CountingLaw negative_binomial(double r, double theta);
    static CountingLaw nnps(std::shared_ptr<const NnpsFamily> family, double theta);
    static CountingLaw nnps(NnpsFamily family, double theta);

    /// PT(c, delta^2) parametrisation for a given family. Rejects combinations
    /// the family cannot reach (delta^2 != c for Poisson, delta^2 >= c or
    /// non-integer n for binomial, delta^2 <= c for negative binomial).
    static CountingLaw from_moments(PtFamily family, double mean, double variance);
    /// Picks the family from the sign of delta^2 - c.
    static CountingLaw from_moments(double mean, double variance);

    const Variant& variant() const noexcept { return v_; }
    bool is_pt() const noexcept { return !std::holds_alternative<Nnps>(v_); }
    /// Largest attainable count, if finite.
    std::optional<std::int64_t> support_max() const;
    std::string describe() const;

    friend bool operator==(const CountingLaw& a, const CountingLaw& b);

private:
    explicit CountingLaw(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

struct Moments {
    double mean = 0.0;      // c
    double variance = 0.0;  // delta^2
    /// E K(K-1) = delta^2 + c^2 - c.
    double factorial2() const noexcept { return variance + mean * mean - mean; }
};

/// E t^K for t in [0, 1].
double pgf(const CountingLaw& law, double t);
/// E (1-t)^K, defined as pgf(law, 1 - t).
double apgf(const CountingLaw& law, double t);
double pmf(const CountingLaw& law, std::int64_t k);
Moments moments(const CountingLaw& law);

/// The parameter map h_a of a thinning-closed family: the law of the number
/// of points kept when each is retained independently with probability a.
CountingLaw thin_map(const CountingLaw& law, double a);

std::int64_t sample_count(const CountingLaw& law, Stream& rng);

}  // namespace ptm
