#include "ptm/counting.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include "ptm/error.hpp"

namespace ptm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_finite(double v, const char* what)
{
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

bool quiet(double term, double partial)
{
    return std::abs(term) <= NnpsFamily::kRelativeCutoff * std::abs(partial);
}

[[noreturn]] void diverged(const NnpsFamily& fam, double x)
{
    std::ostringstream os;
    os << "power series '" << fam.name() << "' did not converge at x=" << x << " within "
       << NnpsFamily::kTermCap << " terms";
    throw DivergedSeries(os.str());
}

}  // namespace

NnpsFamily NnpsFamily::from_coeffs(std::vector<double> coeffs, std::string name)
{
    if (coeffs.empty()) throw DomainError("NNPS coefficient list is empty");
    for (double a : coeffs) {
        require_finite(a, "NNPS coefficient");
        if (a < 0.0) throw DomainError("NNPS coefficients must be non-negative");
    }
    if (coeffs[0] <= 0.0) throw DomainError("NNPS requires a_0 > 0 so that p_0 > 0");
    NnpsFamily f;
    f.coeffs_ = std::move(coeffs);
    f.radius_ = std::numeric_limits<double>::infinity();
    f.name_ = std::move(name);
    return f;
}

NnpsFamily NnpsFamily::from_generator(Generator gen, double radius, std::string name)
{
    if (!gen) throw DomainError("NNPS generator is empty");
    if (!(radius > 0.0)) throw DomainError("NNPS radius must be positive");
    if (!(gen(0) > 0.0)) throw DomainError("NNPS requires a_0 > 0 so that p_0 > 0");
    NnpsFamily f;
    f.generator_ = std::move(gen);
    f.radius_ = radius;
    f.name_ = std::move(name);
    return f;
}

NnpsFamily NnpsFamily::geometric()
{
    return from_generator([](std::size_t) { return 1.0; }, 1.0, "geometric");
}

NnpsFamily NnpsFamily::exponential()
{
    return from_generator([](std::size_t k) { return std::exp(-std::lgamma(static_cast<double>(k) + 1.0)); },
                          std::numeric_limits<double>::infinity(), "exponential");
}

NnpsFamily NnpsFamily::binomial(int n)
{
    if (n < 1) throw DomainError("binomial NNPS needs n >= 1");
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) c[static_cast<std::size_t>(k)] = boost::math::binomial_coefficient<double>(n, k);
    return from_coeffs(std::move(c), "binomial(" + std::to_string(n) + ")");
}

NnpsFamily NnpsFamily::exp_times_linear()
{
    return from_generator(
        [](std::size_t k) {
            const double kk = static_cast<double>(k);
            const double a = std::exp(-std::lgamma(kk + 1.0));
            return k == 0 ? a : a + std::exp(-std::lgamma(kk));
        },
        std::numeric_limits<double>::infinity(), "exp_times_linear");
}

double NnpsFamily::coeff(std::size_t k) const
{
    if (generator_) return generator_(k);
    return k < coeffs_.size() ? coeffs_[k] : 0.0;
}

std::optional<std::size_t> NnpsFamily::degree() const
{
    if (generator_) return std::nullopt;
    std::size_t d = coeffs_.size() - 1;
    while (d > 0 && coeffs_[d] == 0.0) --d;
    return d;
}

NnpsFamily::Sums NnpsFamily::sums(double x) const
{
    Sums s;
    if (!generator_) {
        double xk = 1.0;
        for (std::size_t k = 0; k < coeffs_.size(); ++k) {
            const double term = coeffs_[k] * xk;
            const double kk = static_cast<double>(k);
            s.g += term;
            s.dg += kk * term;
            s.d2g += kk * (kk - 1.0) * term;
            xk *= x;
        }
        return s;
    }
    int run = 0;
    double xk = 1.0;
    for (std::size_t k = 0; k < kTermCap; ++k) {
        const double term = generator_(k) * xk;
        const double kk = static_cast<double>(k);
        s.g += term;
        s.dg += kk * term;
        s.d2g += kk * (kk - 1.0) * term;
        if (!std::isfinite(s.g) || !std::isfinite(s.d2g)) diverged(*this, x);
        if (k >= 1 && quiet(term, s.g) && quiet(kk * term, s.dg) && quiet(kk * (kk - 1.0) * term, s.d2g)) {
            if (++run == 3) return s;
        } else {
            run = 0;
        }
        xk *= x;
    }
    diverged(*this, x);
}

double NnpsFamily::g(double x) const
{
    if (!generator_) {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
        return acc;
    }
    double sum = 0.0;
    double xk = 1.0;
    int run = 0;
    for (std::size_t k = 0; k < kTermCap; ++k) {
        const double term = generator_(k) * xk;
        sum += term;
        if (!std::isfinite(sum)) diverged(*this, x);
        if (k >= 1 && quiet(term, sum)) {
            if (++run == 3) return sum;
        } else {
            run = 0;
        }
        xk *= x;
    }
    diverged(*this, x);
}

std::vector<double> NnpsFamily::terms(double x) const
{
    std::vector<double> out;
    if (!generator_) {
        double xk = 1.0;
        for (double a : coeffs_) {
            out.push_back(a * xk);
            xk *= x;
        }
        return out;
    }
    double sum = 0.0;
    double xk = 1.0;
    int run = 0;
    for (std::size_t k = 0; k < kTermCap; ++k) {
        const double term = generator_(k) * xk;
        out.push_back(term);
        sum += term;
        if (!std::isfinite(sum)) diverged(*this, x);
        if (k >= 1 && quiet(term, sum)) {
            if (++run == 3) return out;
        } else {
            run = 0;
        }
        xk *= x;
    }
    diverged(*this, x);
}

CountingLaw CountingLaw::poisson(double lambda)
{
    require_finite(lambda, "Poisson lambda");
    if (!(lambda > 0.0)) throw DomainError("Poisson lambda must be > 0");
    return CountingLaw(Poisson{lambda});
}

CountingLaw CountingLaw::binomial(int n, double p)
{
    if (n < 1) throw DomainError("binomial n must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("binomial p must lie in (0, 1)");
    return CountingLaw(Binomial{n, p});
}

CountingLaw CountingLaw::negative_binomial(double r, double theta)
{
    require_finite(r, "negative binomial r");
    if (!(r > 0.0)) throw DomainError("negative binomial r must be > 0");
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("negative binomial theta must lie in (0, 1)");
    return CountingLaw(NegativeBinomial{r, theta});
}

CountingLaw CountingLaw::nnps(std::shared_ptr<const NnpsFamily> family, double theta)
{
    if (!family) throw DomainError("NNPS family is null");
    require_finite(theta, "NNPS theta");
    if (!(theta > 0.0)) throw DomainError("NNPS theta must be > 0");
    const double g = family->g(theta);
    if (!(g > 0.0) || !std::isfinite(g)) throw DivergedSeries("NNPS normaliser g(theta) is not finite");
    Nnps v{std::move(family), theta, g};
    CountingLaw law(std::move(v));
    const Moments m = moments(law);
    if (!(m.variance > 0.0) || !std::isfinite(m.variance))
        throw DomainError("NNPS law must have finite positive variance");
    return law;
}

CountingLaw CountingLaw::nnps(NnpsFamily family, double theta)
{
    return nnps(std::make_shared<const NnpsFamily>(std::move(family)), theta);
}

CountingLaw CountingLaw::from_moments(PtFamily family, double c, double d2)
{
    require_finite(c, "mean");
    require_finite(d2, "variance");
    if (!(c > 0.0)) throw DomainError("PT mean must be > 0");
    if (!(d2 > 0.0)) throw DomainError("PT variance must be > 0");
    switch (family) {
    case PtFamily::Poisson:
        if (std::abs(d2 - c) > 1e-12 * c) throw DomainError("Poisson requires variance == mean");
        return poisson(c);
    case PtFamily::Binomial: {
        if (d2 >= c) throw DomainError("binomial requires variance < mean");
        const double p = 1.0 - d2 / c;
        const double n = c / p;
        const double rounded = std::round(n);
        if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n) || rounded < 1.0)
            throw DomainError("binomial (mean, variance) gives non-integer n");
        return binomial(static_cast<int>(rounded), c / rounded);
    }
    case PtFamily::NegativeBinomial: {
        if (d2 <= c) throw DomainError("negative binomial requires variance > mean");
        return negative_binomial(c * c / (d2 - c), 1.0 - c / d2);
    }
    }
    throw DomainError("unknown PT family");
}

CountingLaw CountingLaw::from_moments(double c, double d2)
{
    require_finite(c, "mean");
    if (std::abs(d2 - c) <= 1e-12 * std::abs(c)) return from_moments(PtFamily::Poisson, c, c);
    return from_moments(d2 < c ? PtFamily::Binomial : PtFamily::NegativeBinomial, c, d2);
}

std::optional<std::int64_t> CountingLaw::support_max() const
{
    return std::visit(overloaded{
                          [](const Binomial& b) -> std::optional<std::int64_t> { return b.n; },
                          [](const Nnps& s) -> std::optional<std::int64_t> {
                              if (auto d = s.family->degree()) return static_cast<std::int64_t>(*d);
                              return std::nullopt;
                          },
                          [](const auto&) -> std::optional<std::int64_t> { return std::nullopt; },
                      },
                      v_);
}

std::string CountingLaw::describe() const
{
    std::ostringstream os;
    os.precision(17);
    std::visit(overloaded{
                   [&](const Poisson& p) { os << "Poisson(lambda=" << p.lambda << ")"; },
                   [&](const Binomial& b) { os << "Binomial(n=" << b.n << ", p=" << b.p << ")"; },
                   [&](const NegativeBinomial& nb) {
                       os << "NegativeBinomial(r=" << nb.r << ", theta=" << nb.theta << ")";
                   },
                   [&](const Nnps& s) { os << "Nnps(" << s.family->name() << ", theta=" << s.theta << ")"; },
               },
               v_);
    return os.str();
}

bool operator==(const CountingLaw& a, const CountingLaw& b)
{
    if (a.v_.index() != b.v_.index()) return false;
    return std::visit(overloaded{
                          [&](const Poisson& x) { return x.lambda == std::get<Poisson>(b.v_).lambda; },
                          [&](const Binomial& x) {
                              const auto& y = std::get<Binomial>(b.v_);
                              return x.n == y.n && x.p == y.p;
                          },
                          [&](const NegativeBinomial& x) {
                              const auto& y = std::get<NegativeBinomial>(b.v_);
                              return x.r == y.r && x.theta == y.theta;
                          },
                          [&](const Nnps& x) {
                              const auto& y = std::get<Nnps>(b.v_);
                              return x.family == y.family && x.theta == y.theta;
                          },
                      },
                      a.v_);
}

double pgf(const CountingLaw& law, double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("pgf argument must lie in [0, 1]");
    return std::visit(overloaded{
                          [&](const Poisson& p) { return std::exp(p.lambda * (t - 1.0)); },
                          [&](const Binomial& b) { return std::pow(1.0 - b.p * (1.0 - t), b.n); },
                          [&](const NegativeBinomial& nb) {
                              return std::pow((1.0 - nb.theta) / (1.0 - nb.theta * t), nb.r);
                          },
                          [&](const Nnps& s) { return t == 1.0 ? 1.0 : s.family->g(s.theta * t) / s.g_theta; },
                      },
                      law.variant());
}

double apgf(const CountingLaw& law, double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("apgf argument must lie in [0, 1]");
    return pgf(law, 1.0 - t);
}

double pmf(const CountingLaw& law, std::int64_t k)
{
    if (k < 0) return 0.0;
    const double kk = static_cast<double>(k);
    return std::visit(overloaded{
                          [&](const Poisson& p) {
                              return boost::math::pdf(boost::math::poisson_distribution<>(p.lambda), kk);
                          },
                          [&](const Binomial& b) {
                              if (k > b.n) return 0.0;
                              return boost::math::pdf(boost::math::binomial_distribution<>(b.n, b.p), kk);
                          },
                          [&](const NegativeBinomial& nb) {
                              return boost::math::pdf(
                                  boost::math::negative_binomial_distribution<>(nb.r, 1.0 - nb.theta), kk);
                          },
                          [&](const Nnps& s) {
                              const double a = s.family->coeff(static_cast<std::size_t>(k));
                              if (a == 0.0) return 0.0;
                              return std::exp(std::log(a) + kk * std::log(s.theta) - std::log(s.g_theta));
                          },
                      },
                      law.variant());
}

Moments moments(const CountingLaw& law)
{
    return std::visit(overloaded{
                          [](const Poisson& p) { return Moments{p.lambda, p.lambda}; },
                          [](const Binomial& b) { return Moments{b.n * b.p, b.n * b.p * (1.0 - b.p)}; },
                          [](const NegativeBinomial& nb) {
                              const double q = 1.0 - nb.theta;
                              return Moments{nb.r * nb.theta / q, nb.r * nb.theta / (q * q)};
                          },
                          [](const Nnps& s) {
                              const auto sums = s.family->sums(s.theta);
                              const double c = sums.dg / sums.g;
                              const double fact2 = sums.d2g / sums.g;
                              return Moments{c, fact2 + c - c * c};
                          },
                      },
                      law.variant());
}

CountingLaw thin_map(const CountingLaw& law, double a)
{
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("thinning fraction must lie in (0, 1]");
    if (!law.is_pt()) throw UnsupportedFamily("thin_map is defined only for Poisson, binomial and negative binomial laws");
    if (a == 1.0) return law;
    return std::visit(overloaded{
                          [&](const Poisson& p) { return CountingLaw::poisson(a * p.lambda); },
                          [&](const Binomial& b) { return CountingLaw::binomial(b.n, a * b.p); },
                          [&](const NegativeBinomial& nb) {
                              return CountingLaw::negative_binomial(nb.r,
                                                                    a * nb.theta / (1.0 - (1.0 - a) * nb.theta));
                          },
                          [&](const Nnps&) -> CountingLaw { throw UnsupportedFamily("unreachable"); },
                      },
                      law.variant());
}

std::int64_t sample_count(const CountingLaw& law, Stream& rng)
{
    return std::visit(overloaded{
                          [&](const Poisson& p) {
                              return std::poisson_distribution<std::int64_t>(p.lambda)(rng);
                          },
                          [&](const Binomial& b) {
                              return std::binomial_distribution<std::int64_t>(b.n, b.p)(rng);
                          },
                          [&](const NegativeBinomial& nb) -> std::int64_t {
                              // Gamma-Poisson mixture handles non-integer r.
                              const double rate =
                                  std::gamma_distribution<double>(nb.r, nb.theta / (1.0 - nb.theta))(rng);
                              if (!(rate > 0.0)) return 0;
                              return std::poisson_distribution<std::int64_t>(rate)(rng);
                          },
                          [&](const Nnps& s) -> std::int64_t {
                              // Inversion by accumulating a_k theta^k against u * g(theta).
                              const double u = uniform_open(rng) * s.g_theta;
                              const auto& fam = *s.family;
                              const std::size_t cap = fam.degree().value_or(NnpsFamily::kTermCap - 1);
                              double cum = 0.0;
                              double xk = 1.0;
                              std::int64_t last_positive = 0;
                              int run = 0;
                              for (std::size_t k = 0; k <= cap; ++k) {
                                  const double term = fam.coeff(k) * xk;
                                  if (term > 0.0) last_positive = static_cast<std::int64_t>(k);
                                  cum += term;
                                  if (cum >= u) return static_cast<std::int64_t>(k);
                                  run = (k >= 1 && quiet(term, cum)) ? run + 1 : 0;
                                  if (run == 3) break;  // u fell in the rounding gap of the tail
                                  xk *= s.theta;
                              }
                              return last_positive;
                          },
                      },
                      law.variant());
}

}  // namespace ptm
