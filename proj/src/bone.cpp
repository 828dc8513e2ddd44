#include "ptm/bone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/binomial.hpp>

#include "ptm/error.hpp"

namespace ptm {

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kBisectionTol = 1e-14;

double central_diff(const std::function<double(double)>& f, double s)
{
    const double h = kFdStep * std::max(1.0, std::abs(s));
    return (f(s + h) - f(s - h)) / (2.0 * h);
}

struct LogFit {
    double A = 0.0;
    double B = 0.0;
    double max_err = std::numeric_limits<double>::infinity();
};

// Gauss-Newton for f(s) ~ B log(1 + A s), started from the slope of 1/h(s) - 1 = A s.
LogFit fit_log(std::span<const double> s, std::span<const double> fs, std::span<const double> hs, double d0)
{
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        num += (1.0 / hs[i] - 1.0) * s[i];
        den += s[i] * s[i];
    }
    LogFit fit;
    fit.A = num / den;
    if (fit.A == 0.0) return fit;
    fit.B = d0 / fit.A;

    auto max_err = [&](double A, double B) {
        double e = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double arg = 1.0 + A * s[i];
            if (!(arg > 0.0)) return std::numeric_limits<double>::infinity();
            e = std::max(e, std::abs(fs[i] - B * std::log(arg)));
        }
        return e;
    };

    for (int iter = 0; iter < 50; ++iter) {
        // Normal equations of the 2x2 linearised least-squares problem.
        double jaa = 0.0, jab = 0.0, jbb = 0.0, ra = 0.0, rb = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double arg = 1.0 + fit.A * s[i];
            if (!(arg > 0.0)) {
                ok = false;
                break;
            }
            const double l = std::log(arg);
            const double da = fit.B * s[i] / arg;
            const double db = l;
            const double r = fs[i] - fit.B * l;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ra += da * r;
            rb += db * r;
        }
        if (!ok) break;
        const double det = jaa * jbb - jab * jab;
        if (!(std::abs(det) > 0.0)) break;
        const double stepA = (jbb * ra - jab * rb) / det;
        const double stepB = (jaa * rb - jab * ra) / det;
        double lambda = 1.0;
        const double before = max_err(fit.A, fit.B);
        while (lambda > 1e-6 && max_err(fit.A + lambda * stepA, fit.B + lambda * stepB) > before) lambda *= 0.5;
        if (lambda <= 1e-6) break;
        fit.A += lambda * stepA;
        fit.B += lambda * stepB;
        if (std::abs(stepA) <= 1e-15 * std::abs(fit.A) && std::abs(stepB) <= 1e-15 * std::abs(fit.B)) break;
    }
    fit.max_err = max_err(fit.A, fit.B);
    return fit;
}

}  // namespace

std::string to_string(BoneClass c)
{
    switch (c) {
    case BoneClass::LinearLog: return "LinearLog";
    case BoneClass::PositiveLog: return "PositiveLog";
    case BoneClass::NegativeLog: return "NegativeLog";
    case BoneClass::NotBone: return "NotBone";
    }
    return "unknown";
}

std::vector<double> uniform_grid(int n, double lo, double hi)
{
    if (n < 2) throw DomainError("grid needs at least two points");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    g.back() = hi;
    return g;
}

std::vector<double> log_grid(double lo, double hi, int n)
{
    if (!(lo > 0.0 && hi > lo) || n < 2) throw DomainError("log grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double r = std::log(hi / lo);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(r * i / (n - 1));
    g.back() = hi;
    return g;
}

double bone_residual(const CountingLaw& law, double a, std::span<const double> t_grid)
{
    const CountingLaw mapped = thin_map(law, a);
    double worst = 0.0;
    for (double t : t_grid) {
        worst = std::max(worst, std::abs(pgf(law, a * t + (1.0 - a)) - pgf(mapped, t)));
        worst = std::max(worst, std::abs(apgf(law, a * t) - apgf(mapped, t)));
    }
    return worst;
}

double nnps_tolerance(const NnpsFamily& family)
{
    return family.finite() ? 1e-10 : 1e-6;
}

BoneVerdict nnps_bone_test(const NnpsFamily& family, double theta, double a, std::span<const double> t_grid)
{
    if (family.coeff(0) != 1.0) throw HypothesisViolation("family is not canonical: a_0 != 1");
    if (!(family.coeff(1) > 0.0)) throw HypothesisViolation("classification needs a_1 > 0");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");
    if (!(a > 0.0 && a < 1.0)) throw DomainError("thinning fraction must lie in (0, 1)");

    BoneVerdict v;
    v.tolerance = nnps_tolerance(family);
    const double b = 1.0 - a;
    const double g_theta = family.g(theta);
    const double g_b = family.g(b * theta);
    const double target = g_theta / g_b;

    // g(0) = 1 <= target <= g(theta) because g(b theta) >= 1, so h lies in [0, theta].
    double lo = 0.0;
    double hi = theta;
    if (!(family.g(hi) >= target) || !(target >= 1.0)) {
        v.max_residual = std::numeric_limits<double>::infinity();
        v.notes = "no h solves g(theta) = g(b theta) g(h) on [0, theta]";
        return v;
    }
    while (hi - lo > kBisectionTol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (family.g(mid) < target ? lo : hi) = mid;
    }
    const double h = 0.5 * (lo + hi);
    v.h = h;

    double worst = 0.0;
    for (double t : t_grid) {
        const double lhs = family.g((a * t + b) * theta);
        const double rhs = g_b * family.g(h * t);
        worst = std::max(worst, std::abs(lhs - rhs) / g_theta);
    }
    v.max_residual = worst;
    if (!(worst <= v.tolerance)) {
        std::ostringstream os;
        os << "bone equation fails: residual " << worst << " exceeds " << v.tolerance;
        v.notes = os.str();
        return v;
    }

    // log g satisfies the modified Cauchy equation; fit its shape where the series is comfortably convergent.
    const auto s_grid = log_grid(1e-3 * theta, 0.5 * theta, 50);
    const BoneVerdict shape = cauchy_classify([&](double x) { return std::log(family.g(x)); }, s_grid);
    v.A = shape.A;
    v.B = shape.B;
    std::ostringstream os;
    os.precision(17);
    if (shape.classification == BoneClass::LinearLog) {
        v.classification = BoneClass::LinearLog;
        os << "log g(x) = A x with A=" << *shape.A;
    } else if (shape.classification == BoneClass::NotBone) {
        v.classification = BoneClass::NotBone;
        v.A.reset();
        v.B.reset();
        os << "bone residual within tolerance but log g failed the functional-equation check: " << shape.notes;
    } else {
        const bool binomial_like = *shape.A > 0.0;
        v.classification = binomial_like ? BoneClass::NegativeLog : BoneClass::PositiveLog;
        os << "log g(x) = B log(1 + A x) with A=" << *shape.A << ", B=" << *shape.B << "; sign(A) "
           << (binomial_like ? "> 0: binomial-like" : "< 0: negative-binomial-like, radius 1/|A|");
        if (binomial_like && !family.degree()) os << " (series has no finite degree; B should be a positive integer)";
    }
    v.notes = os.str();
    return v;
}

BoneVerdict cauchy_classify(const std::function<double(double)>& f, std::span<const double> s_grid,
                            double tolerance)
{
    if (s_grid.empty()) throw DomainError("s grid is empty");
    for (double s : s_grid)
        if (!(s > 0.0)) throw DomainError("s grid must be positive");
    const double f0 = f(0.0);
    if (!(std::abs(f0) <= 1e-12)) throw HypothesisViolation("f(0) must be 0");
    const double d0 = central_diff(f, 0.0);
    if (!(d0 > 1e-8)) throw HypothesisViolation("f'(0) must be positive");

    const std::size_t n = s_grid.size();
    std::vector<double> fs(n), hs(n);
    for (std::size_t i = 0; i < n; ++i) {
        fs[i] = f(s_grid[i]);
        hs[i] = central_diff(f, s_grid[i]) / d0;
    }

    BoneVerdict v;
    v.tolerance = tolerance;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double s = s_grid[i];
            const double t = s_grid[j];
            worst = std::max(worst, std::abs(f(s + t) - fs[i] - f(hs[i] * t)));
        }
    v.max_residual = worst;
    if (!(worst <= tolerance)) {
        std::ostringstream os;
        os << "f(s+t) - f(s) - f(h(s) t) reaches " << worst;
        v.notes = os.str();
        return v;
    }

    double num = 0.0;
    double den = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += fs[i] * s_grid[i];
        den += s_grid[i] * s_grid[i];
        scale = std::max(scale, std::abs(fs[i]));
    }
    const double a_lin = num / den;
    double err_lin = 0.0;
    for (std::size_t i = 0; i < n; ++i) err_lin = std::max(err_lin, std::abs(fs[i] - a_lin * s_grid[i]));

    const LogFit lf = fit_log(s_grid, fs, hs, d0);
    std::ostringstream os;
    os.precision(17);
    if (err_lin <= 1e-9 * std::max(1.0, scale) || !(lf.max_err < err_lin)) {
        v.classification = BoneClass::LinearLog;
        v.A = a_lin;
        os << "linear fit, max error " << err_lin;
    } else {
        v.classification = BoneClass::PositiveLog;
        v.A = lf.A;
        v.B = lf.B;
        os << "logarithmic fit, max error " << lf.max_err << "; A " << (lf.A > 0 ? "> 0" : "< 0") << ", B "
           << (lf.B > 0 ? "> 0" : "< 0");
    }
    v.notes = os.str();
    return v;
}

AtomicCheck atomic_counterexample(std::span<const double> base_pmf, std::span<const double> t_grid)
{
    if (base_pmf.empty()) throw DomainError("base pmf is empty");
    double total = 0.0;
    for (double p : base_pmf) {
        if (!(p >= 0.0)) throw DomainError("base pmf must be non-negative");
        total += p;
    }
    if (total > 1.0 + 1e-12) throw DomainError("base pmf sums above 1");

    // pmf of the fair-coin thinning: sum_k p_k C(k, j) 2^-k.
    const std::size_t kmax = base_pmf.size() - 1;
    std::vector<double> thinned(kmax + 1, 0.0);
    for (std::size_t k = 0; k <= kmax; ++k) {
        if (base_pmf[k] == 0.0) continue;
        for (std::size_t j = 0; j <= k; ++j)
            thinned[j] += base_pmf[k] * boost::math::binomial_coefficient<double>(static_cast<unsigned>(k),
                                                                                   static_cast<unsigned>(j)) *
                          std::ldexp(1.0, -static_cast<int>(k));
    }

    AtomicCheck out;
    for (double t : t_grid) {
        double lhs = 0.0;
        double rhs = 0.0;
        for (std::size_t k = kmax + 1; k-- > 0;) {
            lhs = lhs * (0.5 * (t + 1.0)) + base_pmf[k];
            rhs = rhs * t + thinned[k];
        }
        out.lhs.push_back(lhs);
        out.rhs.push_back(rhs);
        out.max_residual = std::max(out.max_residual, std::abs(lhs - rhs));
    }
    return out;
}

AtomicCheck atomic_counterexample(const CountingLaw& base, std::span<const double> t_grid)
{
    std::vector<double> p;
    double cum = 0.0;
    const auto cap = base.support_max();
    for (std::int64_t k = 0;; ++k) {
        if (cap && k > *cap) break;
        p.push_back(pmf(base, k));
        cum += p.back();
        if (cum >= 1.0 - 1e-17 || k > 1000) break;
        if (k > 2 && p.back() < 1e-17 * cum && p.back() < p[p.size() - 2]) break;
    }
    return atomic_counterexample(p, t_grid);
}

}  // namespace ptm
