#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptm/counting.hpp"

namespace ptm {

/// Shapes allowed for log g by the thinning-closure functional equation.
enum class BoneClass {
    LinearLog,    // log g(x) = A x                    (Poisson)
    PositiveLog,  // log g(x) = B log(1 + A x), A < 0  (negative binomial)
    NegativeLog,  // log g(x) = B log(1 + A x), A > 0  (binomial)
    NotBone
};

std::string to_string(BoneClass c);

struct BoneVerdict {
    BoneClass classification = BoneClass::NotBone;
    std::optional<double> A;  // present only for bone classes
    std::optional<double> B;  // present only for the logarithmic classes
    double max_residual = 0.0;
    double tolerance = 0.0;
    std::optional<double> h;  // candidate thinned parameter (NNPS test only)
    std::string notes;
};

/// 101 equally spaced points on [0, 1] by default.
std::vector<double> uniform_grid(int n = 101, double lo = 0.0, double hi = 1.0);
/// n log-spaced points on [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n = 50);

/// max over t of |psi_theta(a t + 1 - a) - psi_{h_a(theta)}(t)| and of the
/// equivalent apgf form |apgf_theta(a t) - apgf_{h_a(theta)}(t)|.
double bone_residual(const CountingLaw& law, double a, std::span<const double> t_grid);

/// Tests g((a t + b) theta) = g(b theta) g(h t) for a canonical NNPS family.
///
/// h is fixed by the t = 1 slice g(theta) = g(b theta) g(h), solved by
/// bisection on [0, theta]; the residual is reported on the pgf scale (divided
/// by g(theta)). Families that pass are classified by fitting log g.
BoneVerdict nnps_bone_test(const NnpsFamily& family, double theta, double a, std::span<const double> t_grid);

/// Residual tolerance for nnps_bone_test: exact polynomials versus truncated series.
double nnps_tolerance(const NnpsFamily& family);

/// Classifies f with f(0) = 0, f'(0) > 0 against f(s + t) - f(s) = f(h(s) t).
///
/// h(s) = f'(s) / f'(0) by central differences; if the equation holds on the
/// (s, t) grid, f is fitted as A t or as B log(1 + A t). A logarithmic fit is
/// labelled PositiveLog here; nnps_bone_test refines the label by the sign of A.
BoneVerdict cauchy_classify(const std::function<double(double)>& f, std::span<const double> s_grid,
                            double tolerance = 1e-6);

struct AtomicCheck {
    double max_residual = 0.0;
    std::vector<double> lhs;  // E ((t+1)/2)^K
    std::vector<double> rhs;  // E t^{K'} with K' the fair-coin thinning of K
};

/// Two-atom example of a bone map that is not PT: checks
/// E((t+1)/2)^K = E t^{K'} where K' keeps each of the K points with probability 1/2.
AtomicCheck atomic_counterexample(std::span<const double> base_pmf, std::span<const double> t_grid);
/// Same, with the pmf of `base` truncated where the remaining tail is below 1e-17.
AtomicCheck atomic_counterexample(const CountingLaw& base, std::span<const double> t_grid);

}  // namespace ptm
