#pragma once

#include <array>

namespace ptm::quad {

// Positive Gauss-Legendre nodes on [-1, 1] and their weights.
inline constexpr std::array<double, 2> kNodes4{0.3399810435848562648026658, 0.8611363115940525752239465};
inline constexpr std::array<double, 2> kWeights4{0.6521451548625461426269361, 0.3478548451374538573730639};
inline constexpr std::array<double, 4> kNodes8{0.1834346424956498049394761, 0.5255324099163289858177390,
                                               0.7966664774136267395915539, 0.9602898564975362316835609};
inline constexpr std::array<double, 4> kWeights8{0.3626837833783619829651504, 0.3137066458778872873379622,
                                                 0.2223810344533744705443560, 0.1012285362903762591525314};

template <class F, std::size_t H>
double gauss_legendre(F&& f, double a, double b, const std::array<double, H>& nodes,
                      const std::array<double, H>& weights)
{
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < H; ++i) {
        const double dx = half * nodes[i];
        acc += weights[i] * (f(mid - dx) + f(mid + dx));
    }
    return acc * half;
}

template <class F>
double gl4(F&& f, double a, double b)
{
    return gauss_legendre(f, a, b, kNodes4, kWeights4);
}

template <class F>
double gl8(F&& f, double a, double b)
{
    return gauss_legendre(f, a, b, kNodes8, kWeights8);
}

/// Composite 8-point rule over n equal panels.
template <class F>
double composite_gl8(F&& f, double a, double b, int n)
{
    if (!(b > a)) return 0.0;
    n = n < 1 ? 1 : n;
    const double h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lo = a + h * i;
        const double hi = i + 1 == n ? b : lo + h;
        acc += gl8(f, lo, hi);
    }
    return acc;
}

}  // namespace ptm::quad
