#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ptm/random.hpp"

namespace ptm {

/// One coordinate block of a point: a location or a mark. Up to three reals,
/// or the cemetery sentinel for points that have left the state space.
struct Value {
    std::array<double, 3> x{};
    std::uint8_t dim = 1;
    bool cemetery = false;

    static Value scalar(double v) { return Value{{v, 0.0, 0.0}, 1, false}; }
    static Value vec(std::span<const double> v);
    static Value dead() { return Value{{}, 0, true}; }

    double operator[](std::size_t i) const { return x[i]; }
    double scalar() const { return x[0]; }
};

/// Half-open interval (lo, hi].
struct Interval {
    double lo;
    double hi;
};

/// Finite union of half-open intervals (lo, hi], kept sorted and merged.
class IntervalSet {
public:
    IntervalSet() = default;
    explicit IntervalSet(std::vector<Interval> pieces);
    static IntervalSet interval(double lo, double hi) { return IntervalSet({{lo, hi}}); }

    const std::vector<Interval>& pieces() const noexcept { return pieces_; }
    bool empty() const noexcept { return pieces_.empty(); }
    bool contains(double x) const noexcept;
    double length() const noexcept;

    IntervalSet intersect(const IntervalSet& other) const;
    IntervalSet unite(const IntervalSet& other) const;
    /// (lo, hi] minus this set.
    IntervalSet complement(double lo, double hi) const;
    /// True when the sets share no interval of positive length.
    bool disjoint(const IntervalSet& other) const;
    bool includes(const IntervalSet& other) const;

    std::vector<double> breakpoints() const;
    std::string describe() const;

    friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

private:
    std::vector<Interval> pieces_;
};

bool operator==(const Interval& a, const Interval& b);

/// Axis-aligned box in 1 to 3 dimensions, closed.
struct Box {
    int dim = 1;
    std::array<double, 3> lo{};
    std::array<double, 3> hi{};

    static Box make(std::span<const double> lo, std::span<const double> hi);

    bool contains(const Value& p) const noexcept;
    double volume() const noexcept;
    /// Interiors intersect.
    bool overlaps(const Box& other) const noexcept;
    std::optional<Box> intersect(const Box& other) const noexcept;
    std::string describe() const;
};

/// Location law nu of the stones.
///
/// One-dimensional laws (uniform interval, piecewise-linear density table,
/// discrete atoms) support masses of interval sets, conditioning, quadrature,
/// and sampling. Box laws are uniform on a box in up to three dimensions.
class SpatialLaw {
public:
    struct Uniform {
        double lo;
        double hi;
    };
    /// Piecewise-linear density on an increasing grid, normalised so that the
    /// trapezoid rule gives total mass 1.
    struct Table {
        std::vector<double> grid;
        std::vector<double> density;
        std::vector<double> cumulative;  // exact CDF at grid points
    };
    struct Discrete {
        std::vector<Value> atoms;
        std::vector<double> probs;
    };
    struct UniformBox {
        Box box;
    };
    using Kind = std::variant<Uniform, Table, Discrete, UniformBox>;

    static constexpr int kDefaultPanels = 1024;

    static SpatialLaw uniform(double lo, double hi);
    static SpatialLaw density_table(std::vector<double> grid, std::vector<double> density);
    static SpatialLaw discrete(std::vector<Value> atoms, std::vector<double> probs);
    static SpatialLaw uniform_box(const Box& box);

    const Kind& kind() const noexcept { return kind_; }
    int dimension() const noexcept;
    /// Discrete laws are atomic; uniqueness of the thinning-closed families
    /// needs a diffuse law, so these are for counterexamples only.
    bool atomic() const noexcept;
    bool conditioned() const noexcept { return condition_.has_value(); }
    /// nu(A) for one-dimensional laws.
    double mass(const IntervalSet& a) const;
    /// nu(B) for box laws (and 1-D laws via the first axis).
    double mass(const Box& b) const;

    /// nu_A(B) = nu(A n B) / nu(A). Throws NullRestriction when nu(A) = 0.
    SpatialLaw conditioned_on(const IntervalSet& a) const;

    Value sample(Stream& rng) const;

    /// Integral of f against nu. Discontinuities of f on the first axis should
    /// be listed in `breaks`; every quadrature panel is split there. Uniform
    /// laws use `panels` Gauss-Legendre panels, tables use their own cells.
    double integrate(const std::function<double(const Value&)>& f, std::span<const double> breaks = {},
                     int panels = kDefaultPanels) const;

    /// CDF and quantile of the unconditioned 1-D continuous law.
    double cdf(double x) const;
    double quantile(double u) const;

    std::string describe() const;

private:
    explicit SpatialLaw(Kind k) : kind_(std::move(k)) {}
    double base_mass(const IntervalSet& a) const;
    double base_integrate(const std::function<double(const Value&)>& f, std::vector<double> breaks, int panels,
                          const std::optional<IntervalSet>& window) const;

    Kind kind_;
    std::optional<IntervalSet> condition_;
    double condition_mass_ = 1.0;
};

}  // namespace ptm
