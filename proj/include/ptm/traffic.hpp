#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ptm/counting.hpp"
#include "ptm/random.hpp"
#include "ptm/spatial.hpp"
#include "ptm/stats.hpp"
#include "ptm/stc.hpp"

namespace ptm::traffic {

/// Legs toward uniform waypoints in the state box at a speed drawn per leg.
struct RandomWaypoint {
    double speed_lo = 1.0;
    double speed_hi = 1.0;
};

/// Rotation about the box centre in the xy-plane. Radius and phase come from
/// the initial location; the angular speed is uniform on [omega_lo, omega_hi].
struct CircularOrbit {
    double omega_lo = 1.0;
    double omega_hi = 1.0;
};

/// Brownian motion with variance sigma2 per unit time per axis, reflected at
/// the box faces.
struct BrownianGrid {
    double sigma2 = 1.0;
};

struct MotionKernel {
    std::variant<RandomWaypoint, CircularOrbit, BrownianGrid> kind;
    Box state_space;

    std::string name() const;
    /// Position at age u of a world line started at x.
    Value advance(const Value& x, double age, Stream& rng) const;
};

/// Arrival-time law eta: uniform on [lo, hi], or a point mass when lo == hi.
struct ArrivalWindow {
    double lo = 0.0;
    double hi = 0.0;
};

struct TrafficConfig {
    CountingLaw counting;
    SpatialLaw initial;  // nu on the state box
    MotionKernel motion;
    std::optional<ArrivalWindow> arrivals;  // birth/death mode when present
    std::optional<double> lifetime_rate;    // Exp lifetimes; birth/death mode only
    double query_time = 0.0;

    bool birth_death() const noexcept { return arrivals.has_value(); }
    void validate() const;
};

/// (K, eta x nu x Q): location is the arrival time in birth/death mode and the
/// initial position otherwise; the last mark is the position at query_time,
/// or the cemetery.
MeasureSpec traffic_spec(const TrafficConfig& config);

struct Snapshot {
    double time = 0.0;
    std::vector<Value> survivors;

    std::size_t count() const noexcept { return survivors.size(); }
};

Snapshot simulate_snapshot(const TrafficConfig& config, Stream& rng);

/// Snapshots as CSV with columns replicate,time,x,y,z.
void write_snapshot_csv(std::ostream& os, const std::vector<Snapshot>& snaps);

struct MeanMeasure {
    double value = 0.0;
    double stderr_ = 0.0;  // zero when computed semi-analytically
    bool analytic = true;
    std::string method;
};

/// mu_t(A): probability that one point is alive at query_time and inside A.
/// Circular and Brownian kernels with a uniform-box initial law are
/// integrated directly; anything else falls back to Monte Carlo.
MeanMeasure mean_measure(const TrafficConfig& config, const Box& a, std::size_t mc_samples = 200000,
                         std::uint64_t seed = 1);

/// Fraction of points arrived by query_time and not yet destroyed.
double alive_fraction(const TrafficConfig& config);

enum class Sign { Negative, Zero, Positive };
std::string to_string(Sign s);

struct CovarianceExperiment {
    stats::Estimate cov;
    Sign verdict = Sign::Zero;
    double analytic = 0.0;  // (delta^2 - c) mu(A) mu(B) for the snapshot law
    double mass_a = 0.0;    // normalised masses
    double mass_b = 0.0;
};

CovarianceExperiment covariance_sign_experiment(const TrafficConfig& config, const Box& a, const Box& b,
                                                std::size_t n_rep, const McOptions& mc);

struct RestrictedTraffic {
    CountingLaw snapshot_law;  // law of the total surviving count
    CountingLaw restricted;    // law of N_t(A)
    double mass_total = 0.0;   // mu_t(E)
    double mass_a = 0.0;       // mu_t(A)
    double normalised = 0.0;   // mu_t(A) / mu_t(E)
    bool analytic = true;
};

RestrictedTraffic restrict_traffic(const TrafficConfig& config, const Box& a);

/// Counts N_t(A) over n_rep snapshots.
std::vector<std::int64_t> region_counts(const TrafficConfig& config, const Box& a, std::size_t n_rep,
                                        const McOptions& mc);

}  // namespace ptm::traffic
