#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptm/random.hpp"
#include "ptm/spatial.hpp"
#include "ptm/stc.hpp"

namespace ptm::sir {

struct SirParams {
    double beta = 2.0;
    double gamma = 1.0;
    double rho = 0.01;

    double r0() const noexcept { return beta / gamma; }
    void validate() const;
};

struct SolveOptions {
    double dt = 1e-3;
    /// Integrate to this time; when absent, stop once I falls below 1e-8
    /// after the peak.
    std::optional<double> t_max;
};

struct SirTrajectory {
    SirParams params;
    double dt = 0.0;
    std::vector<double> t, S, I, R;
    double tau = 0.0;  // final size
    std::vector<std::string> warnings;

    double t_max() const { return t.back(); }
    double s_inf() const noexcept { return 1.0 - tau; }
};

/// Classical RK4 with fixed step from (S, I, R) = (1, rho, 0).
SirTrajectory solve_sir(const SirParams& params, const SolveOptions& opts = {});

/// Root of 1 - tau = exp(-R0 (tau + rho)) in (0, 1).
double final_size(double r0, double rho);

/// (S, I, R) at time t within the solved range, by a partial RK4 step from
/// the preceding grid point.
std::array<double, 3> state_at(const SirTrajectory& traj, double t);

/// Infection-time law nu(x) = beta I_x S_x / tau tabulated on the trajectory
/// grid. Mass beyond t_max is folded into the last cell.
SpatialLaw infection_density(const SirTrajectory& traj, std::vector<std::string>* warnings = nullptr);

/// Mass of nu beyond the solved horizon: 1 - (1 - S_{t_max}) / tau.
double tail_mass(const SirTrajectory& traj);

/// Recovery time y = x + Exp(gamma).
MarkKernel recovery_kernel(const SirParams& params);

struct LabelProbs {
    double s = 0.0;
    double i = 0.0;
    double r = 0.0;
};

/// Label law of one individual at time t: (S_t, I_t - rho e^{-gamma t}, rest).
LabelProbs label_probabilities(const SirTrajectory& traj, double t);

/// Trinomial probability of (n - kI - kR, kI, kR) labels among n individuals.
double label_count_pmf(std::int64_t n, const SirTrajectory& traj, double t, std::int64_t k_i, std::int64_t k_r);

/// The binomial random measure of infected individuals: Binomial(n, tau)
/// points with law nu, marked by recovery times.
MeasureSpec infected_spec(std::int64_t n, const SirTrajectory& traj);

struct LabelSimulation {
    std::int64_t n = 0;
    double t = 0.0;
    std::vector<std::int64_t> k_s, k_i, k_r;  // one entry per replicate
};

LabelSimulation simulate_labels(std::int64_t n, const SirTrajectory& traj, double t, std::size_t n_rep,
                                const McOptions& mc);

}  // namespace ptm::sir
