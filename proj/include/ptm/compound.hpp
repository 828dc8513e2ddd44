#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ptm/counting.hpp"
#include "ptm/random.hpp"
#include "ptm/spatial.hpp"
#include "ptm/stats.hpp"
#include "ptm/stc.hpp"

namespace ptm::compound {

/// Spend law of Y given state x. Only the first two moments are fixed by the
/// model; Gamma is the default two-moment family.
enum class SpendLaw { Gamma };

std::string to_string(SpendLaw s);

/// Customers arrive as a PT process over days (0, n]; each gets a state X
/// with probabilities p^t and a spend Y with mean alpha_X and variance beta2_X.
struct StoreModel {
    CountingLaw counting;
    double days = 1.0;
    SpatialLaw arrivals;
    std::function<std::vector<double>(double)> state_probs;
    std::vector<double> state_breaks;  // times where state_probs may jump
    std::vector<double> spend_mean;
    std::vector<double> spend_var;
    SpendLaw spend_law = SpendLaw::Gamma;

    /// Uniform arrivals and piecewise-constant state probabilities:
    /// probs[j] applies on (breaks[j-1], breaks[j]] with breaks[-1] = 0 and
    /// an implicit final break at `days`.
    static StoreModel make(CountingLaw counting, double days, std::vector<double> breaks,
                           std::vector<std::vector<double>> probs, std::vector<double> spend_mean,
                           std::vector<double> spend_var);

    std::size_t states() const noexcept { return spend_mean.size(); }
    /// Throws on an invalid model; called by every operation.
    void validate() const;
};

struct ZMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and variance of Z_B, the total spend of customers arriving in B.
ZMoments z_moments(const StoreModel& model, const IntervalSet& b);

/// Cov(Z_A, Z_{A^c}) with A^c taken within the horizon.
double z_covariance(const StoreModel& model, const IntervalSet& a);

struct Decomposition {
    double ez = 0.0;
    double ez_a = 0.0;
    double ez_ac = 0.0;
    double var_z = 0.0;
    double var_a = 0.0;
    double var_ac = 0.0;
    double cov = 0.0;
};

Decomposition decompose_total(const StoreModel& model, const IntervalSet& a);

/// The marked measure (counting, nu x Q x Q2) with state and spend kernels.
MeasureSpec store_spec(const StoreModel& model);

struct StoreSimulation {
    std::size_t replicates = 0;
    stats::Estimate mean_z, mean_a, mean_ac;
    stats::Estimate var_z, var_a, var_ac;
    stats::Estimate cov;
};

StoreSimulation simulate_store(const StoreModel& model, const IntervalSet& a, std::size_t n_rep, const McOptions& mc);

}  // namespace ptm::compound
