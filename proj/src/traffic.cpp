#include "ptm/traffic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

#include "ptm/error.hpp"
#include "ptm/quadrature.hpp"

namespace ptm::traffic {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using P2 = std::array<double, 2>;

std::array<double, 2> centre_xy(const Box& b)
{
    return {0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1])};
}

// Sutherland-Hodgman against one axis-aligned half-plane.
std::vector<P2> clip(const std::vector<P2>& poly, int axis, double bound, bool keep_below)
{
    std::vector<P2> out;
    const std::size_t n = poly.size();
    auto inside = [&](const P2& p) { return keep_below ? p[axis] <= bound : p[axis] >= bound; };
    for (std::size_t i = 0; i < n; ++i) {
        const P2& cur = poly[i];
        const P2& prev = poly[(i + n - 1) % n];
        const bool ci = inside(cur), pi = inside(prev);
        if (ci != pi) {
            const double s = (bound - prev[axis]) / (cur[axis] - prev[axis]);
            out.push_back({prev[0] + s * (cur[0] - prev[0]), prev[1] + s * (cur[1] - prev[1])});
        }
        if (ci) out.push_back(cur);
    }
    return out;
}

double area(const std::vector<P2>& poly)
{
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const P2& p = poly[i];
        const P2& q = poly[(i + 1) % poly.size()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * std::abs(a);
}

double overlap(double lo0, double hi0, double lo1, double hi1)
{
    return std::max(0.0, std::min(hi0, hi1) - std::max(lo0, lo1));
}

// Fraction of the xy-rectangle of b0, rotated by phi about c, that lands in a.
double rotated_fraction(const Box& b0, const Box& a, const std::array<double, 2>& c, double phi)
{
    const double cs = std::cos(phi), sn = std::sin(phi);
    std::vector<P2> poly;
    for (auto [x, y] : {P2{b0.lo[0], b0.lo[1]}, P2{b0.hi[0], b0.lo[1]}, P2{b0.hi[0], b0.hi[1]}, P2{b0.lo[0], b0.hi[1]}}) {
        const double dx = x - c[0], dy = y - c[1];
        poly.push_back({c[0] + cs * dx - sn * dy, c[1] + sn * dx + cs * dy});
    }
    for (int axis = 0; axis < 2 && !poly.empty(); ++axis) {
        poly = clip(poly, axis, a.lo[axis], false);
        if (!poly.empty()) poly = clip(poly, axis, a.hi[axis], true);
    }
    const double full = (b0.hi[0] - b0.lo[0]) * (b0.hi[1] - b0.lo[1]);
    return poly.size() < 3 ? 0.0 : std::min(1.0, area(poly) / full);
}

double norm_cdf(double u)
{
    return 0.5 * boost::math::erfc(-u / std::numbers::sqrt2);
}

// Antiderivative of the normal CDF.
double big_g(double u)
{
    return u * norm_cdf(u) + std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

// Average over x uniform on [x0, x1] of P(reflected BM on [lo, hi] from x
// ends in [a0, a1] after variance s^2).
double reflected_fraction(double lo, double hi, double x0, double x1, double a0, double a1, double s)
{
    a0 = std::max(a0, lo);
    a1 = std::min(a1, hi);
    if (a1 <= a0) return 0.0;
    if (s == 0.0) return overlap(x0, x1, a0, a1) / (x1 - x0);
    const double len = hi - lo;
    x0 -= lo;
    x1 -= lo;
    a0 -= lo;
    a1 -= lo;
    // int_{x0}^{x1} Phi((c - x)/s) dx and int Phi((c + x)/s) dx in closed form.
    auto minus = [&](double c) { return s * (big_g((c - x0) / s) - big_g((c - x1) / s)); };
    auto plus = [&](double c) { return s * (big_g((c + x1) / s) - big_g((c + x0) / s)); };
    const int kmax = static_cast<int>(std::ceil((8.0 * s + 2.0 * len) / (2.0 * len))) + 1;
    double acc = 0.0;
    for (int k = -kmax; k <= kmax; ++k) {
        const double shift = 2.0 * k * len;
        acc += minus(a1 + shift) - minus(a0 + shift) + plus(a1 + shift) - plus(a0 + shift);
    }
    return std::clamp(acc / (x1 - x0), 0.0, 1.0);
}

bool covers(const Box& a, const Box& b)
{
    for (int d = 0; d < b.dim; ++d)
        if (a.lo[d] > b.lo[d] || a.hi[d] < b.hi[d]) return false;
    return true;
}

// mu(A) for an immortal point of age u with uniform-box initial law, or
// nullopt when no direct formula applies.
std::optional<double> immortal_fraction(const TrafficConfig& cfg, const Box& a, double age)
{
    const auto* ub = std::get_if<SpatialLaw::UniformBox>(&cfg.initial.kind());
    if (!ub) return std::nullopt;
    const Box& b0 = ub->box;
    const Box& e = cfg.motion.state_space;
    return std::visit(
        overloaded{
            [&](const CircularOrbit& o) -> std::optional<double> {
                double z = 1.0;
                if (b0.dim == 3) z = overlap(b0.lo[2], b0.hi[2], a.lo[2], a.hi[2]) / (b0.hi[2] - b0.lo[2]);
                if (z == 0.0) return 0.0;
                const auto c = centre_xy(e);
                if (o.omega_lo == o.omega_hi || age == 0.0) return z * rotated_fraction(b0, a, c, o.omega_lo * age);
                const double w = o.omega_hi - o.omega_lo;
                const double avg = quad::composite_gl8([&](double om) { return rotated_fraction(b0, a, c, om * age); },
                                                       o.omega_lo, o.omega_hi, 256) /
                                   w;
                return z * avg;
            },
            [&](const BrownianGrid& g) -> std::optional<double> {
                const double s = std::sqrt(g.sigma2 * age);
                double p = 1.0;
                for (int d = 0; d < b0.dim && p > 0.0; ++d)
                    p *= reflected_fraction(e.lo[d], e.hi[d], b0.lo[d], b0.hi[d], a.lo[d], a.hi[d], s);
                return p;
            },
            [&](const RandomWaypoint&) -> std::optional<double> { return std::nullopt; },
        },
        cfg.motion.kind);
}

double survival(const TrafficConfig& cfg, double age)
{
    return cfg.lifetime_rate ? std::exp(-*cfg.lifetime_rate * age) : 1.0;
}

// One world line: alive position at query time or the cemetery.
Value world_line(const TrafficConfig& cfg, double arrival, const Value& x, Stream& rng)
{
    const double age = cfg.query_time - arrival;
    if (age < 0.0) return Value::dead();
    if (cfg.lifetime_rate) {
        std::exponential_distribution<double> life(*cfg.lifetime_rate);
        if (life(rng) <= age) return Value::dead();
    }
    return cfg.motion.advance(x, age, rng);
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string MotionKernel::name() const
{
    return std::visit(overloaded{[](const RandomWaypoint&) { return std::string("random-waypoint"); },
                                 [](const CircularOrbit&) { return std::string("circular-orbit"); },
                                 [](const BrownianGrid&) { return std::string("brownian"); }},
                      kind);
}

Value MotionKernel::advance(const Value& x, double age, Stream& rng) const
{
    if (x.cemetery) return x;
    if (age <= 0.0) return x;
    const Box& e = state_space;
    return std::visit(
        overloaded{
            [&](const RandomWaypoint& w) {
                Value p = x;
                double left = age;
                while (left > 0.0) {
                    Value target = p;
                    for (int d = 0; d < e.dim; ++d) target.x[d] = e.lo[d] + (e.hi[d] - e.lo[d]) * uniform01(rng);
                    const double speed = w.speed_lo + (w.speed_hi - w.speed_lo) * uniform01(rng);
                    double dist = 0.0;
                    for (int d = 0; d < e.dim; ++d) dist += (target.x[d] - p.x[d]) * (target.x[d] - p.x[d]);
                    dist = std::sqrt(dist);
                    const double leg = dist / speed;
                    if (leg >= left) {
                        const double f = left / leg;
                        for (int d = 0; d < e.dim; ++d) p.x[d] += f * (target.x[d] - p.x[d]);
                        break;
                    }
                    p = target;
                    left -= leg;
                }
                return p;
            },
            [&](const CircularOrbit& o) {
                const double om = o.omega_lo == o.omega_hi ? o.omega_lo
                                                           : o.omega_lo + (o.omega_hi - o.omega_lo) * uniform01(rng);
                const auto c = centre_xy(e);
                const double phi = om * age;
                const double dx = x.x[0] - c[0], dy = x.x[1] - c[1];
                Value p = x;
                p.x[0] = c[0] + std::cos(phi) * dx - std::sin(phi) * dy;
                p.x[1] = c[1] + std::sin(phi) * dx + std::cos(phi) * dy;
                return p;
            },
            [&](const BrownianGrid& g) {
                std::normal_distribution<double> z(0.0, std::sqrt(g.sigma2 * age));
                Value p = x;
                for (int d = 0; d < e.dim; ++d) {
                    const double len = e.hi[d] - e.lo[d];
                    double r = std::fmod(x.x[d] + z(rng) - e.lo[d], 2.0 * len);
                    if (r < 0.0) r += 2.0 * len;
                    if (r > len) r = 2.0 * len - r;
                    p.x[d] = e.lo[d] + r;
                }
                return p;
            },
        },
        kind);
}

void TrafficConfig::validate() const
{
    const Box& e = motion.state_space;
    if (e.dim < 1 || e.dim > 3) throw DomainError("state space must have 1 to 3 dimensions");
    std::visit(overloaded{
                   [&](const SpatialLaw::UniformBox& b) {
                       if (b.box.dim != e.dim) throw DomainError("initial law and state space differ in dimension");
                       if (!covers(e, b.box)) throw DomainError("initial box " + b.box.describe() + " leaves the state space");
                   },
                   [&](const SpatialLaw::Discrete& d) {
                       for (const auto& v : d.atoms)
                           if (v.dim != e.dim || !e.contains(v)) throw DomainError("initial atom outside the state space");
                   },
                   [&](const auto&) { throw DomainError("initial law must be a uniform box or discrete atoms"); },
               },
               initial.kind());
    if (initial.conditioned()) throw DomainError("initial law must not be conditioned");

    std::visit(overloaded{
                   [&](const RandomWaypoint& w) {
                       if (!(w.speed_lo > 0.0) || !(w.speed_hi >= w.speed_lo) || !std::isfinite(w.speed_hi))
                           throw DomainError("waypoint speeds need 0 < speed_lo <= speed_hi");
                   },
                   [&](const CircularOrbit& o) {
                       if (!std::isfinite(o.omega_lo) || !std::isfinite(o.omega_hi) || o.omega_hi < o.omega_lo)
                           throw DomainError("angular speeds need omega_lo <= omega_hi");
                       if (e.dim < 2) throw DomainError("circular orbits need at least two dimensions");
                       const auto c = centre_xy(e);
                       const double room = std::min(0.5 * (e.hi[0] - e.lo[0]), 0.5 * (e.hi[1] - e.lo[1]));
                       auto radius = [&](double x, double y) { return std::hypot(x - c[0], y - c[1]); };
                       double worst = 0.0;
                       if (const auto* b = std::get_if<SpatialLaw::UniformBox>(&initial.kind())) {
                           for (double x : {b->box.lo[0], b->box.hi[0]})
                               for (double y : {b->box.lo[1], b->box.hi[1]}) worst = std::max(worst, radius(x, y));
                       } else {
                           for (const auto& v : std::get<SpatialLaw::Discrete>(initial.kind()).atoms)
                               worst = std::max(worst, radius(v.x[0], v.x[1]));
                       }
                       if (worst > room * (1.0 + 1e-12))
                           throw DomainError("orbits of radius up to " + fmt(worst) + " leave the state space");
                   },
                   [&](const BrownianGrid& g) {
                       if (!(g.sigma2 > 0.0) || !std::isfinite(g.sigma2)) throw DomainError("sigma2 must be positive");
                   },
               },
               motion.kind);

    if (!(query_time >= 0.0) || !std::isfinite(query_time)) throw DomainError("query_time must be non-negative");
    if (arrivals) {
        if (!std::isfinite(arrivals->lo) || !std::isfinite(arrivals->hi) || arrivals->hi < arrivals->lo)
            throw DomainError("arrival window needs lo <= hi");
    } else if (lifetime_rate) {
        throw DomainError("lifetimes require birth/death mode (an arrival window)");
    }
    if (lifetime_rate && (!(*lifetime_rate > 0.0) || !std::isfinite(*lifetime_rate)))
        throw DomainError("lifetime rate must be positive");
}

MeasureSpec traffic_spec(const TrafficConfig& config)
{
    config.validate();
    if (!config.birth_death()) {
        MarkKernel move;
        move.name = config.motion.name();
        move.sampler = [cfg = config](const MarkedPoint& p, Stream& rng) {
            return cfg.motion.advance(p.location(), cfg.query_time, rng);
        };
        return mark(MeasureSpec{config.counting, config.initial, {}}, std::move(move));
    }

    const auto& w = *config.arrivals;
    SpatialLaw eta = w.lo == w.hi ? SpatialLaw::discrete({Value::scalar(w.lo)}, {1.0}) : SpatialLaw::uniform(w.lo, w.hi);
    MarkKernel start;
    start.name = "initial-position";
    start.sampler = [law = config.initial](const MarkedPoint&, Stream& rng) { return law.sample(rng); };
    MarkKernel line;
    line.name = config.motion.name();
    line.sampler = [cfg = config](const MarkedPoint& p, Stream& rng) {
        return world_line(cfg, p.location().scalar(), p.mark(0), rng);
    };
    line.defective_mass = [cfg = config](const MarkedPoint& p) {
        const double age = cfg.query_time - p.location().scalar();
        return age < 0.0 ? 1.0 : 1.0 - survival(cfg, age);
    };
    MeasureSpec spec{config.counting, std::move(eta), {}};
    spec = mark(std::move(spec), std::move(start));
    return mark(std::move(spec), std::move(line));
}

namespace {

Snapshot snapshot_of(const PointPattern& pattern, double t)
{
    Snapshot s{t, {}};
    for (const auto& p : pattern.points) {
        const Value& last = p.parts.back();
        if (!last.cemetery) s.survivors.push_back(last);
    }
    return s;
}

}  // namespace

Snapshot simulate_snapshot(const TrafficConfig& config, Stream& rng)
{
    return snapshot_of(sample_pattern(traffic_spec(config), rng), config.query_time);
}

void write_snapshot_csv(std::ostream& os, const std::vector<Snapshot>& snaps)
{
    os << "replicate,time,x,y,z\n";
    char buf[64];
    for (std::size_t r = 0; r < snaps.size(); ++r)
        for (const auto& v : snaps[r].survivors) {
            os << r;
            std::snprintf(buf, sizeof buf, ",%.17g", snaps[r].time);
            os << buf;
            for (int d = 0; d < 3; ++d) {
                os << ',';
                if (d < v.dim) {
                    std::snprintf(buf, sizeof buf, "%.17g", v.x[static_cast<std::size_t>(d)]);
                    os << buf;
                }
            }
            os << '\n';
        }
}

double alive_fraction(const TrafficConfig& config)
{
    config.validate();
    if (!config.birth_death()) return 1.0;
    const auto& w = *config.arrivals;
    const double t = config.query_time;
    if (t < w.lo) return 0.0;
    if (w.lo == w.hi) return survival(config, t - w.lo);
    const double top = std::min(w.hi, t);
    if (!config.lifetime_rate) return (top - w.lo) / (w.hi - w.lo);
    const double lam = *config.lifetime_rate;
    return (std::exp(-lam * (t - top)) - std::exp(-lam * (t - w.lo))) / (lam * (w.hi - w.lo));
}

MeanMeasure mean_measure(const TrafficConfig& config, const Box& a, std::size_t mc_samples, std::uint64_t seed)
{
    config.validate();
    if (a.dim != config.motion.state_space.dim) throw DomainError("region and state space differ in dimension");
    if (covers(a, config.motion.state_space)) return {alive_fraction(config), 0.0, true, "closed-form"};

    const double t = config.query_time;
    if (!config.birth_death()) {
        if (auto v = immortal_fraction(config, a, t)) return {*v, 0.0, true, "quadrature"};
    } else if (immortal_fraction(config, a, 0.0)) {
        const auto& w = *config.arrivals;
        if (t < w.lo) return {0.0, 0.0, true, "closed-form"};
        auto at = [&](double s) { return survival(config, t - s) * *immortal_fraction(config, a, t - s); };
        if (w.lo == w.hi) return {at(w.lo), 0.0, true, "quadrature"};
        const double top = std::min(w.hi, t);
        const double v = quad::composite_gl8(at, w.lo, top, 32) / (w.hi - w.lo);
        return {v, 0.0, true, "quadrature"};
    }

    // Nested Monte Carlo over single world lines.
    if (mc_samples < 100) throw DomainError("Monte Carlo mean measure needs at least 100 samples");
    StreamFactory streams(seed);
    Stream rng = streams.stream(0);
    std::vector<double> hits(mc_samples);
    const auto& w = config.arrivals;
    for (auto& h : hits) {
        double arrival = 0.0;
        if (w) arrival = w->lo == w->hi ? w->lo : w->lo + (w->hi - w->lo) * uniform01(rng);
        const Value x = config.initial.sample(rng);
        const Value y = w ? world_line(config, arrival, x, rng) : config.motion.advance(x, t, rng);
        h = a.contains(y) ? 1.0 : 0.0;
    }
    const auto est = stats::mean_estimate(hits);
    return {est.value, est.stderr_, false, "monte-carlo"};
}

std::string to_string(Sign s)
{
    switch (s) {
        case Sign::Negative: return "negative";
        case Sign::Zero: return "zero";
        case Sign::Positive: return "positive";
    }
    return "unknown";
}

RestrictedTraffic restrict_traffic(const TrafficConfig& config, const Box& a)
{
    const auto ma = mean_measure(config, a);
    const double total = alive_fraction(config);
    if (!(ma.value > 0.0) || !(total > 0.0))
        throw NullRestriction("region " + a.describe() + " has zero mean measure at t = " + fmt(config.query_time));
    const double norm = std::min(1.0, ma.value / total);
    const CountingLaw snap = total < 1.0 ? thin_map(config.counting, total) : config.counting;
    const CountingLaw restricted = norm < 1.0 ? thin_map(snap, norm) : snap;
    return {snap, restricted, total, ma.value, norm, ma.analytic};
}

std::vector<std::int64_t> region_counts(const TrafficConfig& config, const Box& a, std::size_t n_rep,
                                        const McOptions& mc)
{
    const MeasureSpec spec = traffic_spec(config);
    std::vector<std::int64_t> out(n_rep);
    StreamFactory streams(mc.seed);
    parallel_for(n_rep, mc.threads, [&](std::size_t i) {
        Stream rng = streams.stream(i);
        const auto snap = snapshot_of(sample_pattern(spec, rng), config.query_time);
        out[i] = std::count_if(snap.survivors.begin(), snap.survivors.end(), [&](const Value& v) { return a.contains(v); });
    });
    return out;
}

CovarianceExperiment covariance_sign_experiment(const TrafficConfig& config, const Box& a, const Box& b,
                                                std::size_t n_rep, const McOptions& mc)
{
    if (a.overlaps(b)) throw DisjointnessError("regions " + a.describe() + " and " + b.describe() + " overlap");
    if (n_rep < 10000) throw DomainError("covariance experiment needs at least 10^4 replicates");
    const MeasureSpec spec = traffic_spec(config);
    std::vector<double> na(n_rep), nb(n_rep);
    StreamFactory streams(mc.seed);
    parallel_for(n_rep, mc.threads, [&](std::size_t i) {
        Stream rng = streams.stream(i);
        const auto snap = snapshot_of(sample_pattern(spec, rng), config.query_time);
        for (const auto& v : snap.survivors) {
            if (a.contains(v)) na[i] += 1.0;
            else if (b.contains(v)) nb[i] += 1.0;
        }
    });
    CovarianceExperiment out;
    out.cov = stats::covariance_estimate(na, nb);
    if (std::abs(out.cov.value) <= 4.0 * out.cov.stderr_) out.verdict = Sign::Zero;
    else out.verdict = out.cov.value > 0.0 ? Sign::Positive : Sign::Negative;

    const double total = alive_fraction(config);
    if (total > 0.0) {
        const CountingLaw snap = total < 1.0 ? thin_map(config.counting, total) : config.counting;
        const Moments m = moments(snap);
        out.mass_a = mean_measure(config, a).value / total;
        out.mass_b = mean_measure(config, b).value / total;
        out.analytic = (m.variance - m.mean) * out.mass_a * out.mass_b;
    }
    return out;
}

}  // namespace ptm::traffic
