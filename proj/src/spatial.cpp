#include "ptm/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ptm/error.hpp"
#include "ptm/quadrature.hpp"

namespace ptm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Sorted unique cut points of [lo, hi] including the ends and any break inside.
std::vector<double> cuts_within(double lo, double hi, std::span<const double> breaks)
{
    std::vector<double> cuts{lo, hi};
    for (double b : breaks)
        if (b > lo && b < hi) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

}  // namespace

Value Value::vec(std::span<const double> v)
{
    if (v.empty() || v.size() > 3) throw DomainError("a point has between one and three coordinates");
    Value out;
    out.dim = static_cast<std::uint8_t>(v.size());
    std::copy(v.begin(), v.end(), out.x.begin());
    return out;
}

bool operator==(const Interval& a, const Interval& b)
{
    return a.lo == b.lo && a.hi == b.hi;
}

IntervalSet::IntervalSet(std::vector<Interval> pieces)
{
    for (const auto& p : pieces)
        if (std::isnan(p.lo) || std::isnan(p.hi)) throw DomainError("interval endpoints must not be NaN");
    std::erase_if(pieces, [](const Interval& p) { return !(p.hi > p.lo); });
    std::sort(pieces.begin(), pieces.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (const auto& p : pieces) {
        if (!pieces_.empty() && p.lo <= pieces_.back().hi)
            pieces_.back().hi = std::max(pieces_.back().hi, p.hi);
        else
            pieces_.push_back(p);
    }
}

bool IntervalSet::contains(double x) const noexcept
{
    auto it = std::lower_bound(pieces_.begin(), pieces_.end(), x,
                               [](const Interval& p, double v) { return p.hi < v; });
    return it != pieces_.end() && it->lo < x && x <= it->hi;
}

double IntervalSet::length() const noexcept
{
    double acc = 0.0;
    for (const auto& p : pieces_) acc += p.hi - p.lo;
    return acc;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const
{
    std::vector<Interval> out;
    for (const auto& a : pieces_)
        for (const auto& b : other.pieces_) {
            const double lo = std::max(a.lo, b.lo);
            const double hi = std::min(a.hi, b.hi);
            if (hi > lo) out.push_back({lo, hi});
        }
    return IntervalSet(std::move(out));
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const
{
    std::vector<Interval> all = pieces_;
    all.insert(all.end(), other.pieces_.begin(), other.pieces_.end());
    return IntervalSet(std::move(all));
}

IntervalSet IntervalSet::complement(double lo, double hi) const
{
    std::vector<Interval> out;
    double cursor = lo;
    for (const auto& p : pieces_) {
        if (p.hi <= lo) continue;
        if (p.lo >= hi) break;
        if (p.lo > cursor) out.push_back({cursor, std::min(p.lo, hi)});
        cursor = std::max(cursor, p.hi);
    }
    if (cursor < hi) out.push_back({cursor, hi});
    return IntervalSet(std::move(out));
}

bool IntervalSet::disjoint(const IntervalSet& other) const
{
    return intersect(other).empty();
}

bool IntervalSet::includes(const IntervalSet& other) const
{
    return intersect(other) == other;
}

std::vector<double> IntervalSet::breakpoints() const
{
    std::vector<double> out;
    for (const auto& p : pieces_) {
        out.push_back(p.lo);
        out.push_back(p.hi);
    }
    return out;
}

std::string IntervalSet::describe() const
{
    std::ostringstream os;
    os.precision(17);
    if (pieces_.empty()) return "{}";
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (i) os << " u ";
        os << "(" << pieces_[i].lo << ", " << pieces_[i].hi << "]";
    }
    return os.str();
}

Box Box::make(std::span<const double> lo, std::span<const double> hi)
{
    if (lo.size() != hi.size() || lo.empty() || lo.size() > 3)
        throw DomainError("box corners must have matching dimension between 1 and 3");
    Box b;
    b.dim = static_cast<int>(lo.size());
    for (int d = 0; d < b.dim; ++d) {
        if (!(hi[d] > lo[d])) throw DomainError("box must have positive extent on every axis");
        b.lo[d] = lo[d];
        b.hi[d] = hi[d];
    }
    return b;
}

bool Box::contains(const Value& p) const noexcept
{
    if (p.cemetery) return false;
    for (int d = 0; d < dim; ++d)
        if (!(p.x[d] >= lo[d] && p.x[d] <= hi[d])) return false;
    return true;
}

double Box::volume() const noexcept
{
    double v = 1.0;
    for (int d = 0; d < dim; ++d) v *= hi[d] - lo[d];
    return v;
}

bool Box::overlaps(const Box& other) const noexcept
{
    return intersect(other).has_value();
}

std::optional<Box> Box::intersect(const Box& other) const noexcept
{
    if (dim != other.dim) return std::nullopt;
    Box out;
    out.dim = dim;
    for (int d = 0; d < dim; ++d) {
        out.lo[d] = std::max(lo[d], other.lo[d]);
        out.hi[d] = std::min(hi[d], other.hi[d]);
        if (!(out.hi[d] > out.lo[d])) return std::nullopt;
    }
    return out;
}

std::string Box::describe() const
{
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (int d = 0; d < dim; ++d) os << (d ? " x " : "") << "[" << lo[d] << ", " << hi[d] << "]";
    os << "]";
    return os.str();
}

SpatialLaw SpatialLaw::uniform(double lo, double hi)
{
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) throw DomainError("uniform law needs lo < hi");
    return SpatialLaw(Uniform{lo, hi});
}

SpatialLaw SpatialLaw::density_table(std::vector<double> grid, std::vector<double> density)
{
    if (grid.size() < 2 || grid.size() != density.size())
        throw DomainError("density table needs at least two grid points and one value per point");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || !std::isfinite(density[i])) throw DomainError("density table must be finite");
        if (density[i] < 0.0) throw DomainError("density values must be non-negative");
        if (i && !(grid[i] > grid[i - 1])) throw DomainError("density grid must be strictly increasing");
    }
    std::vector<double> cum(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i)
        cum[i] = cum[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
    const double total = cum.back();
    if (!(total > 0.0)) throw DomainError("density table has zero mass");
    for (auto& d : density) d /= total;
    for (auto& c : cum) c /= total;
    cum.back() = 1.0;
    return SpatialLaw(Table{std::move(grid), std::move(density), std::move(cum)});
}

SpatialLaw SpatialLaw::discrete(std::vector<Value> atoms, std::vector<double> probs)
{
    if (atoms.empty() || atoms.size() != probs.size()) throw DomainError("discrete law needs one probability per atom");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("atom probabilities must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("atom probabilities must sum to 1");
    return SpatialLaw(Discrete{std::move(atoms), std::move(probs)});
}

SpatialLaw SpatialLaw::uniform_box(const Box& box)
{
    if (box.dim < 1 || box.dim > 3 || !(box.volume() > 0.0)) throw DomainError("box law needs a non-degenerate box");
    return SpatialLaw(UniformBox{box});
}

int SpatialLaw::dimension() const noexcept
{
    return std::visit(overloaded{
                          [](const Discrete& d) { return static_cast<int>(d.atoms.front().dim); },
                          [](const UniformBox& b) { return b.box.dim; },
                          [](const auto&) { return 1; },
                      },
                      kind_);
}

bool SpatialLaw::atomic() const noexcept
{
    return std::holds_alternative<Discrete>(kind_);
}

double SpatialLaw::cdf(double x) const
{
    return std::visit(overloaded{
                          [&](const Uniform& u) { return std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0); },
                          [&](const UniformBox& b) -> double {
                              if (b.box.dim != 1) throw DomainError("cdf needs a one-dimensional law");
                              return std::clamp((x - b.box.lo[0]) / (b.box.hi[0] - b.box.lo[0]), 0.0, 1.0);
                          },
                          [&](const Table& t) -> double {
                              if (x <= t.grid.front()) return 0.0;
                              if (x >= t.grid.back()) return 1.0;
                              const auto i = static_cast<std::size_t>(
                                  std::upper_bound(t.grid.begin(), t.grid.end(), x) - t.grid.begin() - 1);
                              const double h = t.grid[i + 1] - t.grid[i];
                              const double s = x - t.grid[i];
                              const double dx = t.density[i] + (t.density[i + 1] - t.density[i]) * s / h;
                              return std::min(1.0, t.cumulative[i] + 0.5 * s * (t.density[i] + dx));
                          },
                          [&](const Discrete& d) -> double {
                              double acc = 0.0;
                              for (std::size_t i = 0; i < d.atoms.size(); ++i)
                                  if (d.atoms[i].x[0] <= x) acc += d.probs[i];
                              return acc;
                          },
                      },
                      kind_);
}

double SpatialLaw::quantile(double u) const
{
    u = std::clamp(u, 0.0, 1.0);
    return std::visit(overloaded{
                          [&](const Uniform& un) { return un.lo + u * (un.hi - un.lo); },
                          [&](const UniformBox& b) -> double {
                              if (b.box.dim != 1) throw DomainError("quantile needs a one-dimensional law");
                              return b.box.lo[0] + u * (b.box.hi[0] - b.box.lo[0]);
                          },
                          [&](const Table& t) -> double {
                              auto it = std::lower_bound(t.cumulative.begin(), t.cumulative.end(), u);
                              if (it == t.cumulative.begin()) return t.grid.front();
                              if (it == t.cumulative.end()) return t.grid.back();
                              const auto i = static_cast<std::size_t>(it - t.cumulative.begin() - 1);
                              const double h = t.grid[i + 1] - t.grid[i];
                              const double d0 = t.density[i];
                              const double slope = (t.density[i + 1] - d0) / h;
                              const double target = u - t.cumulative[i];
                              // Solve d0 s + slope s^2 / 2 = target in the stable form.
                              const double disc = std::max(0.0, d0 * d0 + 2.0 * slope * target);
                              const double denom = d0 + std::sqrt(disc);
                              const double s = denom > 0.0 ? 2.0 * target / denom : 0.0;
                              return t.grid[i] + std::clamp(s, 0.0, h);
                          },
                          [&](const Discrete& d) -> double {
                              double acc = 0.0;
                              for (std::size_t i = 0; i < d.atoms.size(); ++i) {
                                  acc += d.probs[i];
                                  if (acc >= u) return d.atoms[i].x[0];
                              }
                              return d.atoms.back().x[0];
                          },
                      },
                      kind_);
}

double SpatialLaw::base_mass(const IntervalSet& a) const
{
    return std::visit(overloaded{
                          [&](const Discrete& d) {
                              double acc = 0.0;
                              for (std::size_t i = 0; i < d.atoms.size(); ++i)
                                  if (a.contains(d.atoms[i].x[0])) acc += d.probs[i];
                              return acc;
                          },
                          [&](const UniformBox& b) -> double {
                              if (b.box.dim != 1) throw DomainError("interval masses need a one-dimensional law");
                              return a.intersect(IntervalSet::interval(b.box.lo[0], b.box.hi[0])).length() /
                                     (b.box.hi[0] - b.box.lo[0]);
                          },
                          [&](const Uniform& u) {
                              return a.intersect(IntervalSet::interval(u.lo, u.hi)).length() / (u.hi - u.lo);
                          },
                          [&](const Table&) {
                              double acc = 0.0;
                              for (const auto& p : a.pieces()) acc += cdf(p.hi) - cdf(p.lo);
                              return std::clamp(acc, 0.0, 1.0);
                          },
                      },
                      kind_);
}

double SpatialLaw::mass(const IntervalSet& a) const
{
    if (condition_) return base_mass(a.intersect(*condition_)) / condition_mass_;
    return base_mass(a);
}

double SpatialLaw::mass(const Box& b) const
{
    if (const auto* ub = std::get_if<UniformBox>(&kind_)) {
        if (ub->box.dim != b.dim) throw DomainError("box dimension does not match the law");
        auto cut = ub->box.intersect(b);
        return cut ? cut->volume() / ub->box.volume() : 0.0;
    }
    if (b.dim != 1) throw DomainError("box dimension does not match the law");
    return mass(IntervalSet::interval(b.lo[0], b.hi[0]));
}

SpatialLaw SpatialLaw::conditioned_on(const IntervalSet& a) const
{
    if (dimension() != 1) throw DomainError("conditioning on interval sets needs a one-dimensional law");
    IntervalSet cond = condition_ ? condition_->intersect(a) : a;
    const double m = base_mass(cond);
    if (!(m > 0.0)) throw NullRestriction("restriction set has zero mass");
    SpatialLaw out = *this;
    out.condition_ = std::move(cond);
    out.condition_mass_ = m;
    return out;
}

Value SpatialLaw::sample(Stream& rng) const
{
    if (!condition_) {
        return std::visit(overloaded{
                              [&](const Uniform& u) { return Value::scalar(u.lo + (u.hi - u.lo) * uniform01(rng)); },
                              [&](const Table&) { return Value::scalar(quantile(uniform_open(rng))); },
                              [&](const Discrete& d) {
                                  const double u = uniform01(rng);
                                  double acc = 0.0;
                                  for (std::size_t i = 0; i < d.atoms.size(); ++i) {
                                      acc += d.probs[i];
                                      if (u < acc) return d.atoms[i];
                                  }
                                  return d.atoms.back();
                              },
                              [&](const UniformBox& b) {
                                  Value v;
                                  v.dim = static_cast<std::uint8_t>(b.box.dim);
                                  for (int k = 0; k < b.box.dim; ++k)
                                      v.x[k] = b.box.lo[k] + (b.box.hi[k] - b.box.lo[k]) * uniform01(rng);
                                  return v;
                              },
                          },
                          kind_);
    }
    if (const auto* d = std::get_if<Discrete>(&kind_)) {
        const double u = uniform01(rng) * condition_mass_;
        double acc = 0.0;
        const Value* last = nullptr;
        for (std::size_t i = 0; i < d->atoms.size(); ++i) {
            if (!condition_->contains(d->atoms[i].x[0])) continue;
            last = &d->atoms[i];
            acc += d->probs[i];
            if (u < acc) return d->atoms[i];
        }
        return *last;
    }
    // Continuous 1-D: walk the pieces of A, then invert the base CDF inside one.
    double u = uniform_open(rng) * condition_mass_;
    const auto& pieces = condition_->pieces();
    for (std::size_t j = 0; j < pieces.size(); ++j) {
        const double f_lo = cdf(pieces[j].lo);
        const double f_hi = cdf(pieces[j].hi);
        const double m = f_hi - f_lo;
        if (u < m || j + 1 == pieces.size()) return Value::scalar(quantile(f_lo + std::min(u, m)));
        u -= m;
    }
    return Value::scalar(quantile(cdf(pieces.back().hi)));
}

double SpatialLaw::base_integrate(const std::function<double(const Value&)>& f, std::vector<double> breaks,
                                  int panels, const std::optional<IntervalSet>& window) const
{
    auto scalar_f = [&](double x) { return f(Value::scalar(x)); };

    auto segments = [&](double lo, double hi) -> std::vector<Interval> {
        IntervalSet whole = IntervalSet::interval(lo, hi);
        return window ? window->intersect(whole).pieces() : whole.pieces();
    };

    return std::visit(
        overloaded{
            [&](const Uniform& u) {
                const double width = u.hi - u.lo;
                double acc = 0.0;
                for (const auto& seg : segments(u.lo, u.hi)) {
                    const auto cuts = cuts_within(seg.lo, seg.hi, breaks);
                    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                        const double len = cuts[i + 1] - cuts[i];
                        const int n = std::max(1, static_cast<int>(std::ceil(panels * len / width)));
                        acc += quad::composite_gl8(scalar_f, cuts[i], cuts[i + 1], n);
                    }
                }
                return acc / width;
            },
            [&](const Table& t) {
                double acc = 0.0;
                for (const auto& seg : segments(t.grid.front(), t.grid.back())) {
                    std::vector<double> cut_src = breaks;
                    auto first = std::upper_bound(t.grid.begin(), t.grid.end(), seg.lo);
                    auto last = std::lower_bound(t.grid.begin(), t.grid.end(), seg.hi);
                    cut_src.insert(cut_src.end(), first, last);
                    const auto cuts = cuts_within(seg.lo, seg.hi, cut_src);
                    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                        const double a = cuts[i];
                        const double b = cuts[i + 1];
                        const auto c = static_cast<std::size_t>(
                            std::clamp<std::ptrdiff_t>(std::upper_bound(t.grid.begin(), t.grid.end(), 0.5 * (a + b)) -
                                                           t.grid.begin() - 1,
                                                       0, static_cast<std::ptrdiff_t>(t.grid.size()) - 2));
                        const double h = t.grid[c + 1] - t.grid[c];
                        const double d0 = t.density[c];
                        const double slope = (t.density[c + 1] - d0) / h;
                        acc += quad::gl4([&](double x) { return scalar_f(x) * (d0 + slope * (x - t.grid[c])); }, a, b);
                    }
                }
                return acc;
            },
            [&](const Discrete& d) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d.atoms.size(); ++i)
                    if (!window || window->contains(d.atoms[i].x[0])) acc += d.probs[i] * f(d.atoms[i]);
                return acc;
            },
            [&](const UniformBox& ub) {
                const Box& b = ub.box;
                if (b.dim == 1) {
                    const double width = b.hi[0] - b.lo[0];
                    double acc = 0.0;
                    for (const auto& seg : segments(b.lo[0], b.hi[0])) {
                        const auto cuts = cuts_within(seg.lo, seg.hi, breaks);
                        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                            const int n = std::max(1, static_cast<int>(std::ceil(panels * (cuts[i + 1] - cuts[i]) / width)));
                            acc += quad::composite_gl8(scalar_f, cuts[i], cuts[i + 1], n);
                        }
                    }
                    return acc / width;
                }
                // Tensor product of 4-point rules; coarser per axis as dimension grows.
                const int per_axis = b.dim == 2 ? 64 : 16;
                std::vector<std::vector<std::pair<double, double>>> axes(static_cast<std::size_t>(b.dim));
                for (int k = 0; k < b.dim; ++k) {
                    const double h = (b.hi[k] - b.lo[k]) / per_axis;
                    for (int p = 0; p < per_axis; ++p) {
                        const double mid = b.lo[k] + h * (p + 0.5);
                        for (std::size_t q = 0; q < 2; ++q) {
                            const double w = quad::kWeights4[q] * 0.5 / per_axis;
                            axes[static_cast<std::size_t>(k)].push_back({mid - 0.5 * h * quad::kNodes4[q], w});
                            axes[static_cast<std::size_t>(k)].push_back({mid + 0.5 * h * quad::kNodes4[q], w});
                        }
                    }
                }
                double acc = 0.0;
                Value v;
                v.dim = static_cast<std::uint8_t>(b.dim);
                const auto& ax = axes[0];
                const auto& ay = axes[1];
                if (b.dim == 2) {
                    for (const auto& [x, wx] : ax)
                        for (const auto& [y, wy] : ay) {
                            v.x = {x, y, 0.0};
                            acc += wx * wy * f(v);
                        }
                } else {
                    for (const auto& [x, wx] : ax)
                        for (const auto& [y, wy] : ay)
                            for (const auto& [z, wz] : axes[2]) {
                                v.x = {x, y, z};
                                acc += wx * wy * wz * f(v);
                            }
                }
                return acc;
            },
        },
        kind_);
}

double SpatialLaw::integrate(const std::function<double(const Value&)>& f, std::span<const double> breaks,
                             int panels) const
{
    std::vector<double> all(breaks.begin(), breaks.end());
    if (condition_) {
        const auto extra = condition_->breakpoints();
        all.insert(all.end(), extra.begin(), extra.end());
        return base_integrate(f, std::move(all), panels, condition_) / condition_mass_;
    }
    return base_integrate(f, std::move(all), panels, std::nullopt);
}

std::string SpatialLaw::describe() const
{
    std::ostringstream os;
    os.precision(17);
    std::visit(overloaded{
                   [&](const Uniform& u) { os << "Uniform(" << u.lo << ", " << u.hi << ")"; },
                   [&](const Table& t) {
                       os << "DensityTable(" << t.grid.size() << " points on [" << t.grid.front() << ", "
                          << t.grid.back() << "])";
                   },
                   [&](const Discrete& d) { os << "Discrete(" << d.atoms.size() << " atoms)"; },
                   [&](const UniformBox& b) { os << "UniformBox" << b.box.describe(); },
               },
               kind_);
    if (condition_) os << " | " << condition_->describe();
    return os.str();
}

}  // namespace ptm
