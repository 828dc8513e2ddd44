#include "ptm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ptm/bone.hpp"
#include "ptm/compound.hpp"
#include "ptm/counting.hpp"
#include "ptm/error.hpp"
#include "ptm/sir.hpp"
#include "ptm/stats.hpp"
#include "ptm/stc.hpp"
#include "ptm/traffic.hpp"

#ifndef PTM_VERSION
#define PTM_VERSION "0.1.0"
#endif

namespace ptm::experiment {

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& msg)
{
    throw ValidationError(path + ": " + msg);
}

// Reads an object field by field, filling defaults into `echo` and rejecting
// keys that were never asked for.
class Fields {
public:
    Fields(const Json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) invalid(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return obj_.contains(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt)
    {
        used_.insert(key);
        if (!obj_.contains(key)) {
            if (!fallback) invalid(at(key), "required");
            echo_[key] = *fallback;
            return *fallback;
        }
        const Json& v = obj_.at(key);
        if (!v.is_number()) invalid(at(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) invalid(at(key), "must be finite");
        echo_[key] = v;
        return d;
    }

    std::optional<double> maybe_number(const std::string& key)
    {
        if (!obj_.contains(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return number(key);
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt)
    {
        used_.insert(key);
        if (!obj_.contains(key)) {
            if (!fallback) invalid(at(key), "required");
            echo_[key] = *fallback;
            return *fallback;
        }
        const Json& v = obj_.at(key);
        if (!v.is_number_integer()) invalid(at(key), "expected an integer");
        echo_[key] = v;
        return v.get<std::int64_t>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt)
    {
        used_.insert(key);
        if (!obj_.contains(key)) {
            if (!fallback) invalid(at(key), "required");
            echo_[key] = *fallback;
            return *fallback;
        }
        const Json& v = obj_.at(key);
        if (!v.is_string()) invalid(at(key), "expected a string");
        echo_[key] = v;
        return v.get<std::string>();
    }

    std::optional<std::string> maybe_string(const std::string& key)
    {
        if (!obj_.contains(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return string(key);
    }

    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt)
    {
        used_.insert(key);
        if (!obj_.contains(key)) {
            if (!fallback) invalid(at(key), "required");
            echo_[key] = *fallback;
            return *fallback;
        }
        const Json& v = obj_.at(key);
        if (!v.is_array()) invalid(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) invalid(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
            if (!std::isfinite(out.back())) invalid(at(key) + "[" + std::to_string(i) + "]", "must be finite");
        }
        echo_[key] = v;
        return out;
    }

    /// Nested object; `fallback` stands in when absent. The caller stores
    /// the nested echo with `put`.
    const Json& object(const std::string& key, const Json& fallback)
    {
        used_.insert(key);
        if (!obj_.contains(key)) return fallback;
        const Json& v = obj_.at(key);
        if (!v.is_object()) invalid(at(key), "expected an object");
        return v;
    }

    const Json* raw(const std::string& key)
    {
        used_.insert(key);
        return obj_.contains(key) ? &obj_.at(key) : nullptr;
    }

    /// Rejects keys outside `allowed` before any field is read, so a typo is
    /// reported as itself rather than as a missing field.
    void only(std::initializer_list<const char*> allowed) const
    {
        for (const auto& [k, v] : obj_.items())
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
                invalid(at(k), "unknown key");
    }

    void put(const std::string& key, Json v) { echo_[key] = std::move(v); }

    Json finish()
    {
        for (const auto& [k, v] : obj_.items())
            if (!used_.count(k)) invalid(at(k), "unknown key");
        return echo_;
    }

private:
    const Json& obj_;
    std::string path_;
    std::set<std::string> used_;
    Json echo_ = Json::object();
};

template <class F>
auto guarded(const std::string& path, F&& f)
{
    try {
        return f();
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        invalid(path, e.what());
    }
}

void require(bool ok, const std::string& path, const std::string& msg)
{
    if (!ok) invalid(path, msg);
}

// ---------------------------------------------------------------- laws

NnpsFamily read_family(Fields& f)
{
    const auto series = f.maybe_string("series");
    const Json* coeffs = f.raw("coeffs");
    require(series.has_value() != (coeffs != nullptr), f.at("series"), "give exactly one of series or coeffs");
    if (coeffs) {
        const auto c = f.numbers("coeffs");
        return guarded(f.at("coeffs"), [&] { return NnpsFamily::from_coeffs(c); });
    }
    if (*series == "geometric") return NnpsFamily::geometric();
    if (*series == "exponential") return NnpsFamily::exponential();
    if (*series == "exp_linear") return NnpsFamily::exp_times_linear();
    if (*series == "binomial") {
        const auto n = f.integer("n");
        require(n >= 1 && n <= 100000, f.at("n"), "must be between 1 and 100000");
        return NnpsFamily::binomial(static_cast<int>(n));
    }
    invalid(f.at("series"), "unknown series '" + *series + "' (geometric, exponential, exp_linear, binomial)");
}

CountingLaw read_law(const Json& doc, const std::string& path, Json* echo)
{
    Fields f(doc, path);
    const auto family = f.string("family");
    CountingLaw law = [&]() -> CountingLaw {
        if (family == "poisson") {
            f.only({"family", "lambda"});
            const double l = f.number("lambda");
            return guarded(f.at("lambda"), [&] { return CountingLaw::poisson(l); });
        }
        if (family == "binomial") {
            f.only({"family", "n", "p"});
            const auto n = f.integer("n");
            require(n >= 1 && n <= 1000000, f.at("n"), "must be between 1 and 10^6");
            const double p = f.number("p");
            return guarded(f.at("p"), [&] { return CountingLaw::binomial(static_cast<int>(n), p); });
        }
        if (family == "negative_binomial") {
            f.only({"family", "r", "theta"});
            const double r = f.number("r");
            const double th = f.number("theta");
            return guarded(path, [&] { return CountingLaw::negative_binomial(r, th); });
        }
        if (family == "nnps") {
            f.only({"family", "theta", "series", "coeffs", "n"});
            const double th = f.number("theta");
            const auto fam = read_family(f);
            return guarded(f.at("theta"), [&] { return CountingLaw::nnps(fam, th); });
        }
        invalid(f.at("family"), "unknown family '" + family + "' (poisson, binomial, negative_binomial, nnps)");
    }();
    *echo = f.finish();
    return law;
}

Json law_json(const CountingLaw& law)
{
    const Moments m = moments(law);
    return {{"law", law.describe()}, {"mean", m.mean}, {"variance", m.variance}};
}

std::vector<Interval> read_intervals(Fields& f, const std::string& key, std::vector<Interval> fallback)
{
    const Json* raw = f.raw(key);
    if (!raw) {
        Json e = Json::array();
        for (const auto& i : fallback) e.push_back({i.lo, i.hi});
        f.put(key, e);
        return fallback;
    }
    require(raw->is_array(), f.at(key), "expected an array of [lo, hi] pairs");
    std::vector<Interval> out;
    for (std::size_t i = 0; i < raw->size(); ++i) {
        const Json& p = (*raw)[i];
        const std::string here = f.at(key) + "[" + std::to_string(i) + "]";
        require(p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number(), here, "expected [lo, hi]");
        const double lo = p[0].get<double>(), hi = p[1].get<double>();
        require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, here, "needs finite lo < hi");
        out.push_back({lo, hi});
    }
    f.put(key, *raw);
    return out;
}

Box read_box(const Json& doc, const std::string& path, Json* echo)
{
    Fields f(doc, path);
    f.only({"lo", "hi"});
    const auto lo = f.numbers("lo");
    const auto hi = f.numbers("hi");
    *echo = f.finish();
    require(lo.size() == hi.size() && !lo.empty() && lo.size() <= 3, path, "lo and hi need the same 1 to 3 coordinates");
    for (std::size_t d = 0; d < lo.size(); ++d) require(lo[d] < hi[d], path, "needs lo < hi on every axis");
    return guarded(path, [&] { return Box::make(lo, hi); });
}

// ---------------------------------------------------------------- checks

Check within(const std::string& name, const stats::Estimate& est, double ref, double k = 4.0)
{
    return {name, est.value, ref, est.stderr_, k, est.within(ref, k)};
}

Check below(const std::string& name, double value, double threshold)
{
    return {name, value, 0.0, std::nullopt, threshold, value < threshold};
}

Check chi_check(const std::string& name, const stats::ChiSquareResult& r)
{
    return {name, r.statistic, static_cast<double>(r.dof), std::nullopt, r.critical, r.pass};
}

Json chi_json(const stats::ChiSquareResult& r)
{
    return {{"statistic", r.statistic}, {"dof", r.dof}, {"p_value", r.p_value}, {"critical", r.critical},
            {"cells", r.cells}};
}

Json est_json(const stats::Estimate& e)
{
    return {{"value", e.value}, {"stderr", e.stderr_}};
}

std::uint64_t replicates_or(const ExperimentConfig& c, std::uint64_t fallback)
{
    return c.replicates ? c.replicates : fallback;
}

// ---------------------------------------------------------------- experiments

struct Spec {
    std::uint64_t default_replicates;
    std::uint64_t min_replicates;  // 0: Monte Carlo not used
    Json (*normalise)(const Json&);
    void (*run)(const ExperimentConfig&, const RunOptions&, Report&);
};

// bone-check ---------------------------------------------------------------

Json bone_normalise(const Json& params)
{
    Fields f(params, "params");
    Json fam_echo;
    if (f.has("law")) {
        require(!f.has("family"), "params", "give either law or family, not both");
        Json law_echo;
        const auto law = read_law(f.object("law", {}), "params.law", &law_echo);
        require(law.is_pt(), "params.law.family", "bone residual needs a PT family; use family for NNPS series");
        f.put("law", law_echo);
    } else {
        static const Json def = {{"coeffs", {1, 1, 0, 1}}};
        Fields ff(f.object("family", def), "params.family");
        guarded("params.family", [&] { return read_family(ff); });
        f.put("family", ff.finish());
        const double th = f.number("theta", 0.5);
        require(th > 0.0, f.at("theta"), "must be positive");
        if (auto e = f.maybe_string("expect")) {
            static const std::set<std::string> ok{"LinearLog", "PositiveLog", "NegativeLog", "NotBone"};
            require(ok.count(*e) > 0, f.at("expect"), "must be LinearLog, PositiveLog, NegativeLog or NotBone");
        }
    }
    const double a = f.number("a", 0.5);
    require(a > 0.0 && a < 1.0, f.at("a"), "must lie in (0, 1)");
    const auto n = f.integer("t_points", 101);
    require(n >= 2 && n <= 100001, f.at("t_points"), "must be between 2 and 100001");
    return f.finish();
}

void bone_run(const ExperimentConfig& c, const RunOptions&, Report& r)
{
    const Json& p = c.params;
    const auto grid = uniform_grid(p["t_points"].get<int>());
    const double a = p["a"].get<double>();
    if (p.contains("law")) {
        Json echo;
        const auto law = read_law(p["law"], "params.law", &echo);
        const double res = bone_residual(law, a, grid);
        r.analytic["law"] = law.describe();
        r.analytic["thinned"] = thin_map(law, a).describe();
        r.analytic["max_residual"] = res;
        r.checks.push_back(below("bone_residual", res, 1e-12));
        return;
    }
    Fields ff(p["family"], "params.family");
    const auto fam = read_family(ff);
    const auto v = nnps_bone_test(fam, p["theta"].get<double>(), a, grid);
    r.analytic["family"] = fam.name();
    r.analytic["classification"] = to_string(v.classification);
    r.analytic["max_residual"] = v.max_residual;
    r.analytic["tolerance"] = v.tolerance;
    r.analytic["A"] = v.A ? Json(*v.A) : Json(nullptr);
    r.analytic["B"] = v.B ? Json(*v.B) : Json(nullptr);
    r.analytic["h"] = v.h ? Json(*v.h) : Json(nullptr);
    if (!v.notes.empty()) r.analytic["notes"] = v.notes;
    const bool not_bone = v.classification == BoneClass::NotBone;
    r.checks.push_back({"verdict_consistent", v.max_residual, v.tolerance, std::nullopt, v.tolerance,
                        not_bone == (v.max_residual > v.tolerance)});
    if (p.contains("expect")) {
        const bool match = to_string(v.classification) == p["expect"].get<std::string>();
        r.checks.push_back({"classification_" + p["expect"].get<std::string>(), match ? 1.0 : 0.0, 1.0, std::nullopt,
                            0.0, match});
    }
}

// thin-verify --------------------------------------------------------------

Json thin_normalise(const Json& params)
{
    Fields f(params, "params");
    static const Json def = {{"family", "poisson"}, {"lambda", 2.0}};
    Json echo;
    const auto law = read_law(f.object("law", def), "params.law", &echo);
    require(law.is_pt(), "params.law.family", "thinning needs a PT family");
    f.put("law", echo);
    const double a = f.number("a", 0.5);
    require(a > 0.0 && a <= 1.0, f.at("a"), "must lie in (0, 1]");
    return f.finish();
}

void thin_run(const ExperimentConfig& c, const RunOptions& o, Report& r)
{
    Json echo;
    const auto law = read_law(c.params["law"], "params.law", &echo);
    const double a = c.params["a"].get<double>();
    const auto n = replicates_or(c, 100000);
    const MeasureSpec spec{law, SpatialLaw::uniform(0.0, 1.0), {}};
    const auto cell = IntervalSet::interval(0.0, a);
    const auto thinned = restrict(spec, cell).counting;

    std::vector<std::int64_t> counts(n);
    StreamFactory streams(c.seed);
    parallel_for(n, o.threads, [&](std::size_t i) {
        Stream rng = streams.stream(i);
        const auto pattern = sample_pattern(spec, rng);
        counts[i] = std::count_if(pattern.points.begin(), pattern.points.end(),
                                  [&](const MarkedPoint& p) { return cell.contains(p.location().scalar()); });
    });
    std::vector<double> k(n), kk(n);
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = static_cast<double>(counts[i]);
        kk[i] = k[i] * (k[i] - 1.0);
    }
    const auto chi = stats::chi_square_counts(counts, [&](std::int64_t j) { return pmf(thinned, j); });
    const Moments m = moments(law);
    const auto mean = stats::mean_estimate(k);
    const auto fact = stats::mean_estimate(kk);

    r.analytic["law"] = law_json(law);
    r.analytic["thinned"] = law_json(thinned);
    r.analytic["mean"] = a * m.mean;
    r.analytic["factorial_moment"] = a * a * m.factorial2();
    r.empirical["mean"] = est_json(mean);
    r.empirical["factorial_moment"] = est_json(fact);
    r.empirical["chi_square"] = chi_json(chi);
    r.checks.push_back(chi_check("chi_square", chi));
    r.checks.push_back(within("mean", mean, a * m.mean));
    r.checks.push_back(within("factorial_moment", fact, a * a * m.factorial2()));
}

// laplace ------------------------------------------------------------------

Json laplace_normalise(const Json& params)
{
    Fields f(params, "params");
    static const Json def_law = {{"family", "poisson"}, {"lambda", 1.0}};
    Json echo;
    read_law(f.object("law", def_law), "params.law", &echo);
    f.put("law", echo);
    const double lo = f.number("lo", 0.0);
    const double hi = f.number("hi", 1.0);
    require(lo < hi, f.at("hi"), "must exceed lo");
    read_intervals(f, "intervals", {{0.0, 0.5}});
    const double w = f.number("weight", 1.0);
    const double slope = f.number("slope", 0.0);
    const double icpt = f.number("intercept", 0.0);
    require(w >= 0.0, f.at("weight"), "must be non-negative");
    require(icpt + std::min(slope * lo, slope * hi) >= 0.0, f.at("slope"), "f must be non-negative on [lo, hi]");
    if (f.has("mark_rate")) {
        require(f.number("mark_rate") > 0.0, f.at("mark_rate"), "must be positive");
        require(f.number("mark_weight", 1.0) >= 0.0, f.at("mark_weight"), "must be non-negative");
    } else {
        require(!f.has("mark_weight"), f.at("mark_weight"), "needs mark_rate");
        f.raw("mark_rate");
    }
    return f.finish();
}

void laplace_run(const ExperimentConfig& c, const RunOptions& o, Report& r)
{
    const Json& p = c.params;
    Json echo;
    const auto law = read_law(p["law"], "params.law", &echo);
    std::vector<Interval> iv;
    for (const auto& x : p["intervals"]) iv.push_back({x[0].get<double>(), x[1].get<double>()});
    const IntervalSet set(iv);
    const double w = p["weight"].get<double>(), slope = p["slope"].get<double>(), icpt = p["intercept"].get<double>();
    MeasureSpec spec{law, SpatialLaw::uniform(p["lo"].get<double>(), p["hi"].get<double>()), {}};
    double mw = 0.0;
    if (p.contains("mark_rate")) {
        sir::SirParams sp{2.0, p["mark_rate"].get<double>(), 1.0};
        spec = mark(std::move(spec), sir::recovery_kernel(sp));
        mw = p["mark_weight"].get<double>();
    }
    const bool marked = !spec.marks.empty();
    TestFunction f{[=](const MarkedPoint& q) {
                       const double x = q.location().scalar();
                       double v = icpt + slope * x + (set.contains(x) ? w : 0.0);
                       if (marked) v += mw * (q.mark(0).scalar() - x);
                       return v;
                   },
                   set.breakpoints()};
    const double exact = laplace_analytic(spec, f);
    const auto est = laplace_mc(spec, f.f, replicates_or(c, 100000), {c.seed, o.threads});
    r.analytic["law"] = law_json(law);
    r.analytic["laplace"] = exact;
    r.analytic["marked"] = marked;
    r.empirical["laplace"] = est_json(est);
    r.checks.push_back(within("laplace", est, exact));
}

// compound -----------------------------------------------------------------

Json compound_normalise(const Json& params)
{
    Fields f(params, "params");
    static const Json def_law = {{"family", "negative_binomial"}, {"r", 2.0}, {"theta", 0.5}};
    Json echo;
    const auto law = read_law(f.object("law", def_law), "params.law", &echo);
    f.put("law", echo);
    const double days = f.number("days", 10.0);
    const auto breaks = f.numbers("breaks", std::vector<double>{4.0});
    const Json* probs = f.raw("probs");
    static const Json def_probs = {{0.7, 0.3}, {0.2, 0.8}};
    const Json& pj = probs ? *probs : def_probs;
    require(pj.is_array(), f.at("probs"), "expected an array of probability rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < pj.size(); ++i) {
        require(pj[i].is_array(), f.at("probs") + "[" + std::to_string(i) + "]", "expected an array");
        std::vector<double> row;
        for (const auto& v : pj[i]) {
            require(v.is_number(), f.at("probs") + "[" + std::to_string(i) + "]", "expected numbers");
            row.push_back(v.get<double>());
        }
        rows.push_back(row);
    }
    f.put("probs", pj);
    const auto mean = f.numbers("spend_mean", std::vector<double>{2.0, 5.0});
    const auto var = f.numbers("spend_var", std::vector<double>{1.0, 4.0});
    read_intervals(f, "subset", {{0.0, days / 2}});
    guarded("params", [&] { return compound::StoreModel::make(law, days, breaks, rows, mean, var); });
    return f.finish();
}

compound::StoreModel store_from(const Json& p)
{
    Json echo;
    auto law = read_law(p["law"], "params.law", &echo);
    return compound::StoreModel::make(law, p["days"].get<double>(), p["breaks"].get<std::vector<double>>(),
                                      p["probs"].get<std::vector<std::vector<double>>>(),
                                      p["spend_mean"].get<std::vector<double>>(),
                                      p["spend_var"].get<std::vector<double>>());
}

void compound_run(const ExperimentConfig& c, const RunOptions& o, Report& r)
{
    const auto model = store_from(c.params);
    std::vector<Interval> iv;
    for (const auto& x : c.params["subset"]) iv.push_back({x[0].get<double>(), x[1].get<double>()});
    const IntervalSet a(iv);
    const auto d = compound::decompose_total(model, a);
    const auto s = compound::simulate_store(model, a, replicates_or(c, 200000), {c.seed, o.threads});

    r.analytic["law"] = law_json(model.counting);
    r.analytic["spend_law"] = compound::to_string(model.spend_law);
    r.analytic["EZ"] = d.ez;
    r.analytic["EZ_A"] = d.ez_a;
    r.analytic["EZ_Ac"] = d.ez_ac;
    r.analytic["VarZ"] = d.var_z;
    r.analytic["VarZ_A"] = d.var_a;
    r.analytic["VarZ_Ac"] = d.var_ac;
    r.analytic["Cov"] = d.cov;
    r.empirical["EZ"] = est_json(s.mean_z);
    r.empirical["EZ_A"] = est_json(s.mean_a);
    r.empirical["EZ_Ac"] = est_json(s.mean_ac);
    r.empirical["VarZ"] = est_json(s.var_z);
    r.empirical["Cov"] = est_json(s.cov);

    const double scale = std::max(1.0, std::abs(d.ez));
    r.checks.push_back({"additivity_mean", d.ez_a + d.ez_ac, d.ez, std::nullopt, 1e-12 * scale,
                        std::abs(d.ez_a + d.ez_ac - d.ez) <= 1e-12 * scale});
    const double vs = std::max(1.0, std::abs(d.var_z));
    const double vsum = d.var_a + d.var_ac + 2.0 * d.cov;
    r.checks.push_back({"additivity_variance", vsum, d.var_z, std::nullopt, 1e-12 * vs,
                        std::abs(vsum - d.var_z) <= 1e-12 * vs});
    r.checks.push_back(within("EZ", s.mean_z, d.ez));
    r.checks.push_back(within("EZ_A", s.mean_a, d.ez_a));
    r.checks.push_back(within("VarZ", s.var_z, d.var_z));
    r.checks.push_back(within("Cov", s.cov, d.cov));
    if (d.cov > 0.0)
        r.checks.push_back({"Cov_positive", s.cov.value - 4.0 * s.cov.stderr_, 0.0, s.cov.stderr_, 4.0,
                            s.cov.value - 4.0 * s.cov.stderr_ > 0.0});
}

// sir ----------------------------------------------------------------------

Json sir_normalise(const Json& params)
{
    Fields f(params, "params");
    sir::SirParams sp{f.number("beta", 2.0), f.number("gamma", 1.0), f.number("rho", 0.01)};
    guarded("params", [&] {
        sp.validate();
        return 0;
    });
    require(f.number("dt", 1e-3) > 0.0, f.at("dt"), "must be positive");
    if (auto t = f.maybe_number("t_max")) require(*t > 0.0, f.at("t_max"), "must be positive");
    const auto n = f.integer("n", 20);
    require(n >= 1 && n <= 1000000, f.at("n"), "must be between 1 and 10^6");
    for (double t : f.numbers("times", std::vector<double>{1.0, 3.0, 10.0}))
        require(t >= 0.0, f.at("times"), "times must be non-negative");
    if (f.maybe_string("trajectory_csv")) require(f.integer("trajectory_stride", 100) >= 1, f.at("trajectory_stride"), "must be positive");
    else f.raw("trajectory_stride");
    return f.finish();
}

void sir_run(const ExperimentConfig& c, const RunOptions& o, Report& r)
{
    const Json& p = c.params;
    const sir::SirParams sp{p["beta"].get<double>(), p["gamma"].get<double>(), p["rho"].get<double>()};
    sir::SolveOptions so{p["dt"].get<double>(), std::nullopt};
    if (p.contains("t_max")) so.t_max = p["t_max"].get<double>();
    const auto tr = sir::solve_sir(sp, so);
    r.warnings = tr.warnings;

    double drift = 0.0, ident = 0.0;
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        drift = std::max(drift, std::abs(tr.S[k] + tr.I[k] + tr.R[k] - 1.0 - sp.rho));
        ident = std::max(ident, std::abs(tr.S[k] * std::exp(sp.r0() * tr.R[k]) - 1.0));
    }
    const double tau_res = std::abs(1.0 - tr.tau - std::exp(-sp.r0() * (tr.tau + sp.rho)));
    r.analytic["R0"] = sp.r0();
    r.analytic["tau"] = tr.tau;
    r.analytic["t_max"] = tr.t_max();
    r.analytic["S_t_max"] = tr.S.back();
    r.analytic["I_t_max"] = tr.I.back();
    r.analytic["conservation_drift"] = drift;
    r.analytic["sir2_residual"] = ident;
    r.analytic["tau_residual"] = tau_res;
    r.checks.push_back(below("conservation", drift, 1e-6));
    r.checks.push_back(below("sir2_identity", ident, 1e-6));
    r.checks.push_back(below("tau_residual", tau_res, 1e-12));

    if (p.contains("trajectory_csv")) {
        const auto path = p["trajectory_csv"].get<std::string>();
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path + " for writing");
        const auto stride = static_cast<std::size_t>(p["trajectory_stride"].get<std::int64_t>());
        os << "t,S,I,R\n";
        char buf[128];
        for (std::size_t k = 0; k < tr.t.size(); k += stride) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", tr.t[k], tr.S[k], tr.I[k], tr.R[k]);
            os << buf;
        }
    }

    const auto n = p["n"].get<std::int64_t>();
    const auto reps = replicates_or(c, 100000);
    StreamFactory root(c.seed);
    Json times = Json::array();
    std::uint64_t tag = 0;
    for (const auto& tj : p["times"]) {
        const double t = tj.get<double>();
        const auto sim = sir::simulate_labels(n, tr, t, reps, {root.child(tag++).seed(), o.threads});
        const double st = sir::state_at(tr, t)[0];
        const auto labels = sir::label_probabilities(tr, t);
        std::vector<std::int64_t> ka(reps);
        std::vector<double> kd(reps);
        for (std::size_t i = 0; i < reps; ++i) {
            ka[i] = sim.k_i[i] + sim.k_r[i];
            kd[i] = static_cast<double>(ka[i]);
        }
        const auto binom = CountingLaw::binomial(static_cast<int>(n), 1.0 - st);
        const auto chi = stats::chi_square_counts(ka, [&](std::int64_t k) { return pmf(binom, k); });
        const auto mean = stats::mean_estimate(kd);
        const auto var = stats::variance_estimate(kd);
        char label[32];
        std::snprintf(label, sizeof label, "t=%g", t);
        const std::string sfx = label;
        times.push_back({{"t", t},
                         {"S_t", st},
                         {"label_probabilities", {labels.s, labels.i, labels.r}},
                         {"K_A_mean", est_json(mean)},
                         {"K_A_variance", est_json(var)},
                         {"chi_square", chi_json(chi)}});
        r.checks.push_back(chi_check("K_A_binomial_" + sfx, chi));
        r.checks.push_back(within("K_A_mean_" + sfx, mean, static_cast<double>(n) * (1.0 - st)));
        r.checks.push_back(within("K_A_variance_" + sfx, var, static_cast<double>(n) * st * (1.0 - st)));
    }
    r.empirical["times"] = times;
}

// traffic ------------------------------------------------------------------

traffic::TrafficConfig traffic_from(const Json& p, Json* echo_out)
{
    Fields f(p, "params");
    static const Json def_law = {{"family", "binomial"}, {"n", 20}, {"p", 0.5}};
    Json e;
    const auto law = read_law(f.object("law", def_law), "params.law", &e);
    f.put("law", e);

    static const Json def_state = {{"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}};
    static const Json def_init = {{"lo", {-0.5, -0.5}}, {"hi", {0.5, 0.5}}};
    const Box state = read_box(f.object("state_space", def_state), "params.state_space", &e);
    f.put("state_space", e);
    const Box init = read_box(f.object("initial", def_init), "params.initial", &e);
    f.put("initial", e);

    static const Json def_motion = {{"kind", "circular"}, {"omega_lo", 0.5}, {"omega_hi", 2.0}};
    Fields m(f.object("motion", def_motion), "params.motion");
    const auto kind = m.string("kind");
    if (kind == "circular") m.only({"kind", "omega_lo", "omega_hi"});
    else if (kind == "brownian") m.only({"kind", "sigma2"});
    else if (kind == "waypoint") m.only({"kind", "speed_lo", "speed_hi"});
    traffic::MotionKernel motion{traffic::BrownianGrid{}, state};
    if (kind == "circular") motion.kind = traffic::CircularOrbit{m.number("omega_lo"), m.number("omega_hi")};
    else if (kind == "brownian") motion.kind = traffic::BrownianGrid{m.number("sigma2")};
    else if (kind == "waypoint") motion.kind = traffic::RandomWaypoint{m.number("speed_lo"), m.number("speed_hi")};
    else invalid(m.at("kind"), "unknown motion '" + kind + "' (circular, brownian, waypoint)");
    f.put("motion", m.finish());

    std::optional<traffic::ArrivalWindow> arrivals;
    if (f.has("arrivals")) {
        Fields w(f.object("arrivals", {}), "params.arrivals");
        arrivals = traffic::ArrivalWindow{w.number("lo"), w.number("hi")};
        f.put("arrivals", w.finish());
    } else {
        f.raw("arrivals");
    }
    const auto life = f.maybe_number("lifetime_rate");
    const double t = f.number("query_time", 0.7);

    traffic::TrafficConfig cfg{law, guarded("params.initial", [&] { return SpatialLaw::uniform_box(init); }),
                               motion, arrivals, life, t};
    guarded("params", [&] {
        cfg.validate();
        return 0;
    });

    static const Json def_a = {{"lo", {-1.0, -1.0}}, {"hi", {0.0, 1.0}}};
    static const Json def_b = {{"lo", {0.0, -1.0}}, {"hi", {1.0, 1.0}}};
    const Box a = read_box(f.object("region_a", def_a), "params.region_a", &e);
    f.put("region_a", e);
    const Box b = read_box(f.object("region_b", def_b), "params.region_b", &e);
    f.put("region_b", e);
    require(a.dim == state.dim && b.dim == state.dim, "params.region_a", "regions must match the state dimension");
    require(!a.overlaps(b), "params.region_b", "regions overlap");
    if (auto s = f.maybe_string("expect_sign"))
        require(*s == "zero" || *s == "negative" || *s == "positive", f.at("expect_sign"),
                "must be zero, negative or positive");
    if (f.maybe_string("snapshot_csv")) require(f.integer("snapshots", 10) >= 1, f.at("snapshots"), "must be positive");
    else f.raw("snapshots");
    if (echo_out) *echo_out = f.finish();
    return cfg;
}

Json traffic_normalise(const Json& params)
{
    Json echo;
    traffic_from(params, &echo);
    return echo;
}

Box box_from(const Json& j)
{
    const auto lo = j["lo"].get<std::vector<double>>();
    const auto hi = j["hi"].get<std::vector<double>>();
    return Box::make(lo, hi);
}

void traffic_run(const ExperimentConfig& c, const RunOptions& o, Report& r)
{
    const Json& p = c.params;
    const auto cfg = traffic_from(p, nullptr);
    const Box a = box_from(p["region_a"]);
    const Box b = box_from(p["region_b"]);
    StreamFactory root(c.seed);
    const auto exp = traffic::covariance_sign_experiment(cfg, a, b, replicates_or(c, 100000),
                                                         {root.child(0).seed(), o.threads});
    r.analytic["law"] = law_json(cfg.counting);
    r.analytic["motion"] = cfg.motion.name();
    r.analytic["alive_fraction"] = traffic::alive_fraction(cfg);
    r.analytic["mass_a"] = exp.mass_a;
    r.analytic["mass_b"] = exp.mass_b;
    r.analytic["covariance"] = exp.analytic;
    r.empirical["covariance"] = est_json(exp.cov);
    r.empirical["verdict"] = traffic::to_string(exp.verdict);
    r.checks.push_back(within("covariance", exp.cov, exp.analytic));

    std::optional<std::string> expect;
    if (p.contains("expect_sign")) expect = p["expect_sign"].get<std::string>();
    else if (std::holds_alternative<Poisson>(cfg.counting.variant())) expect = "zero";
    else if (std::holds_alternative<Binomial>(cfg.counting.variant())) expect = "negative";
    else if (std::holds_alternative<NegativeBinomial>(cfg.counting.variant())) expect = "positive";
    if (expect) {
        r.analytic["expected_sign"] = *expect;
        const bool ok = traffic::to_string(exp.verdict) == *expect;
        r.checks.push_back({"sign_" + *expect, ok ? 1.0 : 0.0, 1.0, std::nullopt, 0.0, ok});
    }

    if (p.contains("snapshot_csv")) {
        const auto count = static_cast<std::size_t>(p["snapshots"].get<std::int64_t>());
        std::vector<traffic::Snapshot> snaps(count);
        const StreamFactory sf = root.child(1);
        for (std::size_t i = 0; i < count; ++i) {
            Stream rng = sf.stream(i);
            snaps[i] = traffic::simulate_snapshot(cfg, rng);
        }
        const auto path = p["snapshot_csv"].get<std::string>();
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path + " for writing");
        traffic::write_snapshot_csv(os, snaps);
    }
}

const std::map<std::string, Spec>& registry()
{
    static const std::map<std::string, Spec> r{
        {"bone-check", {0, 0, bone_normalise, bone_run}},
        {"thin-verify", {100000, 100, thin_normalise, thin_run}},
        {"laplace", {100000, 100, laplace_normalise, laplace_run}},
        {"compound", {200000, 2, compound_normalise, compound_run}},
        {"sir", {100000, 2, sir_normalise, sir_run}},
        {"traffic", {100000, 10000, traffic_normalise, traffic_run}},
    };
    return r;
}

void dump(const Json& v, std::string& out, int indent)
{
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (v.type()) {
        case Json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [k, x] : v.items()) {
                if (!first) out += ",\n";
                first = false;
                out += inner + Json(k).dump() + ": ";
                dump(x, out, indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ",\n";
                out += inner;
                dump(v[i], out, indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float: {
            const double d = v.get<double>();
            if (!std::isfinite(d)) {
                out += "null";
                return;
            }
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            out += buf;
            return;
        }
        default:
            out += v.dump();
    }
}

bool non_negative_integer(const Json& v)
{
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, s] : registry()) v.push_back(k);
        return v;
    }();
    return names;
}

std::string version()
{
    return PTM_VERSION;
}

ExperimentConfig ExperimentConfig::parse(const Json& doc)
{
    Fields f(doc, "");
    ExperimentConfig c;
    c.experiment = f.string("experiment");
    const auto it = registry().find(c.experiment);
    if (it == registry().end()) {
        std::string known;
        for (const auto& n : experiment_names()) known += (known.empty() ? "" : ", ") + n;
        invalid("experiment", "unknown experiment '" + c.experiment + "' (" + known + ")");
    }
    const Spec& spec = it->second;

    if (const Json* s = f.raw("seed")) {
        if (!non_negative_integer(*s)) invalid("seed", "expected a non-negative 64-bit integer");
        c.seed = s->get<std::uint64_t>();
    }
    if (const Json* r = f.raw("replicates")) {
        if (!non_negative_integer(*r)) invalid("replicates", "expected a non-negative integer");
        c.replicates = r->get<std::uint64_t>();
        if (spec.min_replicates && c.replicates < spec.min_replicates)
            invalid("replicates", c.experiment + " needs at least " + std::to_string(spec.min_replicates));
    } else {
        c.replicates = spec.default_replicates;
    }
    if (c.replicates > 100'000'000) invalid("replicates", "at most 10^8");
    if (const Json* o = f.raw("output_path")) {
        if (!o->is_string()) invalid("output_path", "expected a string");
        c.output_path = o->get<std::string>();
    }
    const Json* params = f.raw("params");
    c.params = spec.normalise(params ? *params : Json::object());
    f.finish();
    return c;
}

Json ExperimentConfig::to_json() const
{
    Json j = {{"experiment", experiment}, {"seed", seed}, {"replicates", replicates}, {"params", params}};
    if (!output_path.empty()) j["output_path"] = output_path;
    return j;
}

bool Report::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Report run(const ExperimentConfig& config, const RunOptions& opts)
{
    const auto it = registry().find(config.experiment);
    if (it == registry().end()) throw ValidationError("experiment: unknown experiment '" + config.experiment + "'");
    Report r;
    r.experiment = config.experiment;
    r.version = version();
    r.config = config.to_json();
    RunOptions o = opts;
    o.threads = std::max(1u, o.threads);
    try {
        it->second.run(config, o, r);
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        throw Error(config.experiment + ": " + e.what());
    }
    return r;
}

std::string canonical_dump(const Json& value)
{
    std::string out;
    dump(value, out, 0);
    return out;
}

std::string to_json(const Report& report)
{
    Json checks = Json::array();
    for (const auto& c : report.checks) {
        Json j = {{"name", c.name}, {"value", c.value}, {"reference", c.reference}, {"threshold", c.threshold},
                  {"pass", c.pass}};
        j["stderr"] = c.stderr_ ? Json(*c.stderr_) : Json(nullptr);
        checks.push_back(j);
    }
    const Json doc = {{"schema_version", kSchemaVersion},
                      {"experiment", report.experiment},
                      {"version", report.version},
                      {"config", report.config},
                      {"analytic", report.analytic},
                      {"empirical", report.empirical},
                      {"checks", checks},
                      {"warnings", report.warnings},
                      {"all_pass", report.all_pass()}};
    return canonical_dump(doc) + "\n";
}

std::string to_csv(const Report& report)
{
    std::string out = "experiment,check,value,reference,stderr,threshold,pass\n";
    for (const auto& c : report.checks) {
        out += report.experiment + "," + c.name + "," + num(c.value) + "," + num(c.reference) + "," +
               (c.stderr_ ? num(*c.stderr_) : std::string()) + "," + num(c.threshold) + "," +
               (c.pass ? "true" : "false") + "\n";
    }
    return out;
}

}  // namespace ptm::experiment
