// End-to-end acceptance run: one PASS/FAIL line per criterion, with timing.
// Seeds are fixed here once; nothing is retried.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "ptm/bone.hpp"
#include "ptm/experiment.hpp"
#include "ptm/stc.hpp"

using namespace ptm;
namespace ex = ptm::experiment;

namespace {

unsigned threads()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

MeasureSpec unit_spec(const CountingLaw& law)
{
    return {law, SpatialLaw::uniform(0.0, 1.0), {}};
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void report_failures(Outcome& out, const ex::Report& r)
{
    for (const auto& c : r.checks) out.require(c.pass, r.experiment + "/" + c.name);
}

ex::Report run_json(const std::string& text, unsigned n_threads)
{
    return ex::run(ex::ExperimentConfig::parse(ex::Json::parse(text)), {n_threads});
}

// 1
Outcome bone_identity()
{
    Outcome out;
    const auto grid = uniform_grid(101);
    double worst = 0.0;
    for (double a : {0.25, 0.5, 0.75}) {
        for (double lambda : {0.1, 0.5, 1.0, 2.0, 5.0}) worst = std::max(worst, bone_residual(CountingLaw::poisson(lambda), a, grid));
        for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) worst = std::max(worst, bone_residual(CountingLaw::binomial(10, p), a, grid));
        for (double th : {0.1, 0.3, 0.5, 0.7, 0.9})
            worst = std::max(worst, bone_residual(CountingLaw::negative_binomial(2.0, th), a, grid));
    }
    out.require(worst < 1e-12, "over 1e-12");
    out.detail += (out.detail.empty() ? "" : "; ") + std::string("max residual ") + fmt("%.3g", worst);
    return out;
}

// 2
Outcome bone_refutation()
{
    Outcome out;
    const auto grid = uniform_grid(101);
    const std::vector<std::pair<std::string, NnpsFamily>> families{
        {"1+t+t^3", NnpsFamily::from_coeffs({1, 1, 0, 1})}, {"(1+t)e^t", NnpsFamily::exp_times_linear()}};
    for (const auto& [name, fam] : families) {
        const auto v = nnps_bone_test(fam, 0.5, 0.5, grid);
        out.require(v.classification == BoneClass::NotBone, name + " not NotBone");
        out.require(v.max_residual > 1e-4, name + " residual " + fmt("%.3g", v.max_residual));
        out.detail += (out.detail.empty() ? "" : "; ") + name + " residual " + fmt("%.3g", v.max_residual);
    }
    return out;
}

// 3
Outcome cauchy()
{
    Outcome out;
    const auto s = log_grid(1e-3, 0.5);
    for (double a : {0.01, 0.7, 3.0, 25.0}) {
        const auto v = cauchy_classify([a](double t) { return a * t; }, s);
        out.require(v.classification == BoneClass::LinearLog && v.A && std::abs(*v.A - a) <= 1e-6 * a,
                    "linear A=" + fmt("%g", a));
    }
    for (auto [a, b] : {std::pair{0.2, 1.0}, std::pair{-0.8, -2.0}, std::pair{1.5, 0.4}, std::pair{-0.3, -5.0}}) {
        const auto v = cauchy_classify([a = a, b = b](double t) { return b * std::log1p(a * t); }, s);
        out.require(v.A && v.B && std::abs(*v.A - a) <= 1e-4 * std::abs(a) && std::abs(*v.B - b) <= 1e-4 * std::abs(b),
                    "log A=" + fmt("%g", a));
    }
    if (out.pass) out.detail = "4 linear, 4 logarithmic";
    return out;
}

// 4 and 5 share the sampled counts.
struct Sample {
    std::vector<std::int64_t> counts;
    std::vector<double> nf, ka, ka2, ka3;
};

Sample sample(const MeasureSpec& spec, const IntervalSet& cell, const std::function<double(double)>& f,
              std::size_t n, std::uint64_t seed)
{
    Sample s;
    s.counts.resize(n);
    s.nf.resize(n);
    StreamFactory streams(seed);
    parallel_for(n, threads(), [&](std::size_t i) {
        Stream rng = streams.stream(i);
        const auto p = sample_pattern(spec, rng);
        std::int64_t k = 0;
        double sum = 0.0;
        for (const auto& q : p.points) {
            const double x = q.location().scalar();
            k += cell.contains(x) ? 1 : 0;
            sum += f(x);
        }
        s.counts[i] = k;
        s.nf[i] = sum;
    });
    for (auto k : s.counts) {
        const double d = static_cast<double>(k);
        s.ka.push_back(d);
        s.ka2.push_back(d * (d - 1));
        s.ka3.push_back(d * (d - 1) * (d - 2));
    }
    return s;
}

const std::vector<CountingLaw>& suite()
{
    static const std::vector<CountingLaw> laws{CountingLaw::poisson(2.0), CountingLaw::binomial(8, 0.5),
                                               CountingLaw::negative_binomial(2.0, 0.5)};
    return laws;
}

Outcome thinning()
{
    Outcome out;
    std::uint64_t seed = 4000;
    int passed = 0;
    for (const auto& law : suite())
        for (double a : {0.25, 0.5, 0.9}) {
            const auto cell = IntervalSet::interval(0.0, a);
            const auto s = sample(unit_spec(law), cell, [](double) { return 0.0; }, 100000, seed++);
            const auto thinned = thin_map(law, a);
            const auto chi = stats::chi_square_counts(s.counts, [&](std::int64_t j) { return pmf(thinned, j); });
            out.require(chi.pass, law.describe() + " a=" + fmt("%g", a) + " stat " + fmt("%.3g", chi.statistic));
            passed += chi.pass;
        }
    if (out.pass) out.detail = std::to_string(passed) + "/9 at 99%";
    return out;
}

Outcome moment_formulas()
{
    Outcome out;
    std::uint64_t seed = 5000;
    const auto cell = IntervalSet::interval(0.0, 0.4);
    const auto smooth = TestFunction::smooth([](const MarkedPoint& p) { return std::sin(3 * p.location().scalar()) + 1; });
    const auto ind = TestFunction::indicator(cell);
    int checks = 0;
    for (const auto& law : suite()) {
        const auto spec = unit_spec(law);
        for (const auto* f : {&smooth, &ind}) {
            const auto s = sample(spec, cell, [&](double x) { return f->f(MarkedPoint{{Value::scalar(x)}}); }, 100000,
                                  seed++);
            const auto m = moments_analytic(spec, *f);
            const std::string tag = law.describe() + (f == &ind ? " 1_A" : " smooth");
            out.require(stats::mean_estimate(s.nf).within(m.mean), tag + " E Nf");
            out.require(stats::variance_estimate(s.nf).within(m.variance), tag + " Var Nf");
            checks += 2;
            if (f == &ind) {
                const auto lm = moments(law);
                const double a = 0.4;
                out.require(stats::mean_estimate(s.ka).within(a * lm.mean), tag + " E K_A");
                out.require(stats::mean_estimate(s.ka2).within(a * a * lm.factorial2()), tag + " E K_A(K_A-1)");
                // third factorial moment by exact summation of the pmf
                double f3 = 0.0;
                for (std::int64_t k = 3; k < 400; ++k) f3 += pmf(law, k) * double(k) * (k - 1) * (k - 2);
                out.require(stats::mean_estimate(s.ka3).within(a * a * a * f3), tag + " E (K_A)_3");
                checks += 3;
            }
        }
    }
    if (out.pass) out.detail = std::to_string(checks) + " moments within 4 stderr";
    return out;
}

// 6
Outcome laplace()
{
    Outcome out;
    const auto ind = TestFunction::indicator(IntervalSet({{0.1, 0.4}, {0.7, 0.8}}), 1.3);
    std::uint64_t seed = 6000;
    for (const auto& law : suite()) {
        const auto spec = unit_spec(law);
        const auto est = laplace_mc(spec, ind.f, 100000, {seed++, threads()});
        out.require(est.within(laplace_analytic(spec, ind)), law.describe());
    }
    const auto r = run_json(R"({"experiment":"laplace","seed":6100,"replicates":100000,
        "params":{"law":{"family":"negative_binomial","r":2,"theta":0.5},"slope":1,"mark_rate":1.5,"mark_weight":0.5}})",
                            threads());
    report_failures(out, r);
    if (out.pass) out.detail = "3 unmarked + 1 marked within 4 stderr";
    return out;
}

// 7
Outcome compound()
{
    Outcome out;
    const auto p = run_json(R"({"experiment":"compound","seed":7000,"replicates":1000000,
        "params":{"law":{"family":"poisson","lambda":4}}})",
                            threads());
    const auto nb = run_json(R"({"experiment":"compound","seed":7001,"replicates":1000000,
        "params":{"law":{"family":"negative_binomial","r":2,"theta":0.5}}})",
                             threads());
    report_failures(out, p);
    report_failures(out, nb);
    out.require(p.analytic["Cov"].get<double>() == 0.0, "Poisson analytic Cov not 0");
    bool has_positive = false;
    for (const auto& c : nb.checks) has_positive |= c.name == "Cov_positive";
    out.require(has_positive, "NB Cov_positive check missing");
    if (out.pass)
        out.detail = "Poisson cov " + fmt("%.3g", p.empirical["Cov"]["value"].get<double>()) + ", NB cov " +
                     fmt("%.3g", nb.empirical["Cov"]["value"].get<double>()) + " (analytic " +
                     fmt("%.4g", nb.analytic["Cov"].get<double>()) + ")";
    return out;
}

// 8
Outcome sir()
{
    Outcome out;
    const auto r = run_json(R"({"experiment":"sir","seed":8000,"replicates":100000,
        "params":{"n":20,"times":[1,3,10]}})",
                            threads());
    report_failures(out, r);
    if (out.pass)
        out.detail = "tau " + fmt("%.10f", r.analytic["tau"].get<double>()) + ", " + std::to_string(r.checks.size()) +
                     " checks";
    return out;
}

// 9
Outcome traffic()
{
    Outcome out;
    const char* laws[] = {R"({"family":"poisson","lambda":10})", R"({"family":"binomial","n":20,"p":0.5})",
                          R"({"family":"negative_binomial","r":4,"theta":0.6})"};
    const char* signs[] = {"zero", "negative", "positive"};
    std::uint64_t seed = 9000;
    for (int i = 0; i < 3; ++i) {
        const std::string cfg = std::string(R"({"experiment":"traffic","seed":)") + std::to_string(seed++) +
                                R"(,"replicates":100000,"params":{"law":)" + laws[i] + R"(,"expect_sign":")" +
                                signs[i] + R"("}})";
        const auto r = run_json(cfg, threads());
        report_failures(out, r);
        out.detail += (out.detail.empty() ? "" : ", ") + r.empirical["verdict"].get<std::string>();
    }
    return out;
}

// 10
Outcome atomic()
{
    Outcome out;
    const auto grid = uniform_grid(101);
    const double two[] = {0.0, 0.0, 1.0};
    const auto d = atomic_counterexample(two, grid);
    const auto p = atomic_counterexample(CountingLaw::poisson(1.0), grid);
    out.require(d.max_residual < 1e-10, "deterministic 2: " + fmt("%.3g", d.max_residual));
    out.require(p.max_residual < 1e-10, "Poisson(1): " + fmt("%.3g", p.max_residual));
    if (out.pass) out.detail = "residuals " + fmt("%.3g", d.max_residual) + ", " + fmt("%.3g", p.max_residual);
    return out;
}

// 11
Outcome determinism()
{
    Outcome out;
    for (const auto& name : ex::experiment_names()) {
        const auto cfg = ex::ExperimentConfig::parse({{"experiment", name}, {"seed", 11}});
        const auto one = ex::to_json(ex::run(cfg, {1}));
        const auto eight = ex::to_json(ex::run(cfg, {8}));
        out.require(one == eight, name + " differs");
        out.require(ex::to_csv(ex::run(cfg, {8})) == ex::to_csv(ex::run(cfg, {1})), name + " csv differs");
    }
    if (out.pass) out.detail = std::to_string(ex::experiment_names().size()) + " experiments byte-identical";
    return out;
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {1, "bone identity for PT families", 1, bone_identity},
        {2, "bone refutation for non-PT families", 5, bone_refutation},
        {3, "Cauchy classifier parameter recovery", 1, cauchy},
        {4, "thinned count distribution", 60, thinning},
        {5, "moment formulas", 30, moment_formulas},
        {6, "Laplace functionals", 30, laplace},
        {7, "compound spend model", 120, compound},
        {8, "SIR structure", 120, sir},
        {9, "traffic covariance signs", 120, traffic},
        {10, "atomic counterexample", 1, atomic},
        {11, "determinism across thread counts", 600, determinism},
    };
    int failed = 0;
    std::printf("threads: %u\n", threads());
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs >= c.limit_s) {
            out.pass = false;
            out.detail += "; over time limit " + fmt("%g s", c.limit_s);
        }
        failed += !out.pass;
        std::printf("%s criterion %2d: %s [%.2f s] %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
