#include <sstream>
#include <string>

#include "doctest.h"
#include "ptm/error.hpp"
#include "ptm/experiment.hpp"

using namespace ptm::experiment;

namespace {

ExperimentConfig cfg(const std::string& text)
{
    return ExperimentConfig::parse(Json::parse(text));
}

std::string validation_message(const std::string& text)
{
    try {
        cfg(text);
    } catch (const ptm::ValidationError& e) {
        return e.what();
    }
    return {};
}

const Check* find(const Report& r, const std::string& name)
{
    for (const auto& c : r.checks)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace

TEST_CASE("unknown keys are rejected with their path")
{
    CHECK(validation_message(R"({"experiment":"laplace","sead":1})").find("sead") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"thin-verify","params":{"aa":0.5}})").find("params.aa") !=
          std::string::npos);
    CHECK(validation_message(R"({"experiment":"thin-verify","params":{"law":{"family":"poisson","lambda":2,"x":1}}})")
              .find("params.law.x") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"thin-verify","params":{"law":{"family":"poisson","lamda":2}}})")
              .find("params.law.lamda: unknown key") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"nope"})").find("experiment") != std::string::npos);
    CHECK(validation_message(R"({"seed":1})").find("experiment") != std::string::npos);
}

TEST_CASE("field preconditions are checked before dispatch")
{
    CHECK(validation_message(R"({"experiment":"thin-verify","params":{"a":1.5}})").find("params.a") !=
          std::string::npos);
    CHECK(validation_message(R"({"experiment":"thin-verify","params":{"law":{"family":"poisson","lambda":-1}}})")
              .find("params.law.lambda") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"sir","params":{"beta":0.5}})").find("params") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"sir","params":{"dt":0}})").find("params.dt") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"compound","params":{"law":{"family":"binomial","n":4,"p":0.5}}})") !=
          "");
    CHECK(validation_message(
              R"({"experiment":"traffic","params":{"region_b":{"lo":[-0.5,-1],"hi":[1,1]}}})")
              .find("region") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"bone-check","params":{"family":{"series":"binomial"}}})")
              .find("params.family.n") != std::string::npos);
    CHECK(validation_message(R"({"experiment":"laplace","seed":-3})").find("seed") != std::string::npos);
}

TEST_CASE("replicates = 0 is rejected for Monte Carlo experiments")
{
    for (const char* name : {"thin-verify", "laplace", "compound", "sir", "traffic"}) {
        const std::string doc = std::string(R"({"experiment":")") + name + R"(","replicates":0})";
        CHECK(validation_message(doc).find("replicates") != std::string::npos);
    }
    CHECK_NOTHROW(cfg(R"({"experiment":"bone-check","replicates":0})"));
    CHECK(ExperimentConfig::parse({{"experiment", "laplace"}, {"seed", 11}, {"replicates", 500}}).seed == 11);
}

TEST_CASE("defaults are echoed and the echo re-parses to the same config")
{
    const auto c = cfg(R"({"experiment":"compound"})");
    CHECK(c.replicates == 200000);
    CHECK(c.params["law"]["family"] == "negative_binomial");
    CHECK(c.params["days"] == 10.0);
    const auto again = ExperimentConfig::parse(c.to_json());
    CHECK(again.to_json() == c.to_json());
    for (const auto& name : experiment_names()) {
        const auto d = cfg(R"({"experiment":")" + name + R"("})");
        CHECK(ExperimentConfig::parse(d.to_json()).to_json() == d.to_json());
    }
}

TEST_CASE("thin-verify Poisson(2), a = 0.5, seed 42 passes")
{
    const auto c = cfg(R"({"experiment":"thin-verify","seed":42,"replicates":100000,
                          "params":{"law":{"family":"poisson","lambda":2},"a":0.5}})");
    const auto r = run(c);
    const Check* chi = find(r, "chi_square");
    REQUIRE(chi);
    CHECK(chi->pass);
    CHECK(r.all_pass());
    CHECK(r.analytic["thinned"]["mean"].get<double>() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bone-check on 1 + t + t^3 reports NotBone")
{
    const auto r = run(cfg(R"({"experiment":"bone-check",
                              "params":{"family":{"coeffs":[1,1,0,1]},"theta":0.5,"a":0.5,"expect":"NotBone"}})"));
    CHECK(r.analytic["classification"] == "NotBone");
    CHECK(r.analytic["max_residual"].get<double>() > 1e-4);
    CHECK(r.all_pass());

    const auto pt = run(cfg(R"({"experiment":"bone-check",
                               "params":{"law":{"family":"negative_binomial","r":3,"theta":0.4},"a":0.3}})"));
    CHECK(pt.analytic["max_residual"].get<double>() < 1e-12);
    CHECK(pt.all_pass());

    const auto geo = run(cfg(R"({"experiment":"bone-check",
                                "params":{"family":{"series":"geometric"},"expect":"PositiveLog"}})"));
    CHECK(geo.all_pass());
}

TEST_CASE("reports are byte-identical across thread counts")
{
    for (const char* doc : {R"({"experiment":"thin-verify","replicates":20000})",
                            R"({"experiment":"laplace","replicates":5000,"params":{"mark_rate":1.0}})",
                            R"({"experiment":"compound","replicates":20000})",
                            R"({"experiment":"sir","replicates":5000,"params":{"times":[2]}})",
                            R"({"experiment":"traffic","replicates":10000})"}) {
        const auto c = cfg(doc);
        const auto one = to_json(run(c, {1}));
        const auto eight = to_json(run(c, {8}));
        CHECK(one == eight);
        CHECK(to_csv(run(c, {3})) == to_csv(run(c, {1})));
    }
}

TEST_CASE("changing the seed changes the estimates")
{
    const auto a = run(cfg(R"({"experiment":"laplace","replicates":2000,"seed":1})"));
    const auto b = run(cfg(R"({"experiment":"laplace","replicates":2000,"seed":2})"));
    CHECK(a.empirical["laplace"]["value"] != b.empirical["laplace"]["value"]);
}

TEST_CASE("JSON emission is canonical and round-trips")
{
    const auto r = run(cfg(R"({"experiment":"sir","replicates":2000,"params":{"times":[1,3]}})"));
    const std::string text = to_json(r);
    CHECK(text == to_json(r));
    const Json back = Json::parse(text);
    CHECK(back["schema_version"] == 1);
    CHECK(back["experiment"] == "sir");
    CHECK(back["version"] == version());
    CHECK(back["checks"].size() == r.checks.size());
    CHECK(back["analytic"]["tau"].get<double>() == r.analytic["tau"].get<double>());
    CHECK(canonical_dump(back) + "\n" == text);
    // keys sorted
    std::string prev;
    for (const auto& [k, v] : back.items()) {
        CHECK(prev < k);
        prev = k;
    }
    // config echo re-runs to the same report
    const auto rerun = run(ExperimentConfig::parse(back["config"]));
    CHECK(to_json(rerun) == text);
}

TEST_CASE("float formatting uses 17 significant digits and nulls for non-finite")
{
    CHECK(canonical_dump(Json(0.1)) == "0.10000000000000001");
    CHECK(canonical_dump(Json(1.0 / 3.0)) == "0.33333333333333331");
    CHECK(canonical_dump(Json(std::nan(""))) == "null");
    CHECK(canonical_dump(Json{{"b", 1}, {"a", Json::array()}}) == "{\n  \"a\": [],\n  \"b\": 1\n}");
}

TEST_CASE("CSV summary has a fixed column set")
{
    for (const char* doc : {R"({"experiment":"bone-check"})", R"({"experiment":"compound","replicates":5000})",
                            R"({"experiment":"traffic","replicates":10000})"}) {
        const auto r = run(cfg(doc));
        std::istringstream is(to_csv(r));
        std::string line;
        std::getline(is, line);
        CHECK(line == "experiment,check,value,reference,stderr,threshold,pass");
        std::size_t rows = 0;
        while (std::getline(is, line)) {
            CHECK(std::count(line.begin(), line.end(), ',') == 6);
            ++rows;
        }
        CHECK(rows == r.checks.size());
    }
}
