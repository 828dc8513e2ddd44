#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ptm/error.hpp"
#include "ptm/experiment.hpp"

namespace ex = ptm::experiment;

namespace {

enum Exit { kPass = 0, kCheckFailed = 1, kInvalid = 2, kFailure = 3 };

struct Flags {
    std::string config;
    std::string out;
    std::string format = "json";
    unsigned threads = 1;
};

ex::Json load(const std::string& name, const std::string& path)
{
    if (path.empty()) return {{"experiment", name}};
    std::ifstream is(path);
    if (!is) throw ptm::ValidationError("--config: cannot open " + path);
    ex::Json doc;
    try {
        doc = ex::Json::parse(is);
    } catch (const ex::Json::parse_error& e) {
        throw ptm::ValidationError("--config: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw ptm::ValidationError("--config: expected a JSON object");
    if (!doc.contains("experiment")) doc["experiment"] = name;
    else if (doc["experiment"] != name)
        throw ptm::ValidationError("experiment: config names " + doc["experiment"].dump() + " but subcommand is " +
                                   name);
    return doc;
}

int execute(const std::string& name, const Flags& flags)
{
    try {
        const auto config = ex::ExperimentConfig::parse(load(name, flags.config));
        const auto start = std::chrono::steady_clock::now();
        const auto report = ex::run(config, {flags.threads});
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const std::string text = flags.format == "csv" ? ex::to_csv(report) : ex::to_json(report);

        const std::string path = !flags.out.empty() ? flags.out : config.output_path;
        if (path.empty() || path == "-") {
            std::cout << text;
        } else {
            std::ofstream os(path, std::ios::binary);
            if (!os) throw std::runtime_error("cannot open " + path + " for writing");
            os << text;
            if (!os) throw std::runtime_error("write to " + path + " failed");
        }
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& c : report.checks)
            if (!c.pass) std::cerr << "FAIL " << c.name << "\n";
        std::fprintf(stderr, "%s: %zu checks, %s, %.2f s\n", name.c_str(), report.checks.size(),
                     report.all_pass() ? "all pass" : "some failed", secs);
        return report.all_pass() ? kPass : kCheckFailed;
    } catch (const ptm::ValidationError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Poisson-type counting measures: experiments and checks"};
    app.set_version_flag("--version", ex::version());
    app.require_subcommand(1);

    Flags flags;
    std::string chosen;
    for (const auto& name : ex::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", flags.config, "JSON config file (defaults used when omitted)");
        sub->add_option("--out", flags.out, "report path (default: output_path from config, else stdout)");
        sub->add_option("--format", flags.format, "report format")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->callback([&chosen, name] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInvalid;
    }
    return execute(chosen, flags);
}
