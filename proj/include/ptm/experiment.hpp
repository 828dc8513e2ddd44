#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ptm::experiment {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Experiments runnable from a config file.
const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 42;
    std::uint64_t replicates = 0;
    Json params = Json::object();
    std::string output_path;

    /// Parses and validates a config document. Keys other than experiment,
    /// seed, replicates, params and output_path are rejected, as are unknown
    /// keys inside params. Missing fields take per-experiment defaults.
    static ExperimentConfig parse(const Json& doc);
    /// The config with every default filled in, as echoed in reports.
    Json to_json() const;
};

/// One pass/fail entry. `stderr_` is absent for analytic checks.
struct Check {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    std::optional<double> stderr_;
    double threshold = 0.0;
    bool pass = false;
};

struct Report {
    std::string experiment;
    std::string version;
    Json config;
    Json analytic = Json::object();
    Json empirical = Json::object();
    std::vector<Check> checks;
    std::vector<std::string> warnings;

    bool all_pass() const;
};

struct RunOptions {
    unsigned threads = 1;
};

std::string version();

Report run(const ExperimentConfig& config, const RunOptions& opts = {});

/// Canonical JSON: sorted keys, two-space indent, floats as %.17g.
std::string to_json(const Report& report);
/// Columns: experiment,check,value,reference,stderr,threshold,pass.
std::string to_csv(const Report& report);

/// Canonical serialisation of any JSON value.
std::string canonical_dump(const Json& value);

}  // namespace ptm::experiment
