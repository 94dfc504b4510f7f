#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "collapse/krf.hpp"

namespace collapse::harness {

using Json = nlohmann::ordered_json;

/// Bad JSON or a schema violation; the message starts with the field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string name;
    double horizon = 10.0;
    std::string dt_policy = "adaptive";  // or "fixed"
    double dt = 1e-2;                    // initial (adaptive) or constant (fixed) step
    double tol = 1e-8;
    std::string output_dir;
    std::uint64_t seed = 0;
    Json params;                               // experiment payload, defaults filled
    std::map<std::string, double> thresholds;  // acceptance bounds, defaults filled

    double param(const std::string& key) const { return params.at(key).get<double>(); }
    int int_param(const std::string& key) const { return params.at(key).get<int>(); }
    AdaptiveConfig step_config() const;
    /// Canonical JSON with every default spelled out.
    Json to_json() const;
};

ExperimentConfig validate_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct AcceptanceEntry {
    std::string name;
    double measured = 0;
    double bound = 0;
    std::string relation;  // "<=" or ">="
    bool pass = false;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct ReportBundle {
    std::string experiment;
    Table diagnostics;
    std::vector<RateReport> rates;
    std::vector<AcceptanceEntry> acceptance;
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> plots;

    bool passed() const;
    const AcceptanceEntry& entry(const std::string& name) const;
    /// Appends and returns a check of measured <= bound (or >= bound).
    const AcceptanceEntry& check(std::string name, double measured, double bound, bool at_most = true);
};

struct ExperimentInfo {
    std::string name;
    std::string description;
    std::string claims;
};

const std::vector<ExperimentInfo>& experiments();

ReportBundle run_experiment(const ExperimentConfig& cfg);

/// diagnostics.csv, rates.json, acceptance.json and one .dat file per plot.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace collapse::harness
