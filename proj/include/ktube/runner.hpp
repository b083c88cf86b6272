#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ktube/estimators.hpp"

namespace ktube {

// Validated run description. Built from a JSON config file and/or command
// line overrides; every run is fully determined by (config, seed).
struct RunConfig {
    nlohmann::json tube_spec;
    std::string experiment;
    int n_trajectories = 0;
    std::uint64_t steps_per_trajectory = 0;
    std::uint64_t burn_in = 1000;
    double t_horizon = 0.0;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string output_dir;
    bool gate = false;
    bool dump_trajectories = false;
    // experiment-specific knobs (validated per experiment)
    std::vector<double> tail_xs{0.5, 1.0, 2.0, 5.0};
    std::vector<double> truncations{10.0, 100.0, 1000.0};
    int bins = 0;  // 0 = per-family default
    std::uint64_t n_samples = 100000;
};

// Parses and validates a merged config document. Unknown keys and missing
// required fields raise ConfigError naming the offending key.
RunConfig parse_config(const nlohmann::json& doc);

// Reads `path` (optional), overlays `overrides`, applies the
// KTUBE_OUTPUT_DIR fallback, then validates.
RunConfig load_config(const std::string& path, const nlohmann::json& overrides);

struct RunManifest {
    std::string version;
    nlohmann::json config_echo;
    struct FileEntry {
        std::string name;
        std::string fnv1a64;
        std::uint64_t bytes = 0;
    };
    std::vector<FileEntry> files;
    std::uint64_t anomalies = 0;
    double wall_clock_s = 0.0;
    std::map<std::string, bool> verdicts;
    bool all_pass = true;

    nlohmann::json to_json() const;
};

// Executes the configured experiment, writes the per-statistic CSVs and
// manifest.json under output_dir, and returns the manifest.
RunManifest run(const RunConfig& cfg);

std::string fnv1a64_hex(const std::string& data);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ktube
