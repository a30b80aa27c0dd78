// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/controller.hpp"
#include "arbor/msve.hpp"
#include "arbor/tae.hpp"
#include "arbor/workload.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace arbor {

/// Malformed or out-of-range run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct CalibrationConfig {
    int episodes = 100;
    /// Held-out episodes start at this seed.
    std::uint64_t holdout_seed = 99999;
    int holdout_episodes = 50;
    CalibrationOptions options;

    bool operator==(const CalibrationConfig& o) const {
        return episodes == o.episodes && holdout_seed == o.holdout_seed && holdout_episodes == o.holdout_episodes &&
               options.epochs == o.options.epochs && options.learning_rate == o.options.learning_rate &&
               options.seed == o.options.seed && options.max_halvings == o.options.max_halvings;
    }
};

struct RunConfig {
    PolicyParams params;
    WorkloadConfig workload;
    CostModel cost;
    CalibrationConfig calibration;
    std::string policy = "arbor";
    /// Policies compared by `sweep`.
    std::vector<std::string> policies{"full", "arbor", "arbor-norehyd", "tail-only", "sinks-tail", "seq-flat"};
    std::vector<double> rhos{0.25};
    int episodes = 20;
    int threads = 0;
    std::string out_dir = "out";
    /// Trace consumed by `replay`; empty means generate one from `workload`.
    std::string trace;

    bool operator==(const RunConfig&) const = default;
};

/// Every key is optional; unknown keys and out-of-range values throw ConfigError.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

/// Named presets: "config-s", "config-l", "ablation".
RunConfig preset(std::string_view name);
std::vector<std::string> preset_names();

} // namespace arbor
