// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/controller.hpp"
#include "arbor/policies.hpp"
#include "arbor/workload.hpp"

#include <string>
#include <vector>

namespace arbor {

struct Metrics {
    std::int64_t budget = 0;
    std::int64_t tokens = 0;
    std::int64_t peak_retained_tokens = 0;
    double peak_pseudo_bytes = 0.0;
    std::int64_t rehydration_count = 0;
    std::int64_t eviction_count = 0;
    std::int64_t evicted_tokens = 0;
    std::int64_t prefill_tokens = 0;
    std::int64_t transition_events = 0;
    std::int64_t pressure_events = 0;
    double decode_seconds = 0.0;
    double prefill_seconds = 0.0;
    double policy_seconds = 0.0;
    double simulated_time = 0.0;
    double policy_time_fraction = 0.0;
    bool success = false;
    double success_score = 0.0;
    bool oom = false;
    std::int64_t oom_minimal_budget = 0;

    bool operator==(const Metrics&) const = default;
};

struct EpisodeResult {
    Metrics metrics;
    std::vector<MemorySample> series;
    std::vector<AuditRecord> audit;
    VectorXs retention;
};

/// Tokens held by full retention at its peak: every generated token.
std::int64_t full_kv_peak(const EpisodeTrace& trace);

/// B = ⌊ρ · FullKV peak⌋.
std::int64_t budget_for_ratio(double rho, std::int64_t full_peak);

/// Replays `trace` under `policy` and scores the final state against `gt`.
EpisodeResult run_episode(CachePolicy& policy, const EpisodeTrace& trace, const GroundTruth& gt,
                          const PolicyParams& params, const ControllerOptions& options = {});

/// Convenience overload: builds the named policy over `params`.
EpisodeResult run_episode(const std::string& policy, const EpisodeTrace& trace, const GroundTruth& gt,
                          const PolicyParams& params, const ControllerOptions& options = {});

struct SweepRow {
    std::string policy;
    double rho = 1.0;
    int episodes = 0;
    double success_rate = 0.0;
    double mean_success_score = 0.0;
    double mean_peak_tokens = 0.0;
    double mean_peak_ratio = 0.0;
    double mean_rehydrations = 0.0;
    double mean_evictions = 0.0;
    double mean_simulated_time = 0.0;
    double mean_policy_fraction = 0.0;
    double oom_rate = 0.0;

    bool operator==(const SweepRow&) const = default;
};

struct SweepOptions {
    int episodes = 1;
    /// Worker threads; 0 picks the hardware concurrency.
    int threads = 0;
    ControllerOptions controller;
    /// Keep the full per-episode results (series, audit) in `episodes`.
    bool keep_episodes = false;
};

struct SweepCell {
    std::string policy;
    double rho = 1.0;
    std::vector<EpisodeResult> episodes;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepCell> cells;
};

/// Episode e uses workload seed cfg.seed + e. Rows are ordered by
/// (policy, ρ) as given; aggregation is independent of thread count.
SweepResult sweep(const std::vector<std::string>& policies, const std::vector<double>& rhos,
                  const WorkloadConfig& cfg, const PolicyParams& params, const SweepOptions& options);

SweepRow aggregate(const std::string& policy, double rho, const std::vector<Metrics>& metrics);

/// Leave-one-out labels from `episodes` full-retention replays with seeds
/// cfg.seed, cfg.seed + 1, ...
std::vector<CalibrationExample> collect_calibration_examples(const WorkloadConfig& cfg, int episodes,
                                                             const PolicyParams& params);

/// Final-state MSVE score and ground-truth utility for every block of
/// `episodes` full-retention replays.
struct ScoredBlocks {
    std::vector<double> score;
    std::vector<double> utility;
};
ScoredBlocks score_blocks(const WorkloadConfig& cfg, int episodes, const MsveWeights& weights,
                          const PolicyParams& params);

/// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

} // namespace arbor
