// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/episode.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace arbor {

/// First line of every CSV report.
inline constexpr const char* kSuccessNote =
    "# success = synthetic proxy over ground-truth critical blocks, not task accuracy";

struct ReportOptions {
    /// Omit the generated-at line so output is byte-stable.
    bool deterministic = false;
    std::uint64_t seed = 0;
};

/// Columns, in order:
/// policy,rho,episodes,success_rate,mean_success_score,mean_peak_tokens,
/// mean_peak_ratio,mean_rehydrations,mean_evictions,mean_simulated_time,
/// mean_policy_fraction,oom_rate
std::vector<std::string> sweep_columns();
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, const ReportOptions& options);

struct EpisodeRow {
    std::string policy;
    double rho = 1.0;
    std::uint64_t seed = 0;
    Metrics metrics;
};

/// Columns, in order:
/// policy,rho,seed,budget,tokens,peak_retained_tokens,peak_pseudo_bytes,
/// rehydrations,evictions,evicted_tokens,prefill_tokens,transitions,
/// pressure_events,decode_seconds,prefill_seconds,policy_seconds,
/// simulated_time,policy_time_fraction,success,success_score,oom,
/// oom_minimal_budget
std::vector<std::string> episode_columns();
void write_episode_csv(std::ostream& out, const std::vector<EpisodeRow>& rows, const ReportOptions& options);

/// Calibrated weights as a `params` fragment that a config can include.
std::string weights_to_json(const MsveWeights& weights, double holdout_spearman);

} // namespace arbor
