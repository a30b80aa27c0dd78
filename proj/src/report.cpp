// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/report.hpp"

#include <json.hpp>

#include <charconv>
#include <ctime>
#include <ostream>

namespace arbor {

namespace {

void write_preamble(std::ostream& out, const ReportOptions& options, const std::vector<std::string>& cols) {
    out << kSuccessNote << '\n';
    if (!options.deterministic) {
        const std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        out << "# generated " << buf << " seed " << options.seed << '\n';
    }
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
}

// Shortest form that parses back to the same double.
std::string num(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

} // namespace

std::vector<std::string> sweep_columns() {
    return {"policy",           "rho",           "episodes",          "success_rate",
            "mean_success_score", "mean_peak_tokens", "mean_peak_ratio", "mean_rehydrations",
            "mean_evictions",   "mean_simulated_time", "mean_policy_fraction", "oom_rate"};
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, const ReportOptions& options) {
    write_preamble(out, options, sweep_columns());
    for (const auto& r : rows) {
        out << r.policy << ',' << num(r.rho) << ',' << r.episodes << ',' << num(r.success_rate) << ','
            << num(r.mean_success_score) << ',' << num(r.mean_peak_tokens) << ',' << num(r.mean_peak_ratio) << ','
            << num(r.mean_rehydrations) << ',' << num(r.mean_evictions) << ',' << num(r.mean_simulated_time) << ','
            << num(r.mean_policy_fraction) << ',' << num(r.oom_rate) << '\n';
    }
}

std::vector<std::string> episode_columns() {
    return {"policy",          "rho",             "seed",           "budget",
            "tokens",          "peak_retained_tokens", "peak_pseudo_bytes", "rehydrations",
            "evictions",       "evicted_tokens",  "prefill_tokens", "transitions",
            "pressure_events", "decode_seconds",  "prefill_seconds", "policy_seconds",
            "simulated_time",  "policy_time_fraction", "success",   "success_score",
            "oom",             "oom_minimal_budget"};
}

void write_episode_csv(std::ostream& out, const std::vector<EpisodeRow>& rows, const ReportOptions& options) {
    write_preamble(out, options, episode_columns());
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.policy << ',' << num(r.rho) << ',' << r.seed << ',' << m.budget << ',' << m.tokens << ','
            << m.peak_retained_tokens << ',' << num(m.peak_pseudo_bytes) << ',' << m.rehydration_count << ','
            << m.eviction_count << ',' << m.evicted_tokens << ',' << m.prefill_tokens << ',' << m.transition_events
            << ',' << m.pressure_events << ',' << num(m.decode_seconds) << ',' << num(m.prefill_seconds) << ','
            << num(m.policy_seconds) << ',' << num(m.simulated_time) << ',' << num(m.policy_time_fraction) << ','
            << (m.success ? 1 : 0) << ',' << num(m.success_score) << ',' << (m.oom ? 1 : 0) << ','
            << m.oom_minimal_budget << '\n';
    }
}

std::string weights_to_json(const MsveWeights& w, double holdout_spearman) {
    nlohmann::json j;
    j["params"]["theta"] = std::vector<double>(w.theta.begin(), w.theta.end());
    j["params"]["feature_mean"] = std::vector<double>(w.feature_mean.begin(), w.feature_mean.end());
    j["holdout_spearman"] = holdout_spearman;
    return j.dump(2) + "\n";
}

} // namespace arbor
