// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/controller.hpp"

#include <random>
#include <span>
#include <utility>
#include <vector>

namespace arbor {

using Rng = std::mt19937_64;

/// Shape of one synthetic tree-search episode.
struct WorkloadConfig {
    int branching = 3;
    int depth = 6;
    int expand_count = 64;
    int tokens_per_node = 16;
    double backtrack_prob = 0.3;
    /// Share of all blocks that are ground-truth critical: the solution path
    /// plus enough near-path decoys to reach it.
    double critical_fraction = 0.0;
    double sink_bias = 0.2;
    double recency_decay = 0.5;
    int hh_count = 2;
    int recent_window = 8;
    double hh_boost = 2.0;
    double tau_mean = 0.6;
    double tau_jitter = 0.2;
    double value_noise = 0.05;
    double select_noise = 1.0;
    /// Backtrack targets are ranked by v - locality·(tree distance to the current leaf).
    double locality = 1.0;
    double entropy_noise = 0.05;
    std::int64_t vocab_size = 32000;
    int top_k = 8;
    int sink_count = 4;
    /// (layer, head) pairs an attention row is emitted for on every token.
    std::vector<std::pair<int, int>> rows{{30, 0}, {31, 1}};
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const WorkloadConfig&) const = default;
};

WorkloadConfig config_s();
WorkloadConfig config_l();

struct GroundTruth {
    std::vector<NodeId> critical_blocks;
    NodeId solution_leaf = kNoNode;
    /// Hidden per-node utility in [0, 1]; high for critical blocks.
    std::vector<double> utility;
    /// Membership in the root-to-solution-leaf chain.
    std::vector<bool> on_solution_path;
    /// Per-node retention threshold τ.
    std::vector<double> tau;
    /// Designated heavy-hitter positions per node.
    std::vector<std::vector<TokenPos>> heavy_hitters;

    bool is_critical(NodeId id) const;
    bool operator==(const GroundTruth&) const = default;
};

struct Workload {
    EpisodeTrace trace;
    GroundTruth truth;
};

Workload generate_workload(const WorkloadConfig& cfg);

/// Query context for one synthetic attention row.
struct AttentionContext {
    /// Positions visible to the query, ascending; the last one is the query itself.
    std::vector<TokenPos> positions;
    /// Designated heavy hitters among `positions` with an importance weight.
    std::vector<std::pair<TokenPos, double>> heavy;
};

/// Sink mass on the sink prefix, recency-decaying mass on the recent window,
/// the rest on heavy hitters. Weights sum to 1. Throws Error on an empty context.
AttentionWeights synthetic_attention_row(Rng& rng, const AttentionContext& ctx, const WorkloadConfig& cfg);

/// Boundary distribution whose peak grows with the block's utility.
NextTokenDistribution boundary_distribution(Rng& rng, double utility, const WorkloadConfig& cfg);

/// Retention ratio per node of a finished episode.
VectorXs retention_ratios(const ControllerState& state);

/// Retention ratios with blocks generated on a degraded context (some
/// ancestor not fully held) counted as lost.
VectorXs effective_retention(const ControllerState& state);

/// Every critical block was generated on an intact context, every
/// solution-path block is fully retained, and every other critical block
/// holds at least τ of its span.
bool success_model(const ControllerState& state, const GroundTruth& gt);

/// 1 - max_i U_i·[ratio_i below its requirement]; ≥ 0.5 exactly when
/// success_model holds.
double success_score(const VectorXs& retention, const GroundTruth& gt);

} // namespace arbor
