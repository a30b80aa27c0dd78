// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/common.hpp"
#include "arbor/evict.hpp"
#include "arbor/signals.hpp"
#include "arbor/tae.hpp"
#include "arbor/tree.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace arbor {

enum class EventKind { OpenBlock, Token, CloseBlock, Transition, SetSearchValue };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct AttentionRow {
    int layer = 0;
    int head = 0;
    AttentionWeights weights;

    bool operator==(const AttentionRow&) const = default;
};

/// One line of an episode trace.
struct TraceEvent {
    EventKind type = EventKind::Token;
    std::int64_t ts = 0;
    NodeId node = kNoNode;
    /// open_block only; kNoNode for the root.
    NodeId parent = kNoNode;
    /// transition only.
    NodeId target = kNoNode;
    /// set_search_value only.
    double value = 0.0;
    /// token only.
    std::vector<AttentionRow> attn_rows;
    std::optional<NextTokenDistribution> next_dist;

    bool operator==(const TraceEvent&) const = default;
};

using EpisodeTrace = std::vector<TraceEvent>;

enum class PolicyEventKind { Boundary, Transition, Pressure };

struct PolicyEvent {
    PolicyEventKind kind = PolicyEventKind::Pressure;
    NodeId node = kNoNode;
    std::int64_t timestamp = 0;
};

struct Counters {
    std::int64_t rehydrations = 0;
    std::int64_t prefill_tokens = 0;
    std::int64_t evictions = 0;
    std::int64_t evicted_tokens = 0;
    std::int64_t boundary_events = 0;
    std::int64_t transition_events = 0;
    std::int64_t pressure_events = 0;
    /// Blocks visited by policy handlers; drives the modeled policy cost.
    std::int64_t policy_ops = 0;
    double policy_seconds = 0.0;
};

/// One point of the memory-dynamics series.
struct MemorySample {
    std::int64_t step = 0;
    std::int64_t ts = 0;
    std::int64_t total = 0;
    std::string label;
};

/// Eviction / rehydration / transition audit entry.
struct AuditRecord {
    std::int64_t ts = 0;
    std::string op;  // "evict", "rehydrate", "transition"
    NodeId node = kNoNode;
    std::int64_t before = 0;
    std::int64_t after = 0;
    std::int64_t n = 0;
    TokenPos span_start = 0;
    TokenPos span_end = 0;
    /// First and last evicted position, or the restored span on rehydrate.
    TokenPos min_pos = -1;
    TokenPos max_pos = -1;
    /// transition only: whether every Path* block holds its full span.
    bool path_full = true;
    std::vector<NodeId> path;
};

struct CostModel {
    double decode_seconds_per_token = 0.025;
    /// Prefill cost per token as a fraction of decode cost.
    double prefill_ratio = 0.2;
    double policy_seconds_per_op = 2e-6;
    /// Measure handler wall-clock instead of using the op-count model.
    bool instrumented = false;

    bool operator==(const CostModel&) const = default;
};

struct ControllerOptions {
    std::int64_t sink_count = 4;
    double bytes_per_token = 131072.0;
    std::size_t top_k = kDefaultTopK;
    AttentionSlice slice;
    CostModel cost;
    bool record_series = false;
    bool record_audit = false;
};

/// Everything a cache policy may read or mutate.
struct ControllerState {
    explicit ControllerState(PolicyParams params, ControllerOptions options = {});

    ThoughtTree tree;
    KVStore store;
    AttentionLedger ledger;
    PolicyParams params;
    ControllerOptions options;
    Counters counters;

    bool pressure_pending = false;
    bool waterline_armed = true;
    std::int64_t peak_total = 0;
    std::int64_t now = 0;
    std::int64_t step = 0;

    std::vector<MemorySample> series;
    std::vector<AuditRecord> audit;

    /// Per node: every ancestor was fully held while the block was generated.
    std::vector<bool> intact_context;

    /// Boundary distribution carried by the latest token of the open block.
    std::optional<NextTokenDistribution> pending_boundary;

    const TreeGeometry& geometry() const { return tree.geometry(); }
    std::int64_t tokens_since_close(const ThoughtBlock& b) const { return tree.next_position() - (b.span_end + 1); }
    void sample(const std::string& label);
    void observe_peak();

    /// Non-zero while a policy handler runs; retained sets may only shrink
    /// or be restored inside a handler.
    int handler_depth = 0;
};

/// Event interface shared by the structure-aware policy and every baseline.
class CachePolicy {
public:
    virtual ~CachePolicy() = default;
    virtual std::string name() const = 0;
    virtual void on_boundary(ControllerState& state, NodeId node) = 0;
    virtual void on_transition(ControllerState& state, NodeId new_leaf) = 0;
    virtual void on_pressure(ControllerState& state) = 0;
};

/// Knobs that turn the structure-aware policy into its ablation variants.
struct ArborOptions {
    bool rehydrate = true;
    /// Per-feature mask over [v, u, a]; a masked feature is held at its calibration mean.
    std::array<bool, 3> use_feature{true, true, true};
    /// When set, every block gets this score instead of the MSVE output.
    std::optional<double> constant_score;
};

/// MSVE scoring + tree-aware allocation + token-extractive eviction, driven
/// by Boundary / Transition / Pressure events with lazy rehydration.
class ArborPolicy final : public CachePolicy {
public:
    explicit ArborPolicy(ArborOptions options = {}, std::string name = "arbor")
        : options_(options), name_(std::move(name)) {}

    std::string name() const override { return name_; }
    void on_boundary(ControllerState& state, NodeId node) override;
    void on_transition(ControllerState& state, NodeId new_leaf) override;
    void on_pressure(ControllerState& state) override;

    const ArborOptions& options() const noexcept { return options_; }

private:
    ArborOptions options_;
    std::string name_;
};

/// Refreshes a_i and s_i of one closed block from the current ledger.
double refresh_score(ControllerState& state, ThoughtBlock& b, const ArborOptions& options);

void handle_boundary(ControllerState& state, NodeId node, const ArborOptions& options = {});
void handle_transition(ControllerState& state, NodeId new_leaf, const ArborOptions& options = {});
void handle_pressure(ControllerState& state, const ArborOptions& options = {});

/// Total the pressure handler brings memory down to. The waterline only
/// decides when it runs; it releases down to B, not to B - δ.
std::int64_t pressure_release_target(const PolicyParams& params);

/// Enqueues Pressure when total ≥ B - δ (once per crossing) or total > B.
/// Returns true when an event was enqueued.
bool check_waterline(ControllerState& state);

/// Shrinks keep counts in ascending (priority, id) order toward the floors
/// until Σ keep ≤ target. Returns the resulting counts.
std::vector<std::int64_t> reduce_to_target(std::vector<std::int64_t> keep, const std::vector<std::int64_t>& floors,
                                           const std::vector<double>& priorities,
                                           const std::vector<NodeId>& candidates, std::int64_t target);

/// Brings one block down to `k` retained tokens using the token-extractive rule.
/// Returns the number of evicted tokens.
std::int64_t shrink_block(ControllerState& state, ThoughtBlock& b, std::int64_t k);

struct RunResult {
    std::int64_t tokens = 0;
    std::int64_t peak_total = 0;
    double peak_pseudo_bytes = 0.0;
    Counters counters;
    bool oom = false;
    std::int64_t oom_minimal_budget = 0;
    std::string oom_message;
};

/// Replays an ordered event stream through `policy`. InfeasibleBudget is
/// caught and reported as oom; malformed streams throw Error.
RunResult run(ControllerState& state, CachePolicy& policy, const EpisodeTrace& events);

} // namespace arbor
