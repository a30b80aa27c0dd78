// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/controller.hpp"

#include "arbor/msve.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace arbor {

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::OpenBlock: return "open_block";
    case EventKind::Token: return "token";
    case EventKind::CloseBlock: return "close_block";
    case EventKind::Transition: return "transition";
    case EventKind::SetSearchValue: return "set_search_value";
    }
    return "?";
}

EventKind event_kind_from_string(std::string_view name) {
    for (auto k : {EventKind::OpenBlock, EventKind::Token, EventKind::CloseBlock, EventKind::Transition,
                   EventKind::SetSearchValue}) {
        if (to_string(k) == name) return k;
    }
    throw Error("arbor: unknown event type '" + std::string(name) + "'");
}

ControllerState::ControllerState(PolicyParams p, ControllerOptions o)
    : store(o.sink_count, o.bytes_per_token), ledger(o.slice), params(std::move(p)), options(std::move(o)) {
    params.validate();
}

void ControllerState::sample(const std::string& label) {
    if (!options.record_series) return;
    series.push_back({step, now, store.total(), label});
}

void ControllerState::observe_peak() { peak_total = std::max(peak_total, store.total()); }

namespace {

struct HandlerScope {
    explicit HandlerScope(ControllerState& s) : state(s) { ++state.handler_depth; }
    ~HandlerScope() { --state.handler_depth; }
    ControllerState& state;
};

bool closed(const ThoughtBlock& b) { return !b.is_open(); }

void audit_block(ControllerState& state, const char* op, const ThoughtBlock& b, std::int64_t before,
                 std::int64_t after, TokenPos lo, TokenPos hi) {
    if (!state.options.record_audit) return;
    AuditRecord r;
    r.ts = state.now;
    r.op = op;
    r.node = b.id;
    r.before = before;
    r.after = after;
    r.n = b.n();
    r.span_start = b.span_start;
    r.span_end = b.span_end;
    r.min_pos = lo;
    r.max_pos = hi;
    state.audit.push_back(std::move(r));
}

double static_keep_ratio(const ControllerState& state, const ThoughtBlock& b) {
    const auto& g = state.geometry();
    return retention_ratio(b.score, b.depth, g.distances[b.id], g.contains(b.id), state.params);
}

void refresh_all(ControllerState& state, const ArborOptions& options) {
    for (auto& b : state.tree.blocks()) {
        if (!closed(b)) continue;
        refresh_score(state, state.tree.block(b.id), options);
    }
    state.counters.policy_ops += static_cast<std::int64_t>(state.tree.size());
}

std::int64_t held(const ControllerState& state, NodeId id) { return state.store.retained_count(id); }

/// Waterfill then chunked reduction over off-path closed blocks. When
/// `path_full` is set, Path* blocks are accounted at their full span.
void relieve(ControllerState& state, bool path_full) {
    const auto& tree = state.tree;
    const auto& g = state.geometry();
    const auto count = tree.size();

    std::vector<std::int64_t> caps(count);
    for (const auto& b : tree.blocks()) {
        const bool prot = b.is_open() || g.contains(b.id);
        caps[b.id] = (prot && path_full) ? b.n() : held(state, b.id);
    }
    auto alloc = allocate(tree, state.params, AllocationMode::Waterfill, caps);

    std::vector<NodeId> off;
    std::vector<std::int64_t> floors(count, 0);
    std::vector<double> prio(count, 0.0);
    for (const auto& b : tree.blocks()) {
        const bool prot = b.is_open() || g.contains(b.id);
        floors[b.id] = alloc.keep[b.id];
        if (prot) continue;
        off.push_back(b.id);
        floors[b.id] = std::min(block_floor(b.n(), state.params), caps[b.id]);
        prio[b.id] = priority(b, g, state.params);
    }
    const auto keep = reduce_to_target(alloc.keep, floors, prio, off, pressure_release_target(state.params));
    state.counters.policy_ops += static_cast<std::int64_t>(count);

    for (auto id : off) {
        auto& b = state.tree.block(id);
        if (keep[id] < held(state, id)) shrink_block(state, b, keep[id]);
    }
}

} // namespace

double refresh_score(ControllerState& state, ThoughtBlock& b, const ArborOptions& options) {
    ARBOR_CHECK(closed(b), "cannot score an open block");
    b.attention_agg =
        squash_attention(block_attention_aggregate(state.ledger, b, state.tokens_since_close(b)));
    if (options.constant_score) {
        b.score = *options.constant_score;
        return b.score;
    }
    Vector3s phi = feature_vector(b);
    for (int j = 0; j < 3; ++j) {
        if (!options.use_feature[j]) phi(j) = state.params.theta.feature_mean(j);
    }
    b.score = msve_score(phi, state.params.theta);
    return b.score;
}

std::int64_t shrink_block(ControllerState& state, ThoughtBlock& b, std::int64_t k) {
    if (state.handler_depth <= 0) {
        throw InvariantViolation("arbor: retained set changed outside a policy handler");
    }
    const std::int64_t before = held(state, b.id);
    if (k >= before) return 0;
    const auto rs = build_retained_set(b, k, state.ledger, state.params, state.store);
    std::vector<TokenPos> dropped;
    {
        const auto& cur = state.store.retained(b.id);
        std::set_difference(cur.begin(), cur.end(), rs.positions.begin(), rs.positions.end(),
                            std::back_inserter(dropped));
    }
    const auto evicted = apply_eviction(state.store, state.ledger, b, rs.positions);
    if (evicted > 0) {
        ++state.counters.evictions;
        state.counters.evicted_tokens += evicted;
        audit_block(state, "evict", b, before, held(state, b.id), dropped.front(), dropped.back());
    }
    return evicted;
}

void handle_boundary(ControllerState& state, NodeId node, const ArborOptions& options) {
    HandlerScope scope(state);
    auto& b = state.tree.block(node);
    refresh_score(state, b, options);
    ++state.counters.policy_ops;
    // Active-path protection outranks the boundary rule.
    if (state.geometry().contains(node)) return;
    const auto k = keep_count(static_keep_ratio(state, b), b.n(), state.params);
    shrink_block(state, b, std::min(k, held(state, node)));
}

void handle_transition(ControllerState& state, NodeId new_leaf, const ArborOptions& options) {
    HandlerScope scope(state);
    ARBOR_CHECK(state.geometry().active_leaf == new_leaf, "transition: geometry was not updated");
    refresh_all(state, options);
    const auto& g = state.geometry();

    for (const auto& b : state.tree.blocks()) {
        if (!closed(b) || g.contains(b.id)) continue;
        const auto k = keep_count(static_keep_ratio(state, b), b.n(), state.params);
        if (k < held(state, b.id)) shrink_block(state, state.tree.block(b.id), k);
    }
    state.observe_peak();
    state.sample("transition:evicted");
    if (!options.rehydrate) return;

    std::int64_t need = 0;
    for (auto id : g.path_star) {
        const auto& b = state.tree.block(id);
        if (closed(b) && b.state == BlockState::PartiallyEvicted) need += b.n() - held(state, id);
    }
    if (need == 0) return;
    // Make room first so the prefill never overshoots the budget.
    if (state.params.budget != kUnlimitedBudget && state.store.total() + need > state.params.budget) {
        relieve(state, true);
    }
    for (auto id : g.path_star) {
        auto& b = state.tree.block(id);
        if (!closed(b) || b.state != BlockState::PartiallyEvicted) continue;
        const auto before = held(state, id);
        const auto rec = rehydrate(state.store, state.ledger, b);
        if (!rec.performed) continue;
        ++state.counters.rehydrations;
        state.counters.prefill_tokens += rec.prefill_tokens;
        audit_block(state, "rehydrate", b, before, held(state, id), b.span_start, b.span_end);
        state.observe_peak();
    }
    state.sample("transition:rehydrated");
}

void handle_pressure(ControllerState& state, const ArborOptions& options) {
    HandlerScope scope(state);
    refresh_all(state, options);
    relieve(state, false);
}

void ArborPolicy::on_boundary(ControllerState& state, NodeId node) { handle_boundary(state, node, options_); }
void ArborPolicy::on_transition(ControllerState& state, NodeId leaf) { handle_transition(state, leaf, options_); }
void ArborPolicy::on_pressure(ControllerState& state) { handle_pressure(state, options_); }

std::int64_t pressure_release_target(const PolicyParams& params) {
    return std::max<std::int64_t>(0, params.budget);
}

bool check_waterline(ControllerState& state) {
    const auto budget = state.params.budget;
    if (budget == kUnlimitedBudget) return false;
    const auto total = state.store.total();
    if (total < budget - state.params.delta) {
        state.waterline_armed = true;
        return false;
    }
    if (state.pressure_pending) return false;
    if (state.waterline_armed || total > budget) {
        state.pressure_pending = true;
        state.waterline_armed = false;
        return true;
    }
    return false;
}

std::vector<std::int64_t> reduce_to_target(std::vector<std::int64_t> keep, const std::vector<std::int64_t>& floors,
                                           const std::vector<double>& priorities,
                                           const std::vector<NodeId>& candidates, std::int64_t target) {
    std::int64_t excess = std::accumulate(keep.begin(), keep.end(), std::int64_t{0}) - target;
    if (excess <= 0) return keep;
    std::vector<NodeId> order(candidates);
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        return priorities[a] != priorities[b] ? priorities[a] < priorities[b] : a < b;
    });
    for (auto id : order) {
        const auto room = std::max<std::int64_t>(0, keep[id] - floors[id]);
        const auto cut = std::min(room, excess);
        keep[id] -= cut;
        excess -= cut;
        if (excess == 0) break;
    }
    return keep;
}

namespace {

template <typename F>
void timed(ControllerState& state, F&& f) {
    if (!state.options.cost.instrumented) {
        f();
        return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    f();
    state.counters.policy_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void audit_transition(ControllerState& state) {
    if (!state.options.record_audit) return;
    AuditRecord r;
    r.ts = state.now;
    r.op = "transition";
    r.node = state.geometry().active_leaf;
    r.path = state.geometry().path_star;
    for (auto id : r.path) {
        const auto& b = state.tree.block(id);
        if (!b.is_open() && state.store.retained_count(id) != b.n()) r.path_full = false;
    }
    state.audit.push_back(std::move(r));
}

void drain_pressure(ControllerState& state, CachePolicy& policy) {
    check_waterline(state);
    while (state.pressure_pending) {
        state.pressure_pending = false;
        ++state.counters.pressure_events;
        state.sample("pressure:begin");
        timed(state, [&] { policy.on_pressure(state); });
        state.observe_peak();
        state.sample("pressure:end");
        if (state.store.total() > state.params.budget) {
            throw InfeasibleBudget("arbor: policy '" + policy.name() + "' left " +
                                       std::to_string(state.store.total()) + " tokens above budget " +
                                       std::to_string(state.params.budget),
                                   state.store.total());
        }
        check_waterline(state);
    }
}

void record_row(ControllerState& state, TokenPos query, const AttentionRow& row) {
    if (!state.ledger.slice().contains(row.layer, row.head)) return;
    AttentionWeights kept;
    kept.reserve(row.weights.size());
    double sum = 0.0;
    for (const auto& [p, w] : row.weights) {
        if (p < 0 || p > query || !state.ledger.knows(p)) {
            throw Error("arbor: attention row of position " + std::to_string(query) +
                        " references unknown position " + std::to_string(p));
        }
        if (!state.ledger.is_retained(p)) continue;
        kept.emplace_back(p, w);
        sum += w;
    }
    if (kept.empty() || sum <= 0.0) return;
    // Rows were produced under full retention; evicted keys are gone on replay.
    for (auto& e : kept) e.second /= sum;
    state.ledger.record_row(row.layer, row.head, query, kept);
}

} // namespace

RunResult run(ControllerState& state, CachePolicy& policy, const EpisodeTrace& events) {
    RunResult out;
    auto& tree = state.tree;
    try {
        for (const auto& ev : events) {
            ARBOR_CHECK(state.step == 0 || ev.ts > state.now, "event timestamps must be strictly increasing");
            state.now = ev.ts;
            ++state.step;
            switch (ev.type) {
            case EventKind::OpenBlock: {
                ARBOR_CHECK(ev.node == static_cast<NodeId>(tree.size()), "open_block ids must be dense and ordered");
                std::optional<NodeId> parent;
                if (ev.parent != kNoNode) parent = ev.parent;
                tree.add_block(parent, tree.next_position());
                tree.set_active_leaf(ev.node);
                state.pending_boundary.reset();
                if (parent) {
                    ++state.counters.transition_events;
                    state.sample("transition:begin");
                    timed(state, [&] { policy.on_transition(state, ev.node); });
                    state.observe_peak();
                    state.sample("transition:end");
                    audit_transition(state);
                }
                break;
            }
            case EventKind::Token: {
                ARBOR_CHECK(ev.node == tree.open_block() && ev.node != kNoNode, "token for a block that is not open");
                const auto pos = tree.append_token(ev.node);
                state.ledger.add_position(pos);
                state.store.append(ev.node, pos);
                for (const auto& row : ev.attn_rows) record_row(state, pos, row);
                if (ev.next_dist) state.pending_boundary = ev.next_dist;
                if (state.intact_context.size() < tree.size()) state.intact_context.resize(tree.size(), true);
                for (auto a : state.geometry().path_star) {
                    if (a == ev.node) continue;
                    if (state.store.retained_count(a) != tree.block(a).n()) state.intact_context[ev.node] = false;
                }
                state.observe_peak();
                state.sample("token");
                break;
            }
            case EventKind::CloseBlock: {
                ARBOR_CHECK(ev.node == tree.open_block() && ev.node != kNoNode, "close_block for a block that is not open");
                auto& b = tree.block(ev.node);
                ARBOR_CHECK(b.n() > 0, "cannot close an empty block");
                tree.close_block(ev.node, tree.next_position() - 1);
                state.ledger.mark_closed(b.span_start, b.span_end);
                if (state.pending_boundary) b.uncertainty = uncertainty(*state.pending_boundary, state.options.top_k);
                state.pending_boundary.reset();
                ++state.counters.boundary_events;
                timed(state, [&] { policy.on_boundary(state, ev.node); });
                state.observe_peak();
                state.sample("boundary");
                break;
            }
            case EventKind::Transition: {
                ARBOR_CHECK(tree.contains(ev.target), "transition to an unknown node");
                ARBOR_CHECK(tree.open_block() == kNoNode, "transition while a block is open");
                tree.set_active_leaf(ev.target);
                ++state.counters.transition_events;
                state.sample("transition:begin");
                timed(state, [&] { policy.on_transition(state, ev.target); });
                state.observe_peak();
                state.sample("transition:end");
                audit_transition(state);
                break;
            }
            case EventKind::SetSearchValue: {
                ARBOR_CHECK(tree.contains(ev.node), "search value for an unknown node");
                tree.block(ev.node).search_value = ev.value;
                break;
            }
            }
            drain_pressure(state, policy);
        }
    } catch (const InfeasibleBudget& e) {
        out.oom = true;
        out.oom_minimal_budget = e.minimal_budget();
        out.oom_message = e.what();
    }
    out.tokens = tree.total_tokens();
    out.peak_total = state.peak_total;
    out.peak_pseudo_bytes = static_cast<double>(state.peak_total) * state.store.bytes_per_token();
    out.counters = state.counters;
    return out;
}

} // namespace arbor
