// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/controller.hpp"

#include <optional>

namespace arbor::testing {

/// Builds well-formed traces by hand.
class TraceBuilder {
public:
    TraceBuilder& open(NodeId node, NodeId parent = kNoNode) {
        TraceEvent e;
        e.type = EventKind::OpenBlock;
        e.node = node;
        e.parent = parent;
        return push(e);
    }
    TraceBuilder& tokens(NodeId node, int count) {
        for (int i = 0; i < count; ++i) {
            TraceEvent e;
            e.type = EventKind::Token;
            e.node = node;
            push(e);
        }
        return *this;
    }
    TraceBuilder& token(NodeId node, std::vector<AttentionRow> rows,
                        std::optional<NextTokenDistribution> dist = std::nullopt) {
        TraceEvent e;
        e.type = EventKind::Token;
        e.node = node;
        e.attn_rows = std::move(rows);
        e.next_dist = std::move(dist);
        return push(e);
    }
    TraceBuilder& close(NodeId node) {
        TraceEvent e;
        e.type = EventKind::CloseBlock;
        e.node = node;
        return push(e);
    }
    TraceBuilder& value(NodeId node, double v) {
        TraceEvent e;
        e.type = EventKind::SetSearchValue;
        e.node = node;
        e.value = v;
        return push(e);
    }
    TraceBuilder& transition(NodeId target) {
        TraceEvent e;
        e.type = EventKind::Transition;
        e.target = target;
        return push(e);
    }
    /// open + tokens + value + close; the last token carries a boundary distribution.
    TraceBuilder& block(NodeId node, NodeId parent, int n, double v = 0.5, double p_top = 0.6) {
        open(node, parent).tokens(node, n - 1);
        NextTokenDistribution d;
        d.vocab_size = 32000;
        d.top_entries = {{0, p_top}};
        d.other_mass = 1.0 - p_top;
        return token(node, {}, d).value(node, v).close(node);
    }
    const EpisodeTrace& trace() const { return trace_; }

private:
    TraceBuilder& push(TraceEvent e) {
        e.ts = ++ts_;
        trace_.push_back(std::move(e));
        return *this;
    }
    EpisodeTrace trace_;
    std::int64_t ts_ = 0;
};

/// Wraps a policy and calls `check` after every handler.
template <typename Check>
class Checked final : public CachePolicy {
public:
    Checked(CachePolicy& inner, Check check) : inner_(inner), check_(std::move(check)) {}
    std::string name() const override { return inner_.name(); }
    void on_boundary(ControllerState& s, NodeId n) override {
        inner_.on_boundary(s, n);
        check_(s, "boundary");
    }
    void on_transition(ControllerState& s, NodeId n) override {
        inner_.on_transition(s, n);
        check_(s, "transition");
    }
    void on_pressure(ControllerState& s) override {
        inner_.on_pressure(s);
        check_(s, "pressure");
    }

private:
    CachePolicy& inner_;
    Check check_;
};

} // namespace arbor::testing
