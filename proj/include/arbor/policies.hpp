// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/controller.hpp"

#include <memory>
#include <string>
#include <vector>

namespace arbor {

/// Keeps everything; raises InfeasibleBudget once memory exceeds B.
class FullKvPolicy final : public CachePolicy {
public:
    std::string name() const override { return "full"; }
    void on_boundary(ControllerState&, NodeId) override {}
    void on_transition(ControllerState&, NodeId) override {}
    void on_pressure(ControllerState& state) override;
};

enum class SequenceRule {
    /// Oldest tokens first, sinks included.
    TailOnly,
    /// Oldest tokens first, sinks protected.
    SinksTail,
    /// Flattened active path: off-path tokens go first, then path tokens
    /// outside the recent window, lowest accumulated attention first.
    SeqFlat,
};

/// Sequence-centric baseline: tree-unaware, irreversible, evicts only under
/// pressure.
class SequencePolicy final : public CachePolicy {
public:
    explicit SequencePolicy(SequenceRule rule, std::int64_t recent_window = 32) : rule_(rule), window_(recent_window) {}

    std::string name() const override;
    void on_boundary(ControllerState& state, NodeId) override { ++state.counters.policy_ops; }
    void on_transition(ControllerState& state, NodeId) override { ++state.counters.policy_ops; }
    void on_pressure(ControllerState& state) override;

private:
    SequenceRule rule_;
    std::int64_t window_;
};

/// A ready-to-run policy plus the parameter set it expects.
struct PolicySetup {
    std::unique_ptr<CachePolicy> policy;
    PolicyParams params;
};

/// Known policy names, in report order.
const std::vector<std::string>& policy_names();
/// The ablation ladder used by the ablation preset.
const std::vector<std::string>& ablation_policy_names();

/// Builds a policy by name on top of `base`. Throws Error on an unknown name.
PolicySetup make_policy(const std::string& name, const PolicyParams& base);

} // namespace arbor
