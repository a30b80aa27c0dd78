// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/policies.hpp"

#include <algorithm>
#include <map>

namespace arbor {

void FullKvPolicy::on_pressure(ControllerState& state) {
    const auto total = state.store.total();
    if (total > state.params.budget) {
        throw InfeasibleBudget("arbor: full retention needs " + std::to_string(total) + " tokens, budget is " +
                                   std::to_string(state.params.budget),
                               total);
    }
}

std::string SequencePolicy::name() const {
    switch (rule_) {
    case SequenceRule::TailOnly: return "tail-only";
    case SequenceRule::SinksTail: return "sinks-tail";
    case SequenceRule::SeqFlat: return "seq-flat";
    }
    return "?";
}

void SequencePolicy::on_pressure(ControllerState& state) {
    auto& tree = state.tree;
    const auto& g = state.geometry();
    std::int64_t excess = state.store.total() - pressure_release_target(state.params);
    state.counters.policy_ops += static_cast<std::int64_t>(tree.size());
    if (excess <= 0) return;

    struct Cand {
        TokenPos pos;
        int tier;
        double mass;
    };
    std::vector<Cand> cands;

    // Path positions inside the recent window are never candidates.
    TokenPos window_start = 0;
    if (rule_ == SequenceRule::SeqFlat) {
        std::vector<TokenPos> path_pos;
        for (auto id : g.path_star) {
            const auto& r = state.store.retained(id);
            path_pos.insert(path_pos.end(), r.begin(), r.end());
        }
        std::sort(path_pos.begin(), path_pos.end());
        if (static_cast<std::int64_t>(path_pos.size()) > window_) {
            window_start = path_pos[path_pos.size() - static_cast<std::size_t>(window_)];
        } else {
            window_start = tree.next_position();
        }
    }

    bool sinks_first = false;
    for (const auto& b : tree.blocks()) {
        if (b.is_open()) continue;
        const bool on_path = g.contains(b.id);
        for (auto p : state.store.retained(b.id)) {
            if (rule_ == SequenceRule::SeqFlat) {
                if (on_path && p >= window_start) continue;
                cands.push_back({p, on_path ? 1 : 0, state.ledger.mass(p)});
            } else {
                cands.push_back({p, 0, 0.0});
            }
        }
    }
    if (rule_ == SequenceRule::TailOnly && !state.store.sinks().empty() && !tree.block(0).is_open()) {
        sinks_first = true;
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.tier != b.tier) return a.tier < b.tier;
        if (a.mass != b.mass) return a.mass < b.mass;
        return a.pos < b.pos;
    });

    if (sinks_first) excess -= drop_sinks(state.store, state.ledger, tree.block(0));

    std::map<NodeId, std::vector<TokenPos>> drop;
    for (const auto& c : cands) {
        if (excess <= 0) break;
        drop[tree.owner_of(c.pos)].push_back(c.pos);
        --excess;
    }
    for (auto& [id, dropped] : drop) {
        auto& b = tree.block(id);
        std::sort(dropped.begin(), dropped.end());
        const auto& cur = state.store.retained(id);
        std::vector<TokenPos> keep;
        std::set_difference(cur.begin(), cur.end(), dropped.begin(), dropped.end(), std::back_inserter(keep));
        for (auto s : state.store.sinks()) {
            if (b.contains(s)) keep.push_back(s);
        }
        std::sort(keep.begin(), keep.end());
        const auto evicted = apply_eviction(state.store, state.ledger, b, keep);
        ++state.counters.evictions;
        state.counters.evicted_tokens += evicted;
    }
    if (excess > 0 && state.store.total() > state.params.budget) {
        throw InfeasibleBudget("arbor: " + name() + " has nothing left to evict", state.store.total());
    }
}

const std::vector<std::string>& policy_names() {
    static const std::vector<std::string> names{"full",     "arbor",       "arbor-norehyd", "tail-only",
                                                "sinks-tail", "seq-flat",  "arbor-no-v",    "arbor-no-u",
                                                "arbor-no-a", "arbor-no-sibling", "arbor-tae-only",
                                                "arbor-msve-only"};
    return names;
}

const std::vector<std::string>& ablation_policy_names() {
    static const std::vector<std::string> names{"full",       "arbor",      "arbor-no-v",       "arbor-no-u",
                                                "arbor-no-a", "arbor-no-sibling", "arbor-tae-only", "arbor-msve-only",
                                                "arbor-norehyd", "tail-only", "sinks-tail", "seq-flat"};
    return names;
}

PolicySetup make_policy(const std::string& name, const PolicyParams& base) {
    PolicySetup out;
    out.params = base;
    ArborOptions opt;
    if (name == "full") {
        out.policy = std::make_unique<FullKvPolicy>();
    } else if (name == "tail-only") {
        out.policy = std::make_unique<SequencePolicy>(SequenceRule::TailOnly);
    } else if (name == "sinks-tail") {
        out.policy = std::make_unique<SequencePolicy>(SequenceRule::SinksTail);
    } else if (name == "seq-flat") {
        out.policy = std::make_unique<SequencePolicy>(SequenceRule::SeqFlat);
    } else if (name.rfind("arbor", 0) == 0) {
        if (name == "arbor") {
        } else if (name == "arbor-norehyd") {
            opt.rehydrate = false;
        } else if (name == "arbor-no-v") {
            opt.use_feature[0] = false;
        } else if (name == "arbor-no-u") {
            opt.use_feature[1] = false;
        } else if (name == "arbor-no-a") {
            opt.use_feature[2] = false;
        } else if (name == "arbor-no-sibling") {
            out.params.eta = 1.0;
        } else if (name == "arbor-tae-only") {
            opt.constant_score = 0.5;
        } else if (name == "arbor-msve-only") {
            out.params.lambda_delta = 0.0;
            out.params.lambda_d = 0.0;
        } else {
            throw Error("arbor: unknown policy '" + name + "'");
        }
        out.policy = std::make_unique<ArborPolicy>(opt, name);
    } else {
        throw Error("arbor: unknown policy '" + name + "'");
    }
    return out;
}

} // namespace arbor
