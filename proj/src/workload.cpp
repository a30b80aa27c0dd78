// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arbor {

void WorkloadConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    ARBOR_CHECK(branching >= 1, "branching must be >= 1");
    ARBOR_CHECK(depth >= 1, "depth must be >= 1");
    ARBOR_CHECK(expand_count >= 0, "expand_count must be >= 0");
    ARBOR_CHECK(tokens_per_node >= 1, "tokens_per_node must be >= 1");
    ARBOR_CHECK(prob(backtrack_prob), "backtrack_prob must be in [0, 1]");
    ARBOR_CHECK(prob(critical_fraction), "critical_fraction must be in [0, 1]");
    ARBOR_CHECK(prob(sink_bias), "sink_bias must be in [0, 1]");
    ARBOR_CHECK(recency_decay >= 0.0, "recency_decay must be >= 0");
    ARBOR_CHECK(hh_count >= 0, "hh_count must be >= 0");
    ARBOR_CHECK(recent_window >= 1, "recent_window must be >= 1");
    ARBOR_CHECK(hh_boost >= 0.0, "hh_boost must be >= 0");
    ARBOR_CHECK(prob(tau_mean) && tau_jitter >= 0.0, "tau_mean must be in [0, 1], tau_jitter >= 0");
    ARBOR_CHECK(locality >= 0.0, "locality must be >= 0");
    ARBOR_CHECK(value_noise >= 0.0 && select_noise >= 0.0 && entropy_noise >= 0.0, "noise levels must be >= 0");
    ARBOR_CHECK(vocab_size >= 2, "vocab_size must be >= 2");
    ARBOR_CHECK(top_k >= 1 && top_k < vocab_size, "top_k must be in [1, vocab_size)");
    ARBOR_CHECK(sink_count >= 0 && sink_count <= tokens_per_node, "sink_count must be in [0, tokens_per_node]");
}

WorkloadConfig config_s() { return {}; }

WorkloadConfig config_l() {
    WorkloadConfig c;
    c.branching = 5;
    c.depth = 8;
    c.expand_count = 64;
    return c;
}

bool GroundTruth::is_critical(NodeId id) const {
    return std::find(critical_blocks.begin(), critical_blocks.end(), id) != critical_blocks.end();
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0; }

struct Node {
    NodeId parent = kNoNode;
    int depth = 0;
    bool correct = false;
    bool has_correct_child = false;
    int children = 0;
    double v = 0.0;
};

/// One step of the schedule: a backtrack to `target` (optional) and the child it opens.
struct Step {
    NodeId backtrack = kNoNode;
    NodeId child = kNoNode;
};

double search_value(Rng& rng, double utility, bool high, double noise) {
    if (high) return std::clamp(0.7 + 0.3 * (utility - 0.85) / 0.15 + normal(rng, noise), 0.7, 1.0);
    return std::clamp(0.4 * utility / 0.2 + normal(rng, noise), 0.0, 0.4);
}

double draw_utility(Rng& rng, bool critical) { return critical ? uniform(rng, 0.85, 1.0) : uniform(rng, 0.0, 0.2); }

} // namespace

AttentionWeights synthetic_attention_row(Rng& rng, const AttentionContext& ctx, const WorkloadConfig& cfg) {
    ARBOR_CHECK(!ctx.positions.empty(), "attention row needs a nonempty context");
    const TokenPos query = ctx.positions.back();
    const auto sinks_end = static_cast<TokenPos>(cfg.sink_count);

    std::vector<TokenPos> sinks;
    for (auto p : ctx.positions) {
        if (p < sinks_end) sinks.push_back(p);
    }
    double sink_mass = sinks.empty() ? 0.0 : cfg.sink_bias;

    std::vector<std::pair<TokenPos, double>> scored;
    const auto n = static_cast<std::ptrdiff_t>(ctx.positions.size());
    int age = 0;
    for (std::ptrdiff_t i = n - 1; i >= 0 && age < cfg.recent_window; --i) {
        const auto p = ctx.positions[i];
        if (p < sinks_end && p != query) continue;
        const double s = age == 0 ? 1.0 : std::exp(-cfg.recency_decay * age);
        scored.emplace_back(p, s * uniform(rng, 0.8, 1.2));
        ++age;
    }
    // Heavy hitters draw their boost whether or not they are also recent.
    const double hh_base = std::isinf(cfg.recency_decay) ? 0.0 : std::exp(-cfg.recency_decay);
    for (const auto& [p, importance] : ctx.heavy) {
        if (p >= query || p < sinks_end) continue;
        scored.emplace_back(p, cfg.hh_boost * importance * hh_base * uniform(rng, 0.8, 1.2));
    }

    AttentionWeights out;
    double rest = 0.0;
    for (const auto& e : scored) rest += e.second;
    if (rest <= 0.0) sink_mass = sinks.empty() ? 0.0 : 1.0;
    if (sinks.empty() && rest <= 0.0) return {{query, 1.0}};

    for (auto p : sinks) {
        if (sink_mass > 0.0) out.emplace_back(p, sink_mass / static_cast<double>(sinks.size()));
    }
    if (rest > 0.0 && sink_mass < 1.0) {
        for (const auto& [p, s] : scored) {
            const double w = (1.0 - sink_mass) * s / rest;
            auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == p; });
            if (it != out.end()) {
                it->second += w;
            } else {
                out.emplace_back(p, w);
            }
        }
    }
    std::sort(out.begin(), out.end());
    double sum = 0.0;
    for (const auto& e : out) sum += e.second;
    for (auto& e : out) e.second /= sum;
    return out;
}

NextTokenDistribution boundary_distribution(Rng& rng, double utility, const WorkloadConfig& cfg) {
    NextTokenDistribution d;
    d.vocab_size = cfg.vocab_size;
    const double p1 = std::clamp(0.1 + 0.85 * utility + normal(rng, cfg.entropy_noise), 0.02, 0.98);
    const double spread = 0.6 * (1.0 - p1);
    std::vector<double> tail;
    double z = 0.0;
    for (int i = 1; i < cfg.top_k; ++i) {
        tail.push_back(std::pow(0.6, i));
        z += tail.back();
    }
    std::uniform_int_distribution<std::int64_t> tok(0, cfg.vocab_size - 1);
    std::vector<std::int64_t> ids;
    while (static_cast<int>(ids.size()) < cfg.top_k) {
        const auto t = tok(rng);
        if (std::find(ids.begin(), ids.end(), t) == ids.end()) ids.push_back(t);
    }
    d.top_entries.emplace_back(ids[0], p1);
    double used = p1;
    for (std::size_t i = 0; i < tail.size(); ++i) {
        const double p = std::min(spread * tail[i] / z, p1);
        d.top_entries.emplace_back(ids[i + 1], p);
        used += p;
    }
    d.other_mass = std::max(0.0, 1.0 - used);
    return d;
}

Workload generate_workload(const WorkloadConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Workload out;
    auto& gt = out.truth;

    // Pass 1: search schedule.
    std::vector<Node> nodes(1);
    nodes[0].correct = true;
    nodes[0].v = search_value(rng, draw_utility(rng, true), true, cfg.value_noise);
    std::vector<Step> steps;
    NodeId current = 0;
    auto can_expand = [&](NodeId x) {
        return nodes[x].depth < cfg.depth && nodes[x].children < cfg.branching;
    };
    auto distance = [&](NodeId a, NodeId b) {
        int d = 0;
        while (a != b) {
            if (nodes[a].depth >= nodes[b].depth) {
                a = nodes[a].parent;
            } else {
                b = nodes[b].parent;
            }
            ++d;
        }
        return d;
    };
    for (int e = 0; e < cfg.expand_count; ++e) {
        NodeId parent = kNoNode;
        Step step;
        const bool stay = can_expand(current) && uniform(rng, 0.0, 1.0) >= cfg.backtrack_prob;
        if (stay) {
            parent = current;
        } else {
            double best = -1e300;
            for (NodeId x = 0; x < static_cast<NodeId>(nodes.size()); ++x) {
                if (x == current || !can_expand(x)) continue;
                const double key = nodes[x].v - cfg.locality * distance(x, current) + normal(rng, cfg.select_noise);
                if (key > best) {
                    best = key;
                    parent = x;
                }
            }
            if (parent == kNoNode && can_expand(current)) parent = current;
            if (parent == kNoNode) break;
            if (parent != current) step.backtrack = parent;
        }
        Node c;
        c.parent = parent;
        c.depth = nodes[parent].depth + 1;
        auto& p = nodes[parent];
        if (p.correct && !p.has_correct_child) {
            const int left = cfg.branching - p.children;
            c.correct = uniform(rng, 0.0, 1.0) < 1.0 / left;
            p.has_correct_child = c.correct;
        }
        ++p.children;
        c.v = search_value(rng, draw_utility(rng, c.correct), c.correct, cfg.value_noise);
        step.child = static_cast<NodeId>(nodes.size());
        nodes.push_back(c);
        steps.push_back(step);
        current = step.child;
    }
    const auto count = static_cast<NodeId>(nodes.size());

    // Pass 2: ground truth.
    gt.solution_leaf = 0;
    for (NodeId x = 0; x < count; ++x) {
        if (nodes[x].correct && nodes[x].depth > nodes[gt.solution_leaf].depth) gt.solution_leaf = x;
    }
    std::vector<bool> critical(count, false);
    for (NodeId x = gt.solution_leaf; x != kNoNode; x = nodes[x].parent) critical[x] = true;
    gt.on_solution_path = critical;
    const auto path_len = std::count(critical.begin(), critical.end(), true);
    const auto wanted = static_cast<std::int64_t>(std::ceil(cfg.critical_fraction * count));
    if (wanted > path_len) {
        // Decoys: off-path blocks closest to the solution leaf, ties broken at random.
        std::vector<int> leaf_depth_chain(count, -1);
        for (NodeId x = gt.solution_leaf; x != kNoNode; x = nodes[x].parent) leaf_depth_chain[x] = nodes[x].depth;
        std::vector<std::tuple<int, double, NodeId>> cand;
        for (NodeId x = 0; x < count; ++x) {
            if (critical[x]) continue;
            NodeId a = x;
            while (leaf_depth_chain[a] < 0) a = nodes[a].parent;
            const int dist = nodes[x].depth + nodes[gt.solution_leaf].depth - 2 * nodes[a].depth;
            cand.emplace_back(dist, uniform(rng, 0.0, 1.0), x);
        }
        std::sort(cand.begin(), cand.end());
        for (std::size_t i = 0; i < cand.size() && static_cast<std::int64_t>(i) < wanted - path_len; ++i) {
            critical[std::get<2>(cand[i])] = true;
        }
    }
    gt.utility.resize(count);
    gt.tau.resize(count);
    gt.heavy_hitters.resize(count);
    std::vector<double> v(count);
    for (NodeId x = 0; x < count; ++x) {
        if (critical[x]) gt.critical_blocks.push_back(x);
        gt.utility[x] = draw_utility(rng, critical[x]);
        gt.tau[x] = std::clamp(cfg.tau_mean + uniform(rng, -cfg.tau_jitter, cfg.tau_jitter), 0.0, 1.0);
        v[x] = search_value(rng, gt.utility[x], critical[x], cfg.value_noise);
    }

    // Pass 3: event stream.
    auto& ev = out.trace;
    std::int64_t ts = 0;
    TokenPos next = 0;
    std::vector<TokenPos> start(count, 0);
    std::vector<NodeId> path;
    auto emit = [&](TraceEvent e) {
        e.ts = ts++;
        ev.push_back(std::move(e));
    };
    auto path_to = [&](NodeId leaf) {
        std::vector<NodeId> p;
        for (NodeId x = leaf; x != kNoNode; x = nodes[x].parent) p.push_back(x);
        std::reverse(p.begin(), p.end());
        return p;
    };
    auto generate_block = [&](NodeId id) {
        TraceEvent open;
        open.type = EventKind::OpenBlock;
        open.node = id;
        open.parent = nodes[id].parent;
        emit(std::move(open));
        start[id] = next;

        const TokenPos lo = std::max<TokenPos>(next, cfg.sink_count);
        const TokenPos hi = next + cfg.tokens_per_node - 3;  // keep designated positions out of the tail
        std::vector<TokenPos> pool;
        for (TokenPos p = lo; p <= hi; ++p) pool.push_back(p);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.hh_count)));
        std::sort(pool.begin(), pool.end());
        gt.heavy_hitters[id] = pool;

        path = path_to(id);
        AttentionContext ctx;
        for (auto a : path) {
            if (a == id) break;
            for (TokenPos p = start[a]; p < start[a] + cfg.tokens_per_node; ++p) ctx.positions.push_back(p);
        }
        std::vector<std::pair<TokenPos, double>> heavy_all;
        for (auto a : path) {
            for (auto p : gt.heavy_hitters[a]) heavy_all.emplace_back(p, 0.3 + gt.utility[a]);
        }
        for (int t = 0; t < cfg.tokens_per_node; ++t) {
            const TokenPos pos = next++;
            ctx.positions.push_back(pos);
            ctx.heavy.clear();
            for (const auto& h : heavy_all) {
                if (h.first < pos) ctx.heavy.push_back(h);
            }
            TraceEvent tok;
            tok.type = EventKind::Token;
            tok.node = id;
            for (const auto& [layer, head] : cfg.rows) {
                tok.attn_rows.push_back({layer, head, synthetic_attention_row(rng, ctx, cfg)});
            }
            if (t + 1 == cfg.tokens_per_node) tok.next_dist = boundary_distribution(rng, gt.utility[id], cfg);
            emit(std::move(tok));
        }
        TraceEvent sv;
        sv.type = EventKind::SetSearchValue;
        sv.node = id;
        sv.value = v[id];
        emit(std::move(sv));
        TraceEvent close;
        close.type = EventKind::CloseBlock;
        close.node = id;
        emit(std::move(close));
    };
    auto transition = [&](NodeId target) {
        TraceEvent t;
        t.type = EventKind::Transition;
        t.target = target;
        emit(std::move(t));
    };

    generate_block(0);
    NodeId leaf = 0;
    for (const auto& s : steps) {
        if (s.backtrack != kNoNode) transition(s.backtrack);
        generate_block(s.child);
        leaf = s.child;
    }
    if (leaf != gt.solution_leaf) transition(gt.solution_leaf);
    return out;
}

VectorXs retention_ratios(const ControllerState& state) {
    const auto& tree = state.tree;
    VectorXs r(static_cast<Eigen::Index>(tree.size()));
    for (const auto& b : tree.blocks()) {
        r(b.id) = b.n() > 0 ? static_cast<double>(state.store.retained_count(b.id)) / static_cast<double>(b.n()) : 1.0;
    }
    return r;
}

VectorXs effective_retention(const ControllerState& state) {
    VectorXs r = retention_ratios(state);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (k < state.intact_context.size() && !state.intact_context[k]) r(i) = 0.0;
    }
    return r;
}

bool success_model(const ControllerState& state, const GroundTruth& gt) {
    return success_score(effective_retention(state), gt) >= 0.5;
}

double success_score(const VectorXs& retention, const GroundTruth& gt) {
    ARBOR_CHECK(retention.size() == static_cast<Eigen::Index>(gt.utility.size()), "retention/utility size mismatch");
    ARBOR_CHECK(gt.on_solution_path.size() == gt.utility.size(), "ground truth is missing the solution path");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < retention.size(); ++i) {
        // The final answer conditions on the whole solution path.
        const double need = gt.on_solution_path[i] ? 1.0 : gt.tau[i];
        if (retention(i) < need) worst = std::max(worst, gt.utility[i]);
    }
    return 1.0 - worst;
}

} // namespace arbor
