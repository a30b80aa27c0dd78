// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/episode.hpp"
#include "arbor/evict.hpp"
#include "arbor/oracles.hpp"
#include "arbor/policies.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

namespace arbor {
namespace {

// A closed block over [start, start + n) registered in store and ledger.
struct Fixture {
    explicit Fixture(std::int64_t sinks = 0) : store(sinks) {}

    ThoughtBlock& add(int n) {
        ThoughtBlock b;
        b.id = static_cast<NodeId>(blocks.size());
        b.span_start = next;
        for (int i = 0; i < n; ++i) {
            ledger.add_position(next);
            store.append(b.id, next);
            ++next;
        }
        b.span_end = next - 1;
        b.state = BlockState::FullyRetained;
        b.keep_count = b.n();
        ledger.mark_closed(b.span_start, b.span_end);
        blocks.push_back(b);
        return blocks.back();
    }

    KVStore store;
    AttentionLedger ledger;
    std::vector<ThoughtBlock> blocks;
    TokenPos next = 0;
};

std::vector<TokenPos> range(TokenPos a, TokenPos b) {
    std::vector<TokenPos> v(static_cast<std::size_t>(b - a + 1));
    std::iota(v.begin(), v.end(), a);
    return v;
}

PolicyParams tail3() {
    PolicyParams p;
    p.l_tail = 3;
    p.k_min = 1;
    return p;
}

TEST(RetainedSet, EarlyReturnKeepsTailOnly) {
    Fixture f;
    auto& b = f.add(10);
    const auto rs = build_retained_set(b, 3, f.ledger, tail3(), f.store);
    EXPECT_EQ(rs.positions, range(7, 9));
    EXPECT_TRUE(rs.heavy.empty());
}

TEST(RetainedSet, FullTargetKeepsAll) {
    Fixture f;
    auto& b = f.add(10);
    EXPECT_EQ(build_retained_set(b, 10, f.ledger, tail3(), f.store).positions, range(0, 9));
}

TEST(RetainedSet, HeavyHittersByPostCloseMass) {
    Fixture f;
    auto& b = f.add(10);
    f.ledger.add_position(10);
    // A = [9, 0, 0, 7, 0, 0, 0] on positions 0..6, normalized.
    f.ledger.record_row(30, 0, 10, AttentionWeights{{0, 9.0 / 16}, {3, 7.0 / 16}});
    const auto rs = build_retained_set(b, 5, f.ledger, tail3(), f.store);
    EXPECT_EQ(rs.tail, range(7, 9));
    EXPECT_EQ(rs.heavy, (std::vector<TokenPos>{0, 3}));
    EXPECT_EQ(rs.positions, (std::vector<TokenPos>{0, 3, 7, 8, 9}));
}

TEST(RetainedSet, TiesGoToRecentPositions) {
    Fixture f;
    auto& b = f.add(10);
    const auto rs = build_retained_set(b, 5, f.ledger, tail3(), f.store);
    EXPECT_EQ(rs.heavy, (std::vector<TokenPos>{6, 5}));
}

TEST(RetainedSet, RejectsBadTargets) {
    Fixture f;
    auto& b = f.add(4);
    EXPECT_THROW(build_retained_set(b, 0, f.ledger, tail3(), f.store), Error);
    EXPECT_THROW(build_retained_set(b, 5, f.ledger, tail3(), f.store), Error);
}

TEST(RetainedSet, SinksStayInside) {
    Fixture f(4);
    auto& b = f.add(10);
    const auto rs = build_retained_set(b, 6, f.ledger, tail3(), f.store);
    EXPECT_EQ(rs.positions.size(), 6u);
    EXPECT_EQ(std::vector<TokenPos>(rs.positions.begin(), rs.positions.begin() + 4), range(0, 3));
}

TEST(Trim, DisjointUnion) {
    Fixture f;
    f.add(10);
    const std::vector<TokenPos> tail{7, 8, 9}, heavy{1, 4};
    EXPECT_EQ(trim(tail, heavy, 5, f.ledger), (std::vector<TokenPos>{1, 4, 7, 8, 9}));
}

TEST(Trim, TailWinsOverlaps) {
    Fixture f;
    f.add(10);
    const std::vector<TokenPos> tail{7, 8, 9}, heavy{8, 2, 9};
    EXPECT_EQ(trim(tail, heavy, 3, f.ledger), range(7, 9));
    EXPECT_EQ(trim(tail, heavy, 2, f.ledger), range(8, 9));
    EXPECT_EQ(trim(tail, heavy, 10, f.ledger), (std::vector<TokenPos>{2, 7, 8, 9}));
}

TEST(Trim, MatchesSortPrefixOracle) {
    std::mt19937_64 rng(12);
    for (int c = 0; c < 500; ++c) {
        Fixture f;
        const int n = std::uniform_int_distribution<int>(2, 24)(rng);
        f.add(n);
        f.ledger.add_position(n);
        AttentionWeights row;
        double s = 0;
        for (TokenPos p = 0; p < n; ++p) {
            const double x = std::uniform_int_distribution<int>(0, 3)(rng);
            row.emplace_back(p, x);
            s += x;
        }
        if (s == 0) continue;
        for (auto& [p, x] : row) x /= s;
        f.ledger.record_row(30, 0, n, row);
        std::vector<TokenPos> tail, heavy;
        for (TokenPos p = 0; p < n; ++p) {
            if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) tail.push_back(p);
            if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) heavy.push_back(p);
        }
        const auto k = std::uniform_int_distribution<std::int64_t>(0, n)(rng);
        EXPECT_EQ(trim(tail, heavy, k, f.ledger), trim_by_sort(tail, heavy, k, f.ledger));
    }
}

TEST(Eviction, FullSpanIsIdempotent) {
    Fixture f;
    auto& b = f.add(6);
    const auto before = f.store.total();
    EXPECT_EQ(apply_eviction(f.store, f.ledger, b, range(0, 5)), 0);
    EXPECT_EQ(f.store.total(), before);
    EXPECT_EQ(b.state, BlockState::FullyRetained);
}

TEST(Eviction, TailOnlyDropsTheRest) {
    Fixture f;
    auto& b = f.add(10);
    EXPECT_EQ(apply_eviction(f.store, f.ledger, b, range(7, 9)), 7);
    EXPECT_EQ(f.store.total(), 3);
    EXPECT_EQ(b.state, BlockState::PartiallyEvicted);
    EXPECT_EQ(b.keep_count, 3);
    EXPECT_FALSE(f.ledger.is_retained(0));
    EXPECT_TRUE(f.ledger.is_retained(8));
}

TEST(Eviction, RejectsSinksAndGrowth) {
    Fixture f(4);
    auto& b = f.add(10);
    EXPECT_THROW(apply_eviction(f.store, f.ledger, b, range(5, 9)), Error);
    apply_eviction(f.store, f.ledger, b, std::vector<TokenPos>{0, 1, 2, 3, 8, 9});
    EXPECT_THROW(apply_eviction(f.store, f.ledger, b, std::vector<TokenPos>{0, 1, 2, 3, 7, 8, 9}), Error);
    EXPECT_THROW(apply_eviction(f.store, f.ledger, b, std::vector<TokenPos>{0, 1, 2, 3, 12}), Error);
}

TEST(Eviction, TotalMatchesRecountAcrossBlocks) {
    std::mt19937_64 rng(17);
    Fixture f(4);
    for (int i = 0; i < 5; ++i) f.add(std::uniform_int_distribution<int>(5, 20)(rng));
    for (int step = 0; step < 60; ++step) {
        auto& b = f.blocks[std::uniform_int_distribution<std::size_t>(0, 4)(rng)];
        const auto& cur = f.store.retained(b.id);
        std::vector<TokenPos> keep;
        for (TokenPos p = b.span_start; p <= b.span_end && f.store.is_sink(p); ++p) keep.push_back(p);
        for (auto p : cur) {
            if (std::uniform_int_distribution<int>(0, 4)(rng) > 0) keep.push_back(p);
        }
        if (std::uniform_int_distribution<int>(0, 5)(rng) == 0) {
            rehydrate(f.store, f.ledger, b);
        } else {
            apply_eviction(f.store, f.ledger, b, keep);
        }
        ASSERT_EQ(f.store.total(), f.store.recount());
    }
}

TEST(Rehydrate, RestoresExactSpan) {
    Fixture f(4);
    auto& b = f.add(12);
    std::vector<TokenPos> full(f.store.retained(b.id));
    apply_eviction(f.store, f.ledger, b, std::vector<TokenPos>{0, 1, 2, 3, 10, 11});
    const auto rec = rehydrate(f.store, f.ledger, b);
    EXPECT_TRUE(rec.performed);
    EXPECT_EQ(rec.prefill_tokens, 12);
    EXPECT_EQ(f.store.retained(b.id), full);
    EXPECT_EQ(f.store.retained_count(b.id), 12);
    EXPECT_EQ(b.state, BlockState::FullyRetained);
    EXPECT_EQ(f.store.rehydrations(), 1);
    for (TokenPos p = 0; p < 12; ++p) EXPECT_TRUE(f.ledger.is_retained(p));
}

TEST(Rehydrate, FullyRetainedIsNoOp) {
    Fixture f;
    auto& b = f.add(5);
    EXPECT_FALSE(rehydrate(f.store, f.ledger, b).performed);
    EXPECT_EQ(f.store.rehydrations(), 0);
    EXPECT_EQ(f.store.prefill_tokens(), 0);
}

TEST(Rehydrate, OpenBlockRejected) {
    Fixture f;
    auto& b = f.add(5);
    b.state = BlockState::Open;
    EXPECT_THROW(rehydrate(f.store, f.ledger, b), Error);
}

// Counts, before each transition, the Path* blocks that are short of their span.
class TransitionIntoEvicted final : public CachePolicy {
public:
    explicit TransitionIntoEvicted(CachePolicy& inner) : inner_(inner) {}
    std::string name() const override { return inner_.name(); }
    void on_boundary(ControllerState& s, NodeId n) override { inner_.on_boundary(s, n); }
    void on_pressure(ControllerState& s) override { inner_.on_pressure(s); }
    void on_transition(ControllerState& s, NodeId n) override {
        for (auto id : s.geometry().path_star) {
            const auto& b = s.tree.block(id);
            if (!b.is_open() && s.store.retained_count(id) < b.n()) ++entered;
        }
        inner_.on_transition(s, n);
    }
    std::int64_t entered = 0;

private:
    CachePolicy& inner_;
};

TEST(Rehydrate, ThreeBacktracksIntoEvictedBlocks) {
    // 0 -> 1, then 2 under 0 (1 shrinks), back to 1 (rehydrate 1),
    // back to 2 (rehydrate 2), back to 1 again (rehydrate 1).
    testing::TraceBuilder tb;
    tb.block(0, kNoNode, 8).block(1, 0, 16).transition(0).block(2, 0, 16);
    tb.transition(1).transition(2).transition(1);
    PolicyParams p;
    p.alpha = 0.01;
    ControllerState st(p);
    ArborPolicy arbor;
    TransitionIntoEvicted counter(arbor);
    const auto r = run(st, counter, tb.trace());
    EXPECT_EQ(r.counters.rehydrations, 3);
    EXPECT_EQ(counter.entered, 3);
}

TEST(Rehydrate, CountMatchesTransitionsIntoEvictedOnRandomEpisodes) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        WorkloadConfig cfg;
        cfg.seed = 700 + seed;
        const auto wl = generate_workload(cfg);
        PolicyParams p;
        p.budget = budget_for_ratio(0.25, full_kv_peak(wl.trace));
        ControllerState st(p);
        ArborPolicy arbor;
        TransitionIntoEvicted counter(arbor);
        const auto r = run(st, counter, wl.trace);
        ASSERT_FALSE(r.oom);
        EXPECT_EQ(r.counters.rehydrations, counter.entered) << "seed " << cfg.seed;
    }
}

} // namespace
} // namespace arbor
