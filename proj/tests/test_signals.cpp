// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/signals.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace arbor {
namespace {

NextTokenDistribution uniform(std::int64_t v) {
    NextTokenDistribution d;
    d.vocab_size = v;
    for (std::int64_t i = 0; i < v; ++i) d.top_entries.emplace_back(i, 1.0 / static_cast<double>(v));
    return d;
}

TEST(Uncertainty, UniformIsZeroOneHotIsOne) {
    for (std::int64_t v : {2, 16, 1024}) {
        EXPECT_NEAR(uncertainty(uniform(v), static_cast<std::size_t>(v)), 0.0, 1e-12) << v;
        NextTokenDistribution one_hot;
        one_hot.vocab_size = v;
        one_hot.top_entries = {{3, 1.0}};
        EXPECT_NEAR(uncertainty(one_hot, static_cast<std::size_t>(v)), 1.0, 1e-12) << v;
    }
}

TEST(Uncertainty, ThreeBucketHandValue) {
    NextTokenDistribution d;
    d.vocab_size = 16;
    d.top_entries = {{1, 0.5}, {2, 0.25}};
    d.other_mass = 0.25;
    // 1 - 1.5 ln2 / ln16
    EXPECT_NEAR(uncertainty(d), 0.625, 1e-12);
}

TEST(Uncertainty, BucketingNeverLowersConfidence) {
    std::mt19937_64 rng(11);
    for (int c = 0; c < 1000; ++c) {
        const int v = std::uniform_int_distribution<int>(3, 40)(rng);
        std::vector<double> p(static_cast<std::size_t>(v));
        std::exponential_distribution<double> e(1.0);
        double s = 0;
        for (auto& x : p) s += (x = std::pow(e(rng), 2.0));
        for (auto& x : p) x /= s;
        std::sort(p.begin(), p.end(), std::greater<>());

        NextTokenDistribution exact, bucketed;
        exact.vocab_size = bucketed.vocab_size = v;
        for (int i = 0; i < v; ++i) exact.top_entries.emplace_back(i, p[static_cast<std::size_t>(i)]);
        const int k = std::uniform_int_distribution<int>(1, v - 1)(rng);
        for (int i = 0; i < k; ++i) bucketed.top_entries.emplace_back(i, p[static_cast<std::size_t>(i)]);
        for (int i = k; i < v; ++i) bucketed.other_mass += p[static_cast<std::size_t>(i)];

        EXPECT_GE(uncertainty(bucketed, static_cast<std::size_t>(k)) + 1e-12,
                  uncertainty(exact, static_cast<std::size_t>(v)));
    }
}

TEST(Uncertainty, RejectsMalformedDistributions) {
    EXPECT_THROW(uncertainty(uniform(8), 2), Error);
    NextTokenDistribution d;
    d.vocab_size = 8;
    d.top_entries = {{0, 0.5}};
    EXPECT_THROW(uncertainty(d), Error);
    d.other_mass = 0.5;
    d.vocab_size = 1;
    EXPECT_THROW(uncertainty(d), Error);
}

AttentionLedger ledger_with(int n) {
    AttentionLedger l;
    for (TokenPos p = 0; p < n; ++p) l.add_position(p);
    return l;
}

TEST(Ledger, SingleRowAddsMass) {
    auto l = ledger_with(2);
    const AttentionWeights row{{0, 1.0}};
    EXPECT_TRUE(l.record_row(30, 0, 1, row));
    EXPECT_DOUBLE_EQ(l.mass(0), 1.0);
}

TEST(Ledger, Linearity) {
    auto l = ledger_with(3);
    const AttentionWeights row{{0, 0.5}, {1, 0.5}};
    l.record_row(30, 0, 2, row);
    l.record_row(31, 3, 2, row);
    EXPECT_DOUBLE_EQ(l.mass(0), 1.0);
    EXPECT_DOUBLE_EQ(l.mass(1), 1.0);
}

TEST(Ledger, MassConservation) {
    std::mt19937_64 rng(3);
    auto l = ledger_with(64);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int r = 0; r < 100; ++r) {
        AttentionWeights row;
        double s = 0;
        for (TokenPos p = 0; p < 64; ++p) {
            row.emplace_back(p, u(rng));
            s += row.back().second;
        }
        for (auto& [p, w] : row) w /= s;
        l.record_row(30, r % 4, 63, row);
    }
    EXPECT_NEAR(l.total_mass(), 100.0, 1e-6);
}

TEST(Ledger, RowsOutsideSliceIgnored) {
    auto l = ledger_with(2);
    const AttentionWeights row{{0, 1.0}};
    EXPECT_FALSE(l.record_row(5, 0, 1, row));
    EXPECT_FALSE(l.record_row(30, 9, 1, row));
    EXPECT_DOUBLE_EQ(l.total_mass(), 0.0);
}

TEST(Ledger, RejectsBadRows) {
    auto l = ledger_with(3);
    const AttentionWeights future{{2, 1.0}};
    EXPECT_THROW(l.record_row(30, 0, 1, future), Error);
    const AttentionWeights unnormalized{{0, 0.4}};
    EXPECT_THROW(l.record_row(30, 0, 2, unnormalized), Error);
    l.set_retained(0, false);
    const AttentionWeights evicted{{0, 1.0}};
    EXPECT_THROW(l.record_row(30, 0, 2, evicted), Error);
}

TEST(Ledger, PostCloseMassOnlyAfterClose) {
    auto l = ledger_with(4);
    l.record_row(30, 0, 1, AttentionWeights{{0, 1.0}});
    l.mark_closed(0, 1);
    l.record_row(30, 0, 2, AttentionWeights{{0, 1.0}});
    EXPECT_DOUBLE_EQ(l.mass(0), 2.0);
    EXPECT_DOUBLE_EQ(l.post_close_mass(0), 1.0);
}

ThoughtBlock closed_block(TokenPos a, TokenPos b) {
    ThoughtBlock blk;
    blk.id = 0;
    blk.span_start = a;
    blk.span_end = b;
    blk.state = BlockState::FullyRetained;
    return blk;
}

TEST(Aggregate, NoLaterQueriesIsZero) {
    auto l = ledger_with(4);
    l.mark_closed(0, 3);
    EXPECT_DOUBLE_EQ(block_attention_aggregate(l, closed_block(0, 3), 0), 0.0);
}

TEST(Aggregate, FullMassFromOneLaterQuery) {
    auto l = ledger_with(5);
    l.mark_closed(0, 3);
    l.record_row(30, 0, 4, AttentionWeights{{1, 0.25}, {2, 0.75}});
    EXPECT_DOUBLE_EQ(block_attention_aggregate(l, closed_block(0, 3), 1), 1.0);
    EXPECT_DOUBLE_EQ(squash_attention(1.0), 0.5);
}

TEST(Aggregate, SinkHoldingRootOutranksLeaf) {
    // root [0, 7] holds the sinks 0..3, leaf [8, 15]; queries 16..25.
    constexpr int kQueries = 10;
    auto l = ledger_with(16 + kQueries);
    l.mark_closed(0, 7);
    l.mark_closed(8, 15);
    double root_sum = 0.0, leaf_sum = 0.0;
    for (int q = 0; q < kQueries; ++q) {
        const TokenPos qp = 16 + q;
        AttentionWeights row;
        for (TokenPos p = 0; p < 4; ++p) row.emplace_back(p, 0.6 / 4);
        const double rest = 0.4 / static_cast<double>(qp + 1 - 4);
        for (TokenPos p = 4; p <= qp; ++p) row.emplace_back(p, rest);
        for (const auto& [p, w] : row) {
            if (p <= 7) root_sum += w;
            else if (p <= 15) leaf_sum += w;
        }
        l.record_row(30, 0, qp, row);
    }
    const double a_root = block_attention_aggregate(l, closed_block(0, 7), kQueries);
    const double a_leaf = block_attention_aggregate(l, closed_block(8, 15), kQueries);
    EXPECT_NEAR(a_root, root_sum / kQueries, 1e-12);
    EXPECT_NEAR(a_leaf, leaf_sum / kQueries, 1e-12);
    EXPECT_GT(a_root, a_leaf);
}

TEST(Features, OrderIsValueUncertaintyAttention) {
    ThoughtBlock b;
    b.state = BlockState::FullyRetained;
    b.search_value = 1.0;
    b.uncertainty = 1.0;
    b.attention_agg = 0.0;
    EXPECT_EQ(feature_vector(b), Vector3s(1, 1, 0));
    ThoughtBlock z;
    z.state = BlockState::FullyRetained;
    z.search_value = 0.0;
    z.uncertainty = 0.0;
    EXPECT_EQ(feature_vector(z), Vector3s(0, 0, 0));
}

} // namespace
} // namespace arbor
