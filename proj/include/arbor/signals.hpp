// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/common.hpp"
#include "arbor/tree.hpp"

#include <span>
#include <utility>
#include <vector>

namespace arbor {

/// Truncated next-token distribution: explicit top entries plus one bucket
/// holding the remaining vocabulary mass.
struct NextTokenDistribution {
    std::vector<std::pair<std::int64_t, double>> top_entries;
    double other_mass = 0.0;
    std::int64_t vocab_size = 0;

    bool operator==(const NextTokenDistribution&) const = default;
};

inline constexpr std::size_t kDefaultTopK = 32;

/// Confidence at a block boundary: 1 - H / log|V|, clipped to [0, 1], with
/// the "other" bucket treated as a single outcome.
double uncertainty(const NextTokenDistribution& dist, std::size_t top_k = kDefaultTopK);

using AttentionWeights = std::vector<std::pair<TokenPos, double>>;

/// Which layers/heads feed the accumulated-attention statistics.
struct AttentionSlice {
    std::vector<int> layers{30, 31};
    std::vector<int> heads{0, 1, 2, 3};

    bool contains(int layer, int head) const;
    std::size_t size() const noexcept { return layers.size() * heads.size(); }
};

/// Accumulated attention mass A(t) per stream position, built incrementally
/// from attention rows of the thin slice.
///
/// Mass landing on a position whose block has already closed comes from a
/// later query by construction (the stream is monotone), so it is tracked
/// separately as post-close mass; that is what heavy-hitter ranking and the
/// block aggregate use.
class AttentionLedger {
public:
    explicit AttentionLedger(AttentionSlice slice = {}) : slice_(std::move(slice)) {}

    /// Registers the next stream position. Positions must arrive in order.
    void add_position(TokenPos pos);
    /// Marks [start, end] as belonging to a closed block.
    void mark_closed(TokenPos start, TokenPos end);
    /// Evicted positions stop accumulating; rows that still reference them are rejected.
    void set_retained(TokenPos pos, bool retained);

    /// Adds one attention row. Rows outside the slice are accepted and ignored.
    /// Returns true if the row was accumulated.
    bool record_row(int layer, int head, TokenPos query_pos, std::span<const std::pair<TokenPos, double>> weights);

    double mass(TokenPos pos) const;
    double post_close_mass(TokenPos pos) const;
    bool is_retained(TokenPos pos) const;
    bool knows(TokenPos pos) const noexcept {
        return pos >= 0 && static_cast<std::size_t>(pos) < mass_.size();
    }
    /// Σ_t A(t) over all positions, including intra-block mass.
    double total_mass() const;
    std::size_t rows_recorded() const noexcept { return rows_; }
    const AttentionSlice& slice() const noexcept { return slice_; }

private:
    AttentionSlice slice_;
    std::vector<double> mass_;
    std::vector<double> post_close_;
    std::vector<bool> closed_;
    std::vector<bool> retained_;
    std::size_t rows_ = 0;
};

/// Post-close attention mass on the block's span per token generated since
/// the block closed. Zero when no token followed yet.
double block_attention_aggregate(const AttentionLedger& ledger, const ThoughtBlock& block,
                                 std::int64_t tokens_since_close);

/// Maps a non-negative rate onto [0, 1) with x / (1 + x).
inline double squash_attention(double rate) { return rate / (1.0 + rate); }

/// φ = [v, u, a] in that order.
Vector3s feature_vector(const ThoughtBlock& block);

} // namespace arbor
