// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/signals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace arbor {

namespace {

constexpr double kMassTolerance = 1e-9;
constexpr double kRowTolerance = 1e-6;

double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

} // namespace

double uncertainty(const NextTokenDistribution& dist, std::size_t top_k) {
    ARBOR_CHECK(dist.vocab_size >= 2, "vocabulary size must be at least 2");
    ARBOR_CHECK(dist.top_entries.size() <= top_k, "more top entries than the configured K");
    ARBOR_CHECK(dist.other_mass >= 0.0 && std::isfinite(dist.other_mass), "negative other mass");

    double total = dist.other_mass;
    double neg_entropy = plogp(dist.other_mass);
    for (const auto& [token, p] : dist.top_entries) {
        ARBOR_CHECK(p >= 0.0 && std::isfinite(p), "negative probability in next-token distribution");
        total += p;
        neg_entropy += plogp(p);
    }
    ARBOR_CHECK(std::abs(total - 1.0) <= kMassTolerance, "next-token distribution does not sum to 1");

    const double u = 1.0 + neg_entropy / std::log(static_cast<double>(dist.vocab_size));
    return std::clamp(u, 0.0, 1.0);
}

bool AttentionSlice::contains(int layer, int head) const {
    return std::find(layers.begin(), layers.end(), layer) != layers.end() &&
           std::find(heads.begin(), heads.end(), head) != heads.end();
}

void AttentionLedger::add_position(TokenPos pos) {
    ARBOR_CHECK(pos == static_cast<TokenPos>(mass_.size()), "ledger positions must arrive in stream order");
    mass_.push_back(0.0);
    post_close_.push_back(0.0);
    closed_.push_back(false);
    retained_.push_back(true);
}

void AttentionLedger::mark_closed(TokenPos start, TokenPos end) {
    ARBOR_CHECK(start >= 0 && end < static_cast<TokenPos>(mass_.size()) && start <= end,
                "closing an unknown ledger range");
    std::fill(closed_.begin() + start, closed_.begin() + end + 1, true);
}

void AttentionLedger::set_retained(TokenPos pos, bool retained) {
    ARBOR_CHECK(knows(pos), "unknown ledger position");
    retained_[pos] = retained;
}

bool AttentionLedger::record_row(int layer, int head, TokenPos query_pos,
                                 std::span<const std::pair<TokenPos, double>> weights) {
    if (!slice_.contains(layer, head)) return false;

    double sum = 0.0;
    for (const auto& [pos, w] : weights) {
        if (!knows(pos) || pos > query_pos) {
            throw Error("arbor: attention weight on unknown position " + std::to_string(pos));
        }
        if (!retained_[pos]) {
            throw Error("arbor: attention weight on evicted position " + std::to_string(pos));
        }
        ARBOR_CHECK(w >= 0.0 && std::isfinite(w), "negative attention weight");
        sum += w;
    }
    ARBOR_CHECK(std::abs(sum - 1.0) <= kRowTolerance, "attention row is not normalized");

    for (const auto& [pos, w] : weights) {
        mass_[pos] += w;
        if (closed_[pos]) post_close_[pos] += w;
    }
    ++rows_;
    return true;
}

double AttentionLedger::mass(TokenPos pos) const {
    ARBOR_CHECK(knows(pos), "unknown ledger position");
    return mass_[pos];
}

double AttentionLedger::post_close_mass(TokenPos pos) const {
    ARBOR_CHECK(knows(pos), "unknown ledger position");
    return post_close_[pos];
}

bool AttentionLedger::is_retained(TokenPos pos) const {
    ARBOR_CHECK(knows(pos), "unknown ledger position");
    return retained_[pos];
}

double AttentionLedger::total_mass() const {
    double s = 0.0;
    for (double m : mass_) s += m;
    return s;
}

double block_attention_aggregate(const AttentionLedger& ledger, const ThoughtBlock& block,
                                 std::int64_t tokens_since_close) {
    ARBOR_CHECK(!block.is_open(), "attention aggregate requested for an open block");
    ARBOR_CHECK(tokens_since_close >= 0, "negative token count");
    if (tokens_since_close == 0) return 0.0;
    double sum = 0.0;
    for (TokenPos t = block.span_start; t <= block.span_end; ++t) {
        if (ledger.knows(t)) sum += ledger.post_close_mass(t);
    }
    return sum / static_cast<double>(tokens_since_close);
}

Vector3s feature_vector(const ThoughtBlock& block) {
    ARBOR_CHECK(!block.is_open(), "features requested for an open block");
    ARBOR_CHECK(block.search_value.has_value(), "block closed without a search value");
    ARBOR_CHECK(block.uncertainty.has_value(), "block closed without a boundary distribution");
    return Vector3s(*block.search_value, *block.uncertainty, block.attention_agg);
}

} // namespace arbor
