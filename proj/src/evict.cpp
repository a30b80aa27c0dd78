// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/evict.hpp"

#include <algorithm>
#include <string>

namespace arbor {

std::vector<TokenPos>& KVStore::slot(NodeId node) {
    ARBOR_CHECK(node >= 0, "negative node id");
    if (static_cast<std::size_t>(node) >= retained_.size()) retained_.resize(node + 1);
    return retained_[node];
}

void KVStore::append(NodeId node, TokenPos pos) {
    if (pos < sink_count_) {
        ARBOR_CHECK(pos == static_cast<TokenPos>(sinks_.size()), "sink positions must arrive in order");
        sinks_.push_back(pos);
        slot(node);
    } else {
        auto& s = slot(node);
        ARBOR_CHECK(s.empty() || s.back() < pos, "appended position is not the newest of its block");
        s.push_back(pos);
    }
    ++total_;
}

const std::vector<TokenPos>& KVStore::retained(NodeId node) const {
    static const std::vector<TokenPos> kEmpty;
    if (node < 0 || static_cast<std::size_t>(node) >= retained_.size()) return kEmpty;
    return retained_[node];
}

std::int64_t KVStore::sinks_in(const ThoughtBlock& b) const {
    const TokenPos hi = std::min<TokenPos>(b.span_end, static_cast<TokenPos>(sinks_.size()) - 1);
    return hi >= b.span_start ? hi - b.span_start + 1 : 0;
}

std::int64_t KVStore::retained_count(NodeId node) const {
    const auto own = static_cast<std::int64_t>(retained(node).size());
    // Sinks live in the first block of the stream only.
    if (node == 0) return own + static_cast<std::int64_t>(sinks_.size());
    return own;
}

std::int64_t KVStore::recount() const {
    std::int64_t sum = static_cast<std::int64_t>(sinks_.size());
    for (const auto& s : retained_) sum += static_cast<std::int64_t>(s.size());
    return sum;
}

std::vector<TokenPos> trim(std::span<const TokenPos> tail, std::span<const TokenPos> heavy, std::int64_t k,
                           const AttentionLedger& ledger) {
    std::vector<TokenPos> out;
    if (k <= 0) return out;

    std::vector<TokenPos> t(tail.begin(), tail.end());
    std::sort(t.begin(), t.end(), std::greater<>());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    for (auto p : t) {
        if (static_cast<std::int64_t>(out.size()) == k) break;
        out.push_back(p);
    }

    std::vector<TokenPos> h(heavy.begin(), heavy.end());
    std::sort(h.begin(), h.end(), [&](TokenPos a, TokenPos b) {
        const double ma = ledger.post_close_mass(a), mb = ledger.post_close_mass(b);
        return ma != mb ? ma > mb : a > b;
    });
    for (auto p : h) {
        if (static_cast<std::int64_t>(out.size()) == k) break;
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
}

RetainedSet build_retained_set(const ThoughtBlock& block, std::int64_t k, const AttentionLedger& ledger,
                               const PolicyParams& params, const KVStore& store) {
    ARBOR_CHECK(!block.is_open(), "cannot build a retained set for an open block");
    ARBOR_CHECK(k >= 1, "retained-set target must be at least 1");
    ARBOR_CHECK(k <= block.n(), "retained-set target exceeds the block length");

    RetainedSet rs;
    std::vector<TokenPos> sinks;
    for (TokenPos p = block.span_start; p <= block.span_end && store.is_sink(p); ++p) sinks.push_back(p);
    const auto sink_n = static_cast<std::int64_t>(sinks.size());
    const std::int64_t k_eff = std::max<std::int64_t>(0, k - sink_n);
    const TokenPos first = block.span_start + sink_n;
    const std::int64_t n_eff = block.span_end - first + 1;

    const std::int64_t tail_len = std::min(params.l_tail, n_eff);
    if (k_eff <= tail_len) {
        for (TokenPos p = block.span_end - k_eff + 1; p <= block.span_end; ++p) rs.tail.push_back(p);
    } else {
        for (TokenPos p = block.span_end - tail_len + 1; p <= block.span_end; ++p) rs.tail.push_back(p);
        const TokenPos tail_start = block.span_end - tail_len + 1;

        std::vector<TokenPos> pool;
        for (auto p : store.retained(block.id)) {
            if (p >= first && p < tail_start) pool.push_back(p);
        }
        const auto m = static_cast<std::size_t>(k_eff - tail_len);
        ARBOR_CHECK(pool.size() >= m, "not enough retained positions to fill the heavy-hitter quota");
        std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m), pool.end(),
                          [&](TokenPos a, TokenPos b) {
                              const double ma = ledger.post_close_mass(a), mb = ledger.post_close_mass(b);
                              return ma != mb ? ma > mb : a > b;
                          });
        rs.heavy.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    }

    rs.positions = trim(rs.tail, rs.heavy, k_eff, ledger);
    rs.positions.insert(rs.positions.begin(), sinks.begin(), sinks.end());
    return rs;
}

std::int64_t apply_eviction(KVStore& store, AttentionLedger& ledger, ThoughtBlock& block,
                            std::span<const TokenPos> new_set) {
    ARBOR_CHECK(!block.is_open(), "cannot evict from an open block");
    auto& current = store.slot(block.id);

    std::vector<TokenPos> next;
    next.reserve(new_set.size());
    std::int64_t sinks_seen = 0;
    for (auto p : new_set) {
        if (!block.contains(p)) throw Error("arbor: position " + std::to_string(p) + " outside the block span");
        if (store.is_sink(p)) {
            ++sinks_seen;
            continue;
        }
        next.push_back(p);
    }
    if (sinks_seen != store.sinks_in(block)) throw Error("arbor: eviction would drop sink positions");
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    if (!std::includes(current.begin(), current.end(), next.begin(), next.end())) {
        throw Error("arbor: retained set cannot grow without rehydration");
    }

    std::vector<TokenPos> dropped;
    std::set_difference(current.begin(), current.end(), next.begin(), next.end(), std::back_inserter(dropped));
    for (auto p : dropped) ledger.set_retained(p, false);

    const auto evicted = static_cast<std::int64_t>(dropped.size());
    store.total_ -= evicted;
    store.evicted_tokens_ += evicted;
    current = std::move(next);

    const auto held = static_cast<std::int64_t>(current.size()) + store.sinks_in(block);
    block.keep_count = held;
    block.state = held < block.n() ? BlockState::PartiallyEvicted : BlockState::FullyRetained;
    return evicted;
}

RehydrationRecord rehydrate(KVStore& store, AttentionLedger& ledger, ThoughtBlock& block) {
    ARBOR_CHECK(!block.is_open(), "cannot rehydrate an open block");
    RehydrationRecord rec;
    rec.node = block.id;
    if (block.state != BlockState::PartiallyEvicted) return rec;

    auto& current = store.slot(block.id);
    const TokenPos first = block.span_start + store.sinks_in(block);
    std::vector<TokenPos> full;
    full.reserve(static_cast<std::size_t>(block.span_end - first + 1));
    for (TokenPos p = first; p <= block.span_end; ++p) {
        full.push_back(p);
        ledger.set_retained(p, true);
    }
    store.total_ += static_cast<std::int64_t>(full.size()) - static_cast<std::int64_t>(current.size());
    current = std::move(full);

    block.state = BlockState::FullyRetained;
    block.keep_count = block.n();
    ++store.rehydrations_;
    store.prefill_tokens_ += block.n();
    rec.prefill_tokens = block.n();
    rec.performed = true;
    return rec;
}

std::int64_t drop_sinks(KVStore& store, AttentionLedger& ledger, ThoughtBlock& root) {
    ARBOR_CHECK(!root.is_open(), "cannot evict from an open block");
    const std::int64_t in_span = store.sinks_in(root);
    ARBOR_CHECK(in_span == static_cast<std::int64_t>(store.sinks_.size()), "sinks must belong to the given block");
    for (auto p : store.sinks_) ledger.set_retained(p, false);
    const auto evicted = static_cast<std::int64_t>(store.sinks_.size());
    store.sinks_.clear();
    store.total_ -= evicted;
    store.evicted_tokens_ += evicted;
    const auto held = static_cast<std::int64_t>(store.retained(root.id).size());
    root.keep_count = held;
    root.state = held < root.n() ? BlockState::PartiallyEvicted : BlockState::FullyRetained;
    return evicted;
}

} // namespace arbor
