// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/common.hpp"
#include "arbor/signals.hpp"
#include "arbor/tae.hpp"
#include "arbor/tree.hpp"

#include <span>
#include <vector>

namespace arbor {

struct RehydrationRecord {
    NodeId node = kNoNode;
    std::int64_t prefill_tokens = 0;
    bool performed = false;
};

/// Per-block retained token positions plus the global sink prefix.
///
/// Block sets never contain sink positions; sinks are stored once and
/// counted once, so total() == Σ_i |retained_i| + |sinks|.
class KVStore {
public:
    explicit KVStore(std::int64_t sink_count = 4, double bytes_per_token = 131072.0)
        : sink_count_(sink_count), bytes_per_token_(bytes_per_token) {}

    /// Registers a freshly appended token of `node`.
    void append(NodeId node, TokenPos pos);

    const std::vector<TokenPos>& retained(NodeId node) const;
    /// Retained positions of the block including any sinks inside its span.
    std::int64_t retained_count(NodeId node) const;
    bool is_sink(TokenPos pos) const noexcept { return pos >= 0 && pos < static_cast<TokenPos>(sinks_.size()); }
    const std::vector<TokenPos>& sinks() const noexcept { return sinks_; }
    std::int64_t sink_count() const noexcept { return sink_count_; }

    std::int64_t total() const noexcept { return total_; }
    double pseudo_bytes() const noexcept { return static_cast<double>(total_) * bytes_per_token_; }
    double bytes_per_token() const noexcept { return bytes_per_token_; }

    std::int64_t rehydrations() const noexcept { return rehydrations_; }
    std::int64_t prefill_tokens() const noexcept { return prefill_tokens_; }
    std::int64_t evicted_tokens() const noexcept { return evicted_tokens_; }

    /// Recomputes Σ|retained_i| + |sinks| from scratch.
    std::int64_t recount() const;

private:
    friend std::int64_t apply_eviction(KVStore&, AttentionLedger&, ThoughtBlock&, std::span<const TokenPos>);
    friend RehydrationRecord rehydrate(KVStore&, AttentionLedger&, ThoughtBlock&);
    friend std::int64_t drop_sinks(KVStore&, AttentionLedger&, ThoughtBlock&);

    std::vector<TokenPos>& slot(NodeId node);
    std::int64_t sinks_in(const ThoughtBlock& b) const;

    std::int64_t sink_count_;
    double bytes_per_token_;
    std::vector<TokenPos> sinks_;
    std::vector<std::vector<TokenPos>> retained_;
    std::int64_t total_ = 0;
    std::int64_t rehydrations_ = 0;
    std::int64_t prefill_tokens_ = 0;
    std::int64_t evicted_tokens_ = 0;
};

/// Token-extractive retention for one block: mandatory tail plus heavy hitters.
struct RetainedSet {
    std::vector<TokenPos> tail;
    /// In selection order (descending accumulated attention).
    std::vector<TokenPos> heavy;
    /// Final sorted selection, sinks inside the span included.
    std::vector<TokenPos> positions;
};

/// Selects exactly k positions of a closed block: the last k when k does not
/// exceed the tail window, otherwise the tail plus the top-(k - |tail|)
/// positions by post-close accumulated attention (ties go to the more recent
/// position). `candidates` restricts heavy hitters to positions still held.
RetainedSet build_retained_set(const ThoughtBlock& block, std::int64_t k, const AttentionLedger& ledger,
                               const PolicyParams& params, const KVStore& store);

/// Tail first (most recent first when the tail alone exceeds k), then heavy
/// hitters in descending attention order, up to min(k, |tail ∪ heavy|).
std::vector<TokenPos> trim(std::span<const TokenPos> tail, std::span<const TokenPos> heavy, std::int64_t k,
                           const AttentionLedger& ledger);

/// Replaces the block's retained set with `new_set` (which may include sink
/// positions of the span and must include all of them). Evicted positions are
/// frozen in the ledger. Returns the number of evicted tokens.
std::int64_t apply_eviction(KVStore& store, AttentionLedger& ledger, ThoughtBlock& block,
                            std::span<const TokenPos> new_set);

/// Restores the full span of a partially evicted block with one prefill
/// pass. A fully retained block is a no-op and is not counted.
RehydrationRecord rehydrate(KVStore& store, AttentionLedger& ledger, ThoughtBlock& block);

/// Evicts the whole sink prefix (only sequence baselines without sink
/// protection do this). `root` is the block that owns the prefix.
std::int64_t drop_sinks(KVStore& store, AttentionLedger& ledger, ThoughtBlock& root);

} // namespace arbor
