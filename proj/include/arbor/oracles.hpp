// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/signals.hpp"
#include "arbor/tree.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace arbor {

// Slow reference implementations, used by `verify` and the tests.

/// Breadth-first distances from `source` over the undirected parent links.
std::vector<int> bfs_distances(const ThoughtTree& tree, NodeId source);

struct BruteForceAllocation {
    std::vector<std::int64_t> keep;
    /// Σ -w_i log k_i; +inf when nothing is feasible.
    double objective = 0.0;
};

/// Exhaustive search over lower ≤ k ≤ cap, Σ k = min(budget, Σ cap).
BruteForceAllocation brute_force_allocation(const std::vector<double>& weights,
                                            const std::vector<std::int64_t>& lower,
                                            const std::vector<std::int64_t>& caps, std::int64_t budget);

/// Ranks every candidate once (tail before heavy, tail by recency, heavy by
/// post-close mass then recency) and keeps the first k.
std::vector<TokenPos> trim_by_sort(const std::vector<TokenPos>& tail, const std::vector<TokenPos>& heavy,
                                   std::int64_t k, const AttentionLedger& ledger);

/// Removes one token at a time from the lowest-priority block still above
/// its floor until Σ keep ≤ target.
std::vector<std::int64_t> unit_step_pressure(std::vector<std::int64_t> keep, const std::vector<std::int64_t>& floors,
                                             const std::vector<double>& priorities,
                                             const std::vector<NodeId>& candidates, std::int64_t target);

struct SuiteResult {
    std::string name;
    int cases = 0;
    int failures = 0;
    std::string first_failure;
    bool passed() const noexcept { return failures == 0; }
};

/// Suite names accepted by run_verify_suites' `fault`.
std::vector<std::string> verify_suite_names();

/// Cross-checks the fast paths against the oracles on random instances.
/// `fault` names one suite whose implementation result is deliberately
/// corrupted, to show the comparison catches it.
std::vector<SuiteResult> run_verify_suites(std::uint64_t seed, int cases_per_suite,
                                           const std::optional<std::string>& fault = std::nullopt);

} // namespace arbor
