// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/common.hpp"
#include "arbor/msve.hpp"
#include "arbor/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace arbor {

enum class AllocationMode { Static, Waterfill };

std::string_view to_string(AllocationMode mode);
AllocationMode allocation_mode_from_string(std::string_view name);

inline constexpr std::int64_t kUnlimitedBudget = std::numeric_limits<std::int64_t>::max() / 4;

/// Every knob of the retention policy.
struct PolicyParams {
    double alpha = 128.0;
    double gamma = 1.0;
    double lambda_d = 0.0;
    double lambda_delta = 0.35;
    double eta = 0.7;
    double r_min = 0.05;
    std::int64_t k_min = 2;
    std::int64_t l_tail = 2;
    std::int64_t delta = 32;
    std::int64_t budget = kUnlimitedBudget;
    MsveWeights theta = default_msve_weights();
    AllocationMode allocation_mode = AllocationMode::Static;

    /// Throws Error when a field is outside its documented range.
    void validate() const;
    bool operator==(const PolicyParams&) const = default;
};

/// w = s^γ · exp(-λ_d d) · exp(-λ_Δ Δ).
double value_geometry_weight(double s, double depth, double distance, const PolicyParams& p);

/// r = clip(α · η^[off path] · w, r_min, 1).
double retention_ratio(double s, double depth, double distance, bool on_path, const PolicyParams& p);

/// k = min(n, max(K_min, min(L_tail, n), ⌊r n⌋)).
std::int64_t keep_count(double r, std::int64_t n, const PolicyParams& p);

/// The smallest k any policy step may leave a closed block with.
std::int64_t block_floor(std::int64_t n, const PolicyParams& p);

/// Pressure ordering key: the value–geometry weight with the off-path
/// discount folded in.
double priority(const ThoughtBlock& b, const TreeGeometry& g, const PolicyParams& p);

template <typename Scalar>
struct WaterfillResult {
    VectorX<Scalar> keep;
    Scalar lambda = Scalar(0);
};

namespace detail {

template <typename Scalar>
Scalar boxed_sum(const VectorX<Scalar>& w, const VectorX<Scalar>& lo, const VectorX<Scalar>& hi, Scalar lambda) {
    Scalar s(0);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        s += std::clamp(w(i) / lambda, lo(i), hi(i));
    }
    return s;
}

} // namespace detail

/// Budget-exact capped allocation with per-block lower bounds:
/// k_i = clamp(w_i / λ, lower_i, cap_i) with λ found by bisection so that
/// Σ k_i = budget. With lower = 0 this is the classic waterfilling solution
/// k_i = min(cap_i, w_i / λ) of max Σ w_i log k_i s.t. Σ k_i ≤ budget.
template <typename Scalar>
WaterfillResult<Scalar> waterfill(const VectorX<Scalar>& weights, const VectorX<Scalar>& lower,
                                  const VectorX<Scalar>& caps, Scalar budget) {
    const auto m = weights.size();
    ARBOR_CHECK(lower.size() == m && caps.size() == m, "waterfill: size mismatch");
    ARBOR_CHECK((weights.array() >= Scalar(0)).all(), "waterfill: negative weight");
    ARBOR_CHECK((lower.array() >= Scalar(0)).all() && (lower.array() <= caps.array()).all(),
                "waterfill: lower bounds must lie in [0, cap]");
    ARBOR_CHECK(budget > Scalar(0), "waterfill: budget must be positive");

    WaterfillResult<Scalar> out;
    if (caps.sum() <= budget) {
        out.keep = caps;
        return out;
    }
    ARBOR_CHECK(lower.sum() <= budget * (Scalar(1) + Scalar(1e-12)), "waterfill: lower bounds exceed budget");

    const bool all_zero = (weights.array() == Scalar(0)).all();
    if (all_zero) {
        // Every allocation is stationary; split the surplus in proportion to room.
        const VectorX<Scalar> room = caps - lower;
        out.keep = lower + room * ((budget - lower.sum()) / room.sum());
        return out;
    }

    Scalar lo_lambda = std::numeric_limits<Scalar>::max();
    Scalar hi_lambda(0);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (weights(i) > Scalar(0)) {
            lo_lambda = std::min(lo_lambda, weights(i) / caps(i));
            hi_lambda = std::max(hi_lambda, weights(i) / Scalar(1e-12));
        }
    }
    lo_lambda *= Scalar(1e-6);

    if (detail::boxed_sum(weights, lower, caps, lo_lambda) <= budget) {
        // Positive-weight blocks all saturate below the budget.
        out.keep.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) out.keep(i) = weights(i) > Scalar(0) ? caps(i) : lower(i);
        return out;
    }

    for (int it = 0; it < 200; ++it) {
        const Scalar mid = std::sqrt(lo_lambda * hi_lambda);
        if (!(mid > lo_lambda && mid < hi_lambda)) break;
        if (detail::boxed_sum(weights, lower, caps, mid) > budget) {
            lo_lambda = mid;
        } else {
            hi_lambda = mid;
        }
    }

    // Closed-form refinement on the active set the bisection identified.
    Scalar lambda = hi_lambda;
    Scalar interior_w(0);
    Scalar fixed(0);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Scalar k = weights(i) / lambda;
        if (k >= caps(i)) {
            fixed += caps(i);
        } else if (k <= lower(i)) {
            fixed += lower(i);
        } else {
            interior_w += weights(i);
        }
    }
    if (interior_w > Scalar(0) && budget > fixed) {
        const Scalar refined = interior_w / (budget - fixed);
        if (refined >= lo_lambda * Scalar(1 - 1e-9) && refined <= hi_lambda * Scalar(1 + 1e-9)) lambda = refined;
    }

    out.lambda = lambda;
    out.keep.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) out.keep(i) = std::clamp(weights(i) / lambda, lower(i), caps(i));
    return out;
}

/// Classic capped waterfilling without lower bounds.
template <typename Scalar>
WaterfillResult<Scalar> waterfill(const VectorX<Scalar>& weights, const VectorX<Scalar>& caps, Scalar budget) {
    return waterfill<Scalar>(weights, VectorX<Scalar>::Zero(weights.size()), caps, budget);
}

/// Rounds a relaxed allocation to integers without exceeding `budget`:
/// floor every entry, then hand out the leftover one token at a time to the
/// entry with the largest marginal gain w·log((k+1)/k), ties broken by the
/// larger fractional remainder, the larger weight, then the lower index.
std::vector<std::int64_t> integerize(const VectorXs& relaxed, const VectorXs& weights,
                                     std::span<const std::int64_t> lower, std::span<const std::int64_t> caps,
                                     std::int64_t budget);

/// Σ -w_i log k_i over the given entries.
double allocation_objective(const VectorXs& weights, std::span<const std::int64_t> keep);

struct AllocationResult {
    /// Keep count per node id; active-path and open blocks get their n.
    std::vector<std::int64_t> keep;
    double lambda = 0.0;
};

/// Retention targets for every block of the tree under the current geometry.
///
/// Static applies the ratio/keep-count formulas per block. Waterfill chooses
/// the global scale so the budget binds: active-path blocks are pinned at
/// n_i, off-path blocks share the rest with lower bound block_floor and upper
/// bound `caps` (n_i when empty). Throws InfeasibleBudget when the active
/// path plus all floors do not fit.
AllocationResult allocate(const ThoughtTree& tree, const PolicyParams& params, AllocationMode mode,
                          std::span<const std::int64_t> caps = {});

} // namespace arbor
