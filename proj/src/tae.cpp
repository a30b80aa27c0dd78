// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/tae.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace arbor {

std::string_view to_string(AllocationMode mode) {
    return mode == AllocationMode::Static ? "static" : "waterfill";
}

AllocationMode allocation_mode_from_string(std::string_view name) {
    if (name == "static") return AllocationMode::Static;
    if (name == "waterfill") return AllocationMode::Waterfill;
    throw Error("arbor: unknown allocation mode '" + std::string(name) + "'");
}

void PolicyParams::validate() const {
    ARBOR_CHECK(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive");
    ARBOR_CHECK(std::isfinite(gamma) && gamma >= 1.0, "gamma must be >= 1");
    ARBOR_CHECK(std::isfinite(lambda_d), "lambda_d must be finite");
    ARBOR_CHECK(std::isfinite(lambda_delta) && lambda_delta >= 0.0, "lambda_delta must be >= 0");
    ARBOR_CHECK(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    ARBOR_CHECK(r_min > 0.0 && r_min <= 1.0, "r_min must lie in (0, 1]");
    ARBOR_CHECK(k_min >= 1, "k_min must be >= 1");
    ARBOR_CHECK(l_tail >= 1, "l_tail must be >= 1");
    ARBOR_CHECK(delta >= 0, "delta must be >= 0");
    ARBOR_CHECK(budget > 0 && delta < budget, "budget must be positive and exceed delta");
    ARBOR_CHECK(theta.theta.allFinite(), "theta must be finite");
}

double value_geometry_weight(double s, double depth, double distance, const PolicyParams& p) {
    if (s <= 0.0) return 0.0;
    return std::pow(s, p.gamma) * std::exp(-p.lambda_d * depth) * std::exp(-p.lambda_delta * distance);
}

double retention_ratio(double s, double depth, double distance, bool on_path, const PolicyParams& p) {
    const double discount = on_path ? 1.0 : p.eta;
    return std::clamp(p.alpha * discount * value_geometry_weight(s, depth, distance, p), p.r_min, 1.0);
}

std::int64_t keep_count(double r, std::int64_t n, const PolicyParams& p) {
    ARBOR_CHECK(n >= 1, "keep_count requires n >= 1");
    const auto tail = std::min(p.l_tail, n);
    const auto scaled = static_cast<std::int64_t>(std::floor(r * static_cast<double>(n)));
    return std::min(n, std::max({p.k_min, tail, scaled}));
}

std::int64_t block_floor(std::int64_t n, const PolicyParams& p) {
    return std::min(n, std::max(p.k_min, std::min(p.l_tail, n)));
}

double priority(const ThoughtBlock& b, const TreeGeometry& g, const PolicyParams& p) {
    const bool on_path = g.contains(b.id);
    const double w = value_geometry_weight(b.score, b.depth, g.distances.at(b.id), p);
    return on_path ? w : p.eta * w;
}

std::vector<std::int64_t> integerize(const VectorXs& relaxed, const VectorXs& weights,
                                     std::span<const std::int64_t> lower, std::span<const std::int64_t> caps,
                                     std::int64_t budget) {
    const auto m = static_cast<std::size_t>(relaxed.size());
    ARBOR_CHECK(weights.size() == relaxed.size() && lower.size() == m && caps.size() == m,
                "integerize: size mismatch");

    std::vector<std::int64_t> k(m);
    std::int64_t used = 0;
    for (std::size_t i = 0; i < m; ++i) {
        auto f = static_cast<std::int64_t>(std::floor(relaxed(i) + 1e-9));
        k[i] = std::clamp(f, lower[i], caps[i]);
        used += k[i];
    }
    ARBOR_CHECK(used <= budget, "integerize: floors exceed budget");

    struct Candidate {
        double gain;
        double remainder;
        double weight;
        std::size_t index;
        bool operator<(const Candidate& o) const {
            if (gain != o.gain) return gain < o.gain;
            if (remainder != o.remainder) return remainder < o.remainder;
            if (weight != o.weight) return weight < o.weight;
            return index > o.index;
        }
    };
    auto make = [&](std::size_t i) {
        const double kk = static_cast<double>(std::max<std::int64_t>(k[i], 1));
        const double gain = k[i] == 0 ? std::numeric_limits<double>::infinity()
                                      : weights(i) * std::log((kk + 1.0) / kk);
        const double rem = std::max(0.0, relaxed(i) - static_cast<double>(k[i]));
        return Candidate{gain, rem, weights(i), i};
    };

    std::priority_queue<Candidate> heap;
    for (std::size_t i = 0; i < m; ++i) {
        if (k[i] < caps[i]) heap.push(make(i));
    }
    while (used < budget && !heap.empty()) {
        const auto top = heap.top();
        heap.pop();
        ++k[top.index];
        ++used;
        if (k[top.index] < caps[top.index]) heap.push(make(top.index));
    }
    return k;
}

double allocation_objective(const VectorXs& weights, std::span<const std::int64_t> keep) {
    double obj = 0.0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (weights(static_cast<Eigen::Index>(i)) == 0.0) continue;
        obj -= weights(static_cast<Eigen::Index>(i)) * std::log(static_cast<double>(keep[i]));
    }
    return obj;
}

AllocationResult allocate(const ThoughtTree& tree, const PolicyParams& params, AllocationMode mode,
                          std::span<const std::int64_t> caps) {
    const auto& g = tree.geometry();
    const auto count = tree.size();
    ARBOR_CHECK(g.on_path.size() == count, "allocate: geometry is stale");
    ARBOR_CHECK(caps.empty() || caps.size() == count, "allocate: caps size mismatch");

    AllocationResult out;
    out.keep.assign(count, 0);

    std::vector<NodeId> off_path;
    std::int64_t pinned = 0;
    for (const auto& b : tree.blocks()) {
        const bool protected_block = b.is_open() || g.contains(b.id);
        if (protected_block) {
            // A protected block that is still short of its span (no rehydration
            // yet) only occupies what it holds.
            const std::int64_t held = caps.empty() ? b.n() : std::min(caps[b.id], b.n());
            out.keep[b.id] = held;
            pinned += held;
            continue;
        }
        off_path.push_back(b.id);
        const std::int64_t cap = caps.empty() ? b.n() : std::min(caps[b.id], b.n());
        if (mode == AllocationMode::Static) {
            const double r = retention_ratio(b.score, b.depth, g.distances[b.id], false, params);
            out.keep[b.id] = std::min(keep_count(r, b.n(), params), std::max(cap, std::int64_t{0}));
        }
    }
    if (mode == AllocationMode::Static) return out;

    const auto m = static_cast<Eigen::Index>(off_path.size());
    VectorXs w(m), lo(m), hi(m);
    std::vector<std::int64_t> lo_i(m), hi_i(m);
    std::int64_t floors = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& b = tree.block(off_path[j]);
        const std::int64_t cap = caps.empty() ? b.n() : std::min(caps[b.id], b.n());
        hi_i[j] = cap;
        lo_i[j] = std::min(block_floor(b.n(), params), cap);
        floors += lo_i[j];
        w(j) = priority(b, g, params);
        lo(j) = static_cast<double>(lo_i[j]);
        hi(j) = static_cast<double>(hi_i[j]);
    }

    if (pinned + floors > params.budget) {
        throw InfeasibleBudget("arbor: active path (" + std::to_string(pinned) + ") plus floors (" +
                                   std::to_string(floors) + ") exceed budget " + std::to_string(params.budget),
                               pinned + floors);
    }
    if (m == 0) return out;

    const std::int64_t off_budget = params.budget - pinned;
    std::vector<std::int64_t> ks;
    if (off_budget <= 0) {
        ks = lo_i;
    } else {
        const auto relaxed = waterfill<double>(w, lo, hi, static_cast<double>(off_budget));
        out.lambda = relaxed.lambda;
        ks = integerize(relaxed.keep, w, lo_i, hi_i, off_budget);
    }
    for (Eigen::Index j = 0; j < m; ++j) out.keep[off_path[j]] = ks[j];
    return out;
}

} // namespace arbor
