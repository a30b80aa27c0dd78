// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/oracles.hpp"

#include "arbor/controller.hpp"
#include "arbor/evict.hpp"
#include "arbor/tae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <tuple>

namespace arbor {

std::vector<int> bfs_distances(const ThoughtTree& tree, NodeId source) {
    const auto n = tree.size();
    std::vector<std::vector<NodeId>> adj(n);
    for (const auto& b : tree.blocks()) {
        if (b.parent != kNoNode) {
            adj[b.id].push_back(b.parent);
            adj[b.parent].push_back(b.id);
        }
    }
    std::vector<int> dist(n, -1);
    std::queue<NodeId> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
        const auto x = q.front();
        q.pop();
        for (auto y : adj[x]) {
            if (dist[y] < 0) {
                dist[y] = dist[x] + 1;
                q.push(y);
            }
        }
    }
    return dist;
}

BruteForceAllocation brute_force_allocation(const std::vector<double>& weights,
                                            const std::vector<std::int64_t>& lower,
                                            const std::vector<std::int64_t>& caps, std::int64_t budget) {
    const auto m = weights.size();
    const auto cap_sum = std::accumulate(caps.begin(), caps.end(), std::int64_t{0});
    const auto target = std::min(budget, cap_sum);
    BruteForceAllocation best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> k(lower);
    // Odometer over the box.
    while (true) {
        if (std::accumulate(k.begin(), k.end(), std::int64_t{0}) == target) {
            double obj = 0.0;
            for (std::size_t i = 0; i < m; ++i) obj -= weights[i] * std::log(static_cast<double>(k[i]));
            if (obj < best.objective - 1e-12) {
                best.objective = obj;
                best.keep = k;
            }
        }
        std::size_t i = 0;
        while (i < m && k[i] == caps[i]) {
            k[i] = lower[i];
            ++i;
        }
        if (i == m) break;
        ++k[i];
    }
    return best;
}

std::vector<TokenPos> trim_by_sort(const std::vector<TokenPos>& tail, const std::vector<TokenPos>& heavy,
                                   std::int64_t k, const AttentionLedger& ledger) {
    // (tier, -score, -pos) ascending.
    std::vector<std::tuple<int, double, TokenPos>> ranked;
    for (auto p : tail) ranked.emplace_back(0, 0.0, -p);
    for (auto p : heavy) {
        if (std::find(tail.begin(), tail.end(), p) == tail.end()) {
            ranked.emplace_back(1, -ledger.post_close_mass(p), -p);
        }
    }
    std::sort(ranked.begin(), ranked.end());
    ranked.erase(std::unique(ranked.begin(), ranked.end()), ranked.end());
    std::vector<TokenPos> out;
    for (std::size_t i = 0; i < ranked.size() && static_cast<std::int64_t>(i) < k; ++i) {
        out.push_back(-std::get<2>(ranked[i]));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::int64_t> unit_step_pressure(std::vector<std::int64_t> keep, const std::vector<std::int64_t>& floors,
                                             const std::vector<double>& priorities,
                                             const std::vector<NodeId>& candidates, std::int64_t target) {
    auto total = std::accumulate(keep.begin(), keep.end(), std::int64_t{0});
    while (total > target) {
        NodeId pick = kNoNode;
        for (auto id : candidates) {
            if (keep[id] <= floors[id]) continue;
            if (pick == kNoNode || priorities[id] < priorities[pick] ||
                (priorities[id] == priorities[pick] && id < pick)) {
                pick = id;
            }
        }
        if (pick == kNoNode) break;
        --keep[pick];
        --total;
    }
    return keep;
}

std::vector<std::string> verify_suite_names() {
    return {"tree-distance", "waterfill", "trim", "pressure"};
}

namespace {

using Rng = std::mt19937_64;

template <typename T>
std::string show(const std::vector<T>& v) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ']';
    return os.str();
}

void fail(SuiteResult& r, const std::string& what) {
    if (r.failures++ == 0) r.first_failure = what;
}

ThoughtTree random_tree(Rng& rng, int nodes) {
    ThoughtTree t;
    auto root = t.add_block(std::nullopt, 0);
    t.append_token(root);
    t.close_block(root, t.next_position() - 1);
    for (int i = 1; i < nodes; ++i) {
        std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(t.size()) - 1);
        const NodeId parent = pick(rng);
        t.set_active_leaf(parent);
        const auto id = t.add_block(parent, t.next_position());
        t.append_token(id);
        t.close_block(id, t.next_position() - 1);
    }
    return t;
}

SuiteResult tree_suite(Rng& rng, int cases, bool fault) {
    SuiteResult r;
    r.name = "tree-distance";
    for (int c = 0; c < cases; ++c) {
        std::uniform_int_distribution<int> size(1, 40);
        auto t = random_tree(rng, size(rng));
        std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(t.size()) - 1);
        const NodeId leaf = pick(rng);
        auto got = t.set_active_leaf(leaf).distances;
        if (fault && got.size() > 1) got.back() += 1;
        const auto want = bfs_distances(t, leaf);
        ++r.cases;
        const NodeId a = pick(rng), b = pick(rng);
        if (got != want) {
            fail(r, "leaf " + std::to_string(leaf) + ": got " + show(got) + " want " + show(want));
        } else if (t.tree_distance(a, b) != bfs_distances(t, a)[b]) {
            fail(r, "tree_distance(" + std::to_string(a) + "," + std::to_string(b) + ")");
        }
    }
    return r;
}

SuiteResult waterfill_suite(Rng& rng, int cases, bool fault) {
    SuiteResult r;
    r.name = "waterfill";
    std::uniform_int_distribution<int> mdist(1, 4);
    std::uniform_real_distribution<double> wdist(0.01, 3.0);
    for (int c = 0; c < cases; ++c) {
        const auto m = static_cast<std::size_t>(mdist(rng));
        std::vector<double> w(m);
        std::vector<std::int64_t> lo(m), cap(m);
        for (std::size_t i = 0; i < m; ++i) {
            w[i] = wdist(rng);
            cap[i] = std::uniform_int_distribution<std::int64_t>(1, 7)(rng);
            lo[i] = std::uniform_int_distribution<std::int64_t>(1, cap[i])(rng);
        }
        const auto lo_sum = std::accumulate(lo.begin(), lo.end(), std::int64_t{0});
        const auto cap_sum = std::accumulate(cap.begin(), cap.end(), std::int64_t{0});
        const auto budget = std::uniform_int_distribution<std::int64_t>(lo_sum, cap_sum)(rng);

        VectorXs wv(static_cast<Eigen::Index>(m)), lv(wv.size()), cv(wv.size());
        for (std::size_t i = 0; i < m; ++i) {
            wv(static_cast<Eigen::Index>(i)) = w[i];
            lv(static_cast<Eigen::Index>(i)) = static_cast<double>(lo[i]);
            cv(static_cast<Eigen::Index>(i)) = static_cast<double>(cap[i]);
        }
        const auto relaxed = waterfill<double>(wv, lv, cv, static_cast<double>(budget));
        auto got = integerize(relaxed.keep, wv, lo, cap, budget);
        if (fault && m > 1) {
            for (std::size_t i = 0; i + 1 < m; ++i) {
                if (got[i] > lo[i] && got[i + 1] < cap[i + 1] && w[i] != w[i + 1]) {
                    // Move one token to whichever neighbour makes things worse.
                    const double move = w[i + 1] * std::log(double(got[i + 1] + 1) / double(got[i + 1])) -
                                        w[i] * std::log(double(got[i]) / double(got[i] - 1));
                    if (move < 0) {
                        --got[i];
                        ++got[i + 1];
                        break;
                    }
                }
            }
        }
        const auto want = brute_force_allocation(w, lo, cap, budget);
        const double obj = allocation_objective(wv, got);
        ++r.cases;
        bool ok = std::accumulate(got.begin(), got.end(), std::int64_t{0}) == std::min(budget, cap_sum);
        for (std::size_t i = 0; i < m; ++i) ok = ok && got[i] >= lo[i] && got[i] <= cap[i];
        ok = ok && obj <= want.objective + 1e-9;
        if (!ok) {
            fail(r, "w=" + show(w) + " lo=" + show(lo) + " cap=" + show(cap) + " B=" + std::to_string(budget) +
                        ": got " + show(got) + " want " + show(want.keep));
        }
    }
    return r;
}

SuiteResult trim_suite(Rng& rng, int cases, bool fault) {
    SuiteResult r;
    r.name = "trim";
    for (int c = 0; c < cases; ++c) {
        const int n = std::uniform_int_distribution<int>(2, 30)(rng);
        AttentionLedger ledger;
        for (TokenPos p = 0; p <= n; ++p) ledger.add_position(p);
        ledger.mark_closed(0, n - 1);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int row = 0; row < 3; ++row) {
            std::vector<std::pair<TokenPos, double>> ws;
            double s = 0.0;
            for (TokenPos p = 0; p <= n; ++p) {
                // Quantized weights force ties.
                const double x = std::floor(u(rng) * 4.0) + 1.0;
                ws.emplace_back(p, x);
                s += x;
            }
            for (auto& [p, x] : ws) x /= s;
            ledger.record_row(30, 0, n, ws);
        }
        std::vector<TokenPos> tail, heavy;
        const int l = std::uniform_int_distribution<int>(0, n)(rng);
        for (TokenPos p = n - l; p < n; ++p) tail.push_back(p);
        for (TokenPos p = 0; p < n; ++p) {
            if (u(rng) < 0.5) heavy.push_back(p);
        }
        const auto k = std::uniform_int_distribution<std::int64_t>(0, n)(rng);
        auto got = trim(tail, heavy, k, ledger);
        if (fault && !got.empty()) got.erase(got.begin());
        const auto want = trim_by_sort(tail, heavy, k, ledger);
        ++r.cases;
        if (got != want) {
            fail(r, "tail=" + show(tail) + " heavy=" + show(heavy) + " k=" + std::to_string(k) + ": got " +
                        show(got) + " want " + show(want));
        }
    }
    return r;
}

SuiteResult pressure_suite(Rng& rng, int cases, bool fault) {
    SuiteResult r;
    r.name = "pressure";
    for (int c = 0; c < cases; ++c) {
        const int m = std::uniform_int_distribution<int>(1, 12)(rng);
        std::vector<std::int64_t> keep(m), floors(m);
        std::vector<double> prio(m);
        std::vector<NodeId> cand;
        for (int i = 0; i < m; ++i) {
            keep[i] = std::uniform_int_distribution<std::int64_t>(1, 20)(rng);
            floors[i] = std::uniform_int_distribution<std::int64_t>(1, keep[i])(rng);
            // Few distinct priorities so ties are common.
            prio[i] = std::uniform_int_distribution<int>(0, 3)(rng) * 0.25;
            if (std::uniform_int_distribution<int>(0, 3)(rng) > 0) cand.push_back(i);
        }
        std::shuffle(cand.begin(), cand.end(), rng);
        const auto total = std::accumulate(keep.begin(), keep.end(), std::int64_t{0});
        const auto target = std::uniform_int_distribution<std::int64_t>(0, total)(rng);
        auto got = reduce_to_target(keep, floors, prio, cand, target);
        if (fault && !cand.empty() && got[cand.front()] > floors[cand.front()]) --got[cand.front()];
        const auto want = unit_step_pressure(keep, floors, prio, cand, target);
        ++r.cases;
        if (got != want) fail(r, "keep=" + show(keep) + " target=" + std::to_string(target) + ": got " + show(got) +
                                     " want " + show(want));
    }
    return r;
}

} // namespace

std::vector<SuiteResult> run_verify_suites(std::uint64_t seed, int cases, const std::optional<std::string>& fault) {
    if (fault) {
        const auto names = verify_suite_names();
        if (std::find(names.begin(), names.end(), *fault) == names.end()) {
            throw Error("arbor: unknown verify suite '" + *fault + "'");
        }
    }
    auto is_fault = [&](const char* name) { return fault && *fault == name; };
    Rng rng(seed);
    std::vector<SuiteResult> out;
    out.push_back(tree_suite(rng, cases, is_fault("tree-distance")));
    out.push_back(waterfill_suite(rng, cases, is_fault("waterfill")));
    out.push_back(trim_suite(rng, cases, is_fault("trim")));
    out.push_back(pressure_suite(rng, cases, is_fault("pressure")));
    return out;
}

} // namespace arbor
