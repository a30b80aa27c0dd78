// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/episode.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <cmath>
#include <thread>

namespace arbor {

std::int64_t full_kv_peak(const EpisodeTrace& trace) {
    std::int64_t n = 0;
    for (const auto& e : trace) n += e.type == EventKind::Token;
    return n;
}

std::int64_t budget_for_ratio(double rho, std::int64_t full_peak) {
    ARBOR_CHECK(rho > 0.0, "budget ratio must be positive");
    return static_cast<std::int64_t>(std::floor(rho * static_cast<double>(full_peak) + 1e-9));
}

EpisodeResult run_episode(CachePolicy& policy, const EpisodeTrace& trace, const GroundTruth& gt,
                          const PolicyParams& params, const ControllerOptions& options) {
    ControllerState state(params, options);
    const auto rr = run(state, policy, trace);

    EpisodeResult out;
    auto& m = out.metrics;
    const auto& cost = options.cost;
    m.budget = params.budget;
    m.tokens = rr.tokens;
    m.peak_retained_tokens = rr.peak_total;
    m.peak_pseudo_bytes = rr.peak_pseudo_bytes;
    m.rehydration_count = rr.counters.rehydrations;
    m.eviction_count = rr.counters.evictions;
    m.evicted_tokens = rr.counters.evicted_tokens;
    m.prefill_tokens = rr.counters.prefill_tokens;
    m.transition_events = rr.counters.transition_events;
    m.pressure_events = rr.counters.pressure_events;
    m.decode_seconds = static_cast<double>(rr.tokens) * cost.decode_seconds_per_token;
    m.prefill_seconds =
        static_cast<double>(rr.counters.prefill_tokens) * cost.prefill_ratio * cost.decode_seconds_per_token;
    m.policy_seconds = cost.instrumented ? rr.counters.policy_seconds
                                         : static_cast<double>(rr.counters.policy_ops) * cost.policy_seconds_per_op;
    m.simulated_time = m.decode_seconds + m.prefill_seconds + m.policy_seconds;
    m.policy_time_fraction = m.simulated_time > 0.0 ? m.policy_seconds / m.simulated_time : 0.0;
    m.oom = rr.oom;
    m.oom_minimal_budget = rr.oom_minimal_budget;
    if (!rr.oom && !state.tree.empty()) {
        out.retention = retention_ratios(state);
        m.success = success_model(state, gt);
        m.success_score = success_score(effective_retention(state), gt);
    }
    out.series = std::move(state.series);
    out.audit = std::move(state.audit);
    return out;
}

EpisodeResult run_episode(const std::string& policy, const EpisodeTrace& trace, const GroundTruth& gt,
                          const PolicyParams& params, const ControllerOptions& options) {
    auto setup = make_policy(policy, params);
    return run_episode(*setup.policy, trace, gt, setup.params, options);
}

SweepRow aggregate(const std::string& policy, double rho, const std::vector<Metrics>& metrics) {
    SweepRow r;
    r.policy = policy;
    r.rho = rho;
    r.episodes = static_cast<int>(metrics.size());
    if (metrics.empty()) return r;
    for (const auto& m : metrics) {
        r.success_rate += m.success ? 1.0 : 0.0;
        r.mean_success_score += m.success_score;
        r.mean_peak_tokens += static_cast<double>(m.peak_retained_tokens);
        r.mean_peak_ratio += m.tokens > 0 ? static_cast<double>(m.peak_retained_tokens) / static_cast<double>(m.tokens) : 0.0;
        r.mean_rehydrations += static_cast<double>(m.rehydration_count);
        r.mean_evictions += static_cast<double>(m.eviction_count);
        r.mean_simulated_time += m.simulated_time;
        r.mean_policy_fraction += m.policy_time_fraction;
        r.oom_rate += m.oom ? 1.0 : 0.0;
    }
    const double k = static_cast<double>(metrics.size());
    for (double* f : {&r.success_rate, &r.mean_success_score, &r.mean_peak_tokens, &r.mean_peak_ratio,
                      &r.mean_rehydrations, &r.mean_evictions, &r.mean_simulated_time, &r.mean_policy_fraction,
                      &r.oom_rate}) {
        *f /= k;
    }
    return r;
}

SweepResult sweep(const std::vector<std::string>& policies, const std::vector<double>& rhos,
                  const WorkloadConfig& cfg, const PolicyParams& params, const SweepOptions& options) {
    ARBOR_CHECK(options.episodes >= 1, "sweep needs at least one episode");
    ARBOR_CHECK(!policies.empty() && !rhos.empty(), "sweep needs at least one policy and one ratio");
    for (const auto& p : policies) make_policy(p, params);

    const auto n_cells = policies.size() * rhos.size();
    const auto n_eps = static_cast<std::size_t>(options.episodes);
    std::vector<std::vector<EpisodeResult>> results(n_cells, std::vector<EpisodeResult>(n_eps));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            const auto e = next.fetch_add(1);
            if (e >= n_eps) return;
            try {
                auto wc = cfg;
                wc.seed = cfg.seed + e;
                const auto wl = generate_workload(wc);
                const auto peak = full_kv_peak(wl.trace);
                for (std::size_t pi = 0; pi < policies.size(); ++pi) {
                    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
                        auto p = params;
                        p.budget = budget_for_ratio(rhos[ri], peak);
                        auto r = run_episode(policies[pi], wl.trace, wl.truth, p, options.controller);
                        if (!options.keep_episodes) {
                            r.series.clear();
                            r.audit.clear();
                        }
                        results[pi * rhos.size() + ri][e] = std::move(r);
                    }
                }
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = n_eps;
            }
        }
    };
    int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, static_cast<int>(n_eps));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    SweepResult out;
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
            auto& eps = results[pi * rhos.size() + ri];
            std::vector<Metrics> ms;
            ms.reserve(eps.size());
            for (const auto& r : eps) ms.push_back(r.metrics);
            out.rows.push_back(aggregate(policies[pi], rhos[ri], ms));
            if (options.keep_episodes) out.cells.push_back({policies[pi], rhos[ri], std::move(eps)});
        }
    }
    return out;
}

} // namespace arbor

namespace arbor {

namespace {

template <typename Fn>
void for_full_retention_episodes(const WorkloadConfig& cfg, int episodes, const PolicyParams& params, Fn&& fn) {
    for (int e = 0; e < episodes; ++e) {
        auto wc = cfg;
        wc.seed = cfg.seed + static_cast<std::uint64_t>(e);
        const auto wl = generate_workload(wc);
        ControllerState st(params);
        FullKvPolicy policy;
        run(st, policy, wl.trace);
        fn(st, wl);
    }
}

} // namespace

std::vector<CalibrationExample> collect_calibration_examples(const WorkloadConfig& cfg, int episodes,
                                                             const PolicyParams& params) {
    std::vector<CalibrationExample> out;
    for_full_retention_episodes(cfg, episodes, params, [&](ControllerState& st, const Workload& wl) {
        HindsightEpisode h;
        h.retention = retention_ratios(st);
        for (const auto& b : st.tree.blocks()) {
            if (b.is_open()) continue;
            auto& block = st.tree.block(b.id);
            refresh_score(st, block, {});
            h.closed_blocks.push_back(b.id);
            h.features.push_back(feature_vector(block));
        }
        auto t = hindsight_targets(h, [&](const VectorXs& r) { return success_score(r, wl.truth); });
        out.insert(out.end(), t.begin(), t.end());
    });
    return out;
}

ScoredBlocks score_blocks(const WorkloadConfig& cfg, int episodes, const MsveWeights& weights,
                          const PolicyParams& params) {
    ScoredBlocks out;
    for_full_retention_episodes(cfg, episodes, params, [&](ControllerState& st, const Workload& wl) {
        for (const auto& b : st.tree.blocks()) {
            if (b.is_open()) continue;
            auto& block = st.tree.block(b.id);
            refresh_score(st, block, {});
            out.score.push_back(msve_score(feature_vector(block), weights));
            out.utility.push_back(wl.truth.utility[static_cast<std::size_t>(b.id)]);
        }
    });
    return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    ARBOR_CHECK(x.size() == y.size() && x.size() >= 2, "spearman needs two equal-length samples");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double c = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        c += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0 || vy == 0) return 0.0;
    return c / std::sqrt(vx * vy);
}

} // namespace arbor
