// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/episode.hpp"
#include "arbor/msve.hpp"

#include <gtest/gtest.h>

#include <random>

namespace arbor {
namespace {

MsveWeights weights(double b, double v, double u, double a) {
    MsveWeights w;
    w.theta << b, v, u, a;
    return w;
}

TEST(MsveScore, ZeroWeightsGiveHalf) {
    EXPECT_DOUBLE_EQ(msve_score(Vector3s(0.3, 0.9, 0.1), weights(0, 0, 0, 0)), 0.5);
    EXPECT_DOUBLE_EQ(msve_score(Vector3s(1, 1, 1), weights(0, 0, 0, 0)), 0.5);
}

TEST(MsveScore, Saturates) {
    EXPECT_NEAR(msve_score(Vector3s(1, 0.2, 0.2), weights(0, 1e3, 0, 0)), 1.0, 1e-15);
    EXPECT_NEAR(msve_score(Vector3s(1, 0.2, 0.2), weights(0, -1e3, 0, 0)), 0.0, 1e-15);
}

TEST(MsveScore, HandValue) {
    EXPECT_NEAR(msve_score(Vector3s(0.5, 0.5, 0.5), weights(0, 1, 1, 1)), 0.8175744761936437, 1e-15);
}

TEST(MsveScore, FloatAndDoubleAgree) {
    const Eigen::Vector3f phi(0.2f, 0.7f, 0.1f);
    const auto w = weights(-1, 2, 0.5, 3);
    EXPECT_NEAR(msve_score(phi, w), msve_score(phi.cast<double>(), w), 1e-6);
}

TEST(MsveScore, RejectsNonFinite) {
    EXPECT_THROW(msve_score(Vector3s(std::nan(""), 0, 0), weights(0, 0, 0, 0)), Error);
}

HindsightEpisode three_blocks() {
    HindsightEpisode h;
    h.retention = VectorXs::Ones(3);
    h.closed_blocks = {0, 1, 2};
    h.features = {Vector3s(0.1, 0.2, 0.3), Vector3s(0.9, 0.9, 0.1), Vector3s(0.4, 0.4, 0.4)};
    return h;
}

TEST(Hindsight, IgnoredBlockGetsZeroCriticalGetsOne) {
    // Only block 1 matters.
    const SuccessFn success = [](const VectorXs& r) { return r(1) >= 1.0 ? 1.0 : 0.0; };
    const auto t = hindsight_targets(three_blocks(), success);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0].target, 0.0);
    EXPECT_EQ(t[1].target, 1.0);
    EXPECT_EQ(t[2].target, 0.0);
    EXPECT_EQ(t[1].features, Vector3s(0.9, 0.9, 0.1));
}

TEST(Hindsight, RequiresFullRetention) {
    auto h = three_blocks();
    h.full_retention = false;
    EXPECT_THROW(hindsight_targets(h, [](const VectorXs&) { return 1.0; }), Error);
}

TEST(Hindsight, CriticalBlocksDominateOnSyntheticEpisodes) {
    WorkloadConfig cfg;
    cfg.seed = 500;
    double crit_sum = 0, other_sum = 0;
    int crit_n = 0, other_n = 0;
    for (int e = 0; e < 100; ++e) {
        auto wc = cfg;
        wc.seed = cfg.seed + static_cast<std::uint64_t>(e);
        const auto wl = generate_workload(wc);
        ControllerState st(PolicyParams{});
        FullKvPolicy full;
        run(st, full, wl.trace);
        HindsightEpisode h;
        h.retention = retention_ratios(st);
        for (const auto& b : st.tree.blocks()) {
            h.closed_blocks.push_back(b.id);
            h.features.push_back(feature_vector(b));
        }
        const auto t = hindsight_targets(h, [&](const VectorXs& r) { return success_score(r, wl.truth); });
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (wl.truth.is_critical(h.closed_blocks[k])) {
                crit_sum += t[k].target;
                ++crit_n;
            } else {
                other_sum += t[k].target;
                ++other_n;
            }
        }
    }
    ASSERT_GT(crit_n, 0);
    ASSERT_GT(other_n, 0);
    EXPECT_GE(crit_sum / crit_n, 0.9);
    EXPECT_LE(other_sum / other_n, 0.1);
}

TEST(Calibrate, SeparableDataRanksPerfectly) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CalibrationExample> train, test;
    for (int i = 0; i < 200; ++i) {
        const bool crit = i % 4 == 0;
        CalibrationExample ex{Vector3s(crit ? 1.0 : 0.0, u(rng), u(rng)), crit ? 1.0 : 0.0};
        (i < 100 ? train : test).push_back(ex);
    }
    const auto fit = calibrate(train);
    double min_crit = 1, max_other = 0;
    for (const auto& ex : test) {
        const double s = msve_score(ex.features, fit.weights);
        if (ex.target > 0.5) min_crit = std::min(min_crit, s);
        else max_other = std::max(max_other, s);
    }
    EXPECT_GT(min_crit, max_other);
}

TEST(Calibrate, ConstantTargetFitsBias) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CalibrationExample> ex;
    for (int i = 0; i < 100; ++i) ex.push_back({Vector3s(u(rng), u(rng), u(rng)), 0.3});
    CalibrationOptions opt;
    opt.epochs = 20000;
    const auto fit = calibrate(ex, opt);
    EXPECT_NEAR(logistic(fit.weights.theta(0) + fit.weights.theta.tail<3>().dot(fit.weights.feature_mean)), 0.3, 1e-3);
    for (const auto& e : ex) EXPECT_NEAR(msve_score(e.features, fit.weights), 0.3, 5e-3);
}

TEST(Calibrate, LossNeverIncreasesAndIsDeterministic) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<CalibrationExample> ex;
    for (int i = 0; i < 150; ++i) {
        Vector3s phi(u(rng), u(rng), u(rng));
        ex.push_back({phi, std::clamp(0.7 * phi(0) - 0.2 * phi(1) + 0.1 * u(rng), 0.0, 1.0)});
    }
    const auto a = calibrate(ex);
    const auto b = calibrate(ex);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.loss_history, b.loss_history);
    for (std::size_t i = 1; i < a.loss_history.size(); ++i) EXPECT_LE(a.loss_history[i], a.loss_history[i - 1]);
    EXPECT_LE(a.loss_history.back(), a.loss_history.front());
    EXPECT_NEAR(calibration_loss(ex, a.weights), a.loss_history.back(), 1e-12);
    EXPECT_NEAR(a.weights.feature_mean(0), [&] {
        double s = 0;
        for (const auto& e : ex) s += e.features(0);
        return s / static_cast<double>(ex.size());
    }(), 1e-12);
}

TEST(Calibrate, EmptyInputRejected) { EXPECT_THROW(calibrate({}), Error); }

TEST(Calibrate, HeldOutRankCorrelationSmoke) {
    WorkloadConfig cfg;
    cfg.seed = 2000;
    const auto ex = collect_calibration_examples(cfg, 20, PolicyParams{});
    const auto fit = calibrate(ex);
    cfg.seed = 3000;
    const auto scored = score_blocks(cfg, 10, fit.weights, PolicyParams{});
    EXPECT_GE(spearman(scored.score, scored.utility), 0.8);
}

TEST(Spearman, KnownValues) {
    EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
    EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
    // Average ranks with a tie: x ranks [0, 1.5, 1.5, 3].
    EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}), 0.9486832980505138, 1e-12);
}

} // namespace
} // namespace arbor
