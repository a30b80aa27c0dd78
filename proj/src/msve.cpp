// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#include "arbor/msve.hpp"

#include <algorithm>
#include <random>

namespace arbor {

std::vector<CalibrationExample> hindsight_targets(const HindsightEpisode& episode, const SuccessFn& success) {
    ARBOR_CHECK(episode.full_retention, "hindsight labels require a full-retention episode");
    ARBOR_CHECK(episode.closed_blocks.size() == episode.features.size(), "features/blocks size mismatch");

    const double base = success(episode.retention);
    std::vector<CalibrationExample> out;
    out.reserve(episode.closed_blocks.size());
    VectorXs masked = episode.retention;
    for (std::size_t k = 0; k < episode.closed_blocks.size(); ++k) {
        const auto id = episode.closed_blocks[k];
        ARBOR_CHECK(id >= 0 && id < masked.size(), "closed block outside the retention vector");
        const double saved = masked(id);
        masked(id) = 0.0;
        const double drop = base - success(masked);
        masked(id) = saved;
        out.push_back({episode.features[k], std::clamp(drop, 0.0, 1.0)});
    }
    return out;
}

namespace {

struct Batch {
    Eigen::Matrix<double, Eigen::Dynamic, 4> x;
    VectorXs y;
};

Batch to_batch(const std::vector<CalibrationExample>& examples) {
    Batch b;
    const auto m = static_cast<Eigen::Index>(examples.size());
    b.x.resize(m, 4);
    b.y.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        b.x(r, 0) = 1.0;
        b.x.block<1, 3>(r, 1) = examples[r].features.transpose();
        b.y(r) = examples[r].target;
    }
    return b;
}

VectorXs predict(const Batch& b, const Vector4s& theta) {
    return (b.x * theta).unaryExpr([](double z) { return logistic(z); });
}

double mse(const Batch& b, const Vector4s& theta) {
    return (predict(b, theta) - b.y).squaredNorm() / static_cast<double>(b.y.size());
}

} // namespace

double calibration_loss(const std::vector<CalibrationExample>& examples, const MsveWeights& weights) {
    ARBOR_CHECK(!examples.empty(), "empty calibration set");
    return mse(to_batch(examples), weights.theta);
}

CalibrationResult calibrate(const std::vector<CalibrationExample>& examples, const CalibrationOptions& options) {
    ARBOR_CHECK(!examples.empty(), "empty calibration set");
    ARBOR_CHECK(examples.size() >= 10, "calibration needs at least 10 examples");
    ARBOR_CHECK(options.epochs > 0 && options.learning_rate > 0.0, "calibration hyperparameters must be positive");
    for (const auto& e : examples) {
        ARBOR_CHECK(e.features.allFinite() && e.target >= 0.0 && e.target <= 1.0, "invalid calibration example");
    }

    const Batch batch = to_batch(examples);
    const double m = static_cast<double>(batch.y.size());

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> init(0.0, 0.01);
    Vector4s theta;
    for (int k = 0; k < 4; ++k) theta(k) = init(rng);

    CalibrationResult result;
    for (const auto& e : examples) result.weights.feature_mean += e.features;
    result.weights.feature_mean /= m;
    double lr = options.learning_rate;
    double loss = mse(batch, theta);
    result.loss_history.push_back(loss);
    int halvings = 0;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const VectorXs p = predict(batch, theta);
        // d/dθ mean (σ - y)² = 2/m Xᵀ[(σ - y) σ (1 - σ)]
        const VectorXs residual = ((p - batch.y).array() * p.array() * (1.0 - p.array())).matrix();
        const Vector4s grad = (2.0 / m) * (batch.x.transpose() * residual);

        Vector4s next = theta - lr * grad;
        double next_loss = mse(batch, next);
        while (next_loss > loss && halvings < options.max_halvings) {
            lr *= 0.5;
            ++halvings;
            next = theta - lr * grad;
            next_loss = mse(batch, next);
        }
        if (next_loss > loss) break;
        theta = next;
        loss = next_loss;
        result.loss_history.push_back(loss);
    }

    result.weights.theta = theta;
    return result;
}

} // namespace arbor
