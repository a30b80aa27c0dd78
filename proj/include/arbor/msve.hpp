// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace arbor {

/// Logistic fusion weights: [bias, v, u, a].
struct MsveWeights {
    Vector4s theta = Vector4s::Zero();
    /// Calibration-set feature means; an ablated feature is replaced by its mean.
    Vector3s feature_mean = Vector3s::Zero();

    bool operator==(const MsveWeights& o) const { return theta == o.theta && feature_mean == o.feature_mean; }
};

/// Weights fitted on the default synthetic workload (100 full-retention
/// episodes, seed 1000); used when a config does not supply its own.
inline MsveWeights default_msve_weights() {
    MsveWeights w;
    w.theta << -3.1227, 6.3650, -0.7795, 1.9344;
    w.feature_mean << 0.2237, 0.8402, 0.0265;
    return w;
}

template <typename Scalar>
Scalar logistic(Scalar x) {
    using std::exp;
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-x)) : exp(x) / (Scalar(1) + exp(x));
}

/// Block utility s = clip(σ(θ₀ + θ·φ), 0, 1).
template <typename Derived>
typename Derived::Scalar msve_score(const Eigen::MatrixBase<Derived>& phi, const MsveWeights& w) {
    using Scalar = typename Derived::Scalar;
    static_assert(Derived::RowsAtCompileTime == 3 || Derived::RowsAtCompileTime == Eigen::Dynamic);
    ARBOR_CHECK(phi.size() == 3, "feature vector must have 3 entries");
    ARBOR_CHECK(phi.allFinite() && w.theta.allFinite(), "non-finite MSVE input");
    const Scalar z = Scalar(w.theta(0)) + phi.dot(w.theta.tail<3>().template cast<Scalar>());
    const Scalar s = logistic(z);
    return s < Scalar(0) ? Scalar(0) : (s > Scalar(1) ? Scalar(1) : s);
}

struct CalibrationExample {
    Vector3s features = Vector3s::Zero();
    double target = 0.0;
};

/// A full-retention trajectory as seen by the leave-one-out labeler.
struct HindsightEpisode {
    /// Retention ratio per node (1 for every block under full retention).
    VectorXs retention;
    /// Closed blocks with their final features.
    std::vector<std::int32_t> closed_blocks;
    std::vector<Vector3s> features;
    bool full_retention = true;
};

/// Success score in [0, 1] as a function of per-node retention ratios.
using SuccessFn = std::function<double(const VectorXs& retention)>;

/// Masks each closed block in turn and labels it with the resulting success drop.
std::vector<CalibrationExample> hindsight_targets(const HindsightEpisode& episode, const SuccessFn& success);

struct CalibrationOptions {
    int epochs = 3000;
    double learning_rate = 4.0;
    std::uint64_t seed = 0;
    int max_halvings = 20;
};

struct CalibrationResult {
    MsveWeights weights;
    std::vector<double> loss_history;
};

/// Full-batch gradient descent on the mean squared error between σ(θᵀφ) and
/// the targets. A step that would raise the loss is retried at half the rate.
CalibrationResult calibrate(const std::vector<CalibrationExample>& examples, const CalibrationOptions& options = {});

double calibration_loss(const std::vector<CalibrationExample>& examples, const MsveWeights& weights);

} // namespace arbor
