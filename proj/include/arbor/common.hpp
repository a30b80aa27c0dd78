// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace arbor {

/// Absolute position in the single global token stream.
using TokenPos = std::int64_t;

/// Dense node identifier, assigned in creation order.
using NodeId = std::int32_t;

inline constexpr NodeId kNoNode = -1;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VectorXs = VectorX<double>;
using Vector3s = Eigen::Matrix<double, 3, 1>;
using Vector4s = Eigen::Matrix<double, 4, 1>;

/// Precondition or lifecycle violation reported by any module.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The active path plus sinks plus per-block floors cannot fit the budget.
class InfeasibleBudget : public Error {
public:
    InfeasibleBudget(const std::string& what, std::int64_t minimal_budget)
        : Error(what), minimal_budget_(minimal_budget) {}

    std::int64_t minimal_budget() const noexcept { return minimal_budget_; }

private:
    std::int64_t minimal_budget_;
};

/// An internal invariant was found broken (a bug, not a user error).
class InvariantViolation : public Error {
public:
    using Error::Error;
};

#define ARBOR_CHECK(cond, msg)                                       \
    do {                                                             \
        if (!(cond)) {                                               \
            throw ::arbor::Error(std::string("arbor: ") + (msg));    \
        }                                                            \
    } while (0)

} // namespace arbor
