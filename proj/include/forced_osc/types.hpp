#pragma once

#include <Eigen/Dense>

#include <numbers>

namespace forced_osc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Phase-space point (q, q̇) in chart coordinates.
struct State {
    Vec q;
    Vec qd;

    State() = default;
    State(Vec q_, Vec qd_) : q(std::move(q_)), qd(std::move(qd_)) {}

    Eigen::Index dim() const { return q.size(); }
    bool finite() const { return q.allFinite() && qd.allFinite(); }

    /// (q, q̇) stacked into one vector of length 2·dim.
    Vec stacked() const {
        Vec y(2 * q.size());
        y << q, qd;
        return y;
    }

    static State unstack(const Vec& y) {
        const auto n = y.size() / 2;
        return State(y.head(n), y.tail(n));
    }
};

/// Convenience for the ubiquitous one-degree-of-freedom case.
inline State state1(double q, double qd) {
    return State(Vec::Constant(1, q), Vec::Constant(1, qd));
}

}  // namespace forced_osc
