#pragma once

#include "forced_osc/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace forced_osc {

/// Acceleration law q̈ = v(t, q, q̇) in chart coordinates.
using AccelFn = std::function<Vec(double t, const Vec& q, const Vec& qd)>;

/// Γ[k](i, j) = Γ^k_{ij}.
using Christoffel = std::vector<Mat>;
using ChristoffelFn = std::function<Christoffel(const Vec& q)>;

/// Nagumo-type growth bound: each component of the field is bounded by
/// a + b‖q̇‖^(2-δ).
struct GrowthBound {
    double a = 0.0;
    double b = 0.0;
    double delta = 1.0;
};

/// Kinetic-energy metric T = ½ A(q) q̇·q̇.
struct MetricSpec {
    std::function<Mat(const Vec&)> A;
    ChristoffelFn christoffel;  // empty: central differences of A
    double fd_step = 1e-5;
    /// Chart validity used by integrators; empty means the whole of R^n.
    std::function<bool(const Vec&)> in_chart;
};

/// A second-order non-autonomous system, T-periodic in time.
///
/// For metric systems `force` holds the covariant right-hand side v of
/// ∇_q̇ q̇ = v (so that the cutoff can act on v alone) and `accel` is the
/// full chart acceleration −Γ(q̇, q̇) + v.  For flat systems `force` is empty
/// and `accel` is the field itself.
struct SystemSpec {
    std::string name;
    int dim = 1;
    double period = kTwoPi;
    AccelFn accel;
    AccelFn force;
    std::optional<MetricSpec> metric;
    std::optional<GrowthBound> growth;
    /// Coordinates identified modulo 2π (periodic orbits may wind in them).
    std::vector<bool> angular;
    /// Integration aborts with ChartSingularity when this returns false.
    std::function<bool(const Vec&)> in_chart;

    Vec acceleration(double t, const State& s) const { return accel(t, s.q, s.qd); }
    bool is_angular(int i) const { return i < static_cast<int>(angular.size()) && angular[i]; }
    /// The covariant field v (equal to accel for flat systems).
    Vec field(double t, const Vec& q, const Vec& qd) const { return force ? force(t, q, qd) : accel(t, q, qd); }
};

/// Axis-aligned sampling box used by validation checks.
struct SampleBox {
    Vec q_lo, q_hi;
    double qd_cap = 1.0;
};

/// Largest |accel(t, q, q̇) − accel(t + T, q, q̇)| over `samples` seeded random
/// points of the box.
double periodicity_defect(const SystemSpec& system, const SampleBox& box, int samples,
                          std::uint64_t seed);

/// Difference b − a with angular coordinates wrapped into (−π, π].
Vec wrapped_difference(const SystemSpec& system, const Vec& a, const Vec& b);

double wrap_angle(double x);

}  // namespace forced_osc
