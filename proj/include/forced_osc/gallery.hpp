#pragma once

#include "forced_osc/barrier.hpp"
#include "forced_osc/curve.hpp"
#include "forced_osc/system.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace forced_osc {

using ScalarForce = std::function<double(double t, double q, double qd)>;
using TimeFunction = std::function<double(double t)>;

/// q̈ = accel(t, q, q̇) in R^dim.
SystemSpec flat_system(std::string name, int dim, double T, AccelFn accel);

/// Pendulum in a horizontal force field: q̈ = f(t, q, q̇) sin q − cos q.
/// `bound` is a known constant C ≥ |f|; without it there is no growth bound
/// and Error(UnboundedForce) is thrown.
SystemSpec pendulum_system(ScalarForce f, double T, std::optional<double> bound);

/// Bead on a fixed curve under gravity and a horizontal force f(t):
/// q̈ = f(t) ξ′(q) − η′(q).
SystemSpec curve_pendulum_system(const CurveSpec& curve, TimeFunction f, double T,
                                 std::optional<double> bound = std::nullopt);

/// Rotation law φ(t) of the curve about the origin, counter-clockwise.
struct RotationLaw {
    TimeFunction phi;
    TimeFunction dphi;
    TimeFunction ddphi;
};

/// Unit mass sliding on a curve rotating in a vertical plane, η pointing up
/// when φ = 0:
/// s̈ = −φ̈(ξη′ − ηξ′) + φ̇²(ξξ′ + ηη′) − (ξ′ sin φ + η′ cos φ).
SystemSpec rotating_curve_system(const CurveSpec& curve, const RotationLaw& law, double T);

struct VerticalTangents {
    double s1;  // rotated tangent pointing down, in [0, L)
    double s2;  // rotated tangent pointing up, lifted into (s1, s1 + L)
};

/// Solves ξ′ sin φ + η′ cos φ = ∓1.  Both are extrema of the left-hand side,
/// so they are bracketed as sign changes of its s-derivative on a grid of
/// `grid` points.  Throws Error(Discontinuity) unless there is exactly one
/// root of each kind.
VerticalTangents s1_s2_of_t(const CurveSpec& curve, const RotationLaw& law, double t, int grid = 1024);

/// Barriers confining the bead to the upper arc between the two vertical
/// tangents: lower = s2 − L, upper = s1, lifted continuously from t = 0.
/// Velocities use ṡ = −φ̇/κ; accelerations are central differences of ṡ.
BarrierPair rotating_curve_barriers(const CurveSpec& curve, const RotationLaw& law);

/// Morse interaction V(u) = ½(1 − e^{−(u−1)})² and its derivatives.
double morse_V(double u);
double morse_dV(double u);
double morse_ddV(double u);

struct ChainSpec {
    int n = 1;
    std::function<double(double t, double x)> F;
    std::optional<double> F_bound;

    double left_anchor() const { return 0.0; }
    double right_anchor() const { return 2.0 * (n + 1); }
};

/// n interior particles with anchors at 0 and 2(n + 1):
/// ẍ_i = V′(x_{i+1} − x_i) − V′(x_i − x_{i−1}) + F(t, x_i).
SystemSpec morse_chain_system(const ChainSpec& chain, double T);

/// Total interaction energy Σ V(x_{i+1} − x_i) including the anchors.
double chain_potential(const ChainSpec& chain, const Vec& x);

struct SignConditionReport {
    bool holds = true;
    /// min over sampled t of F at each lower barrier (must be > 0) and of
    /// −F at each upper barrier (must be > 0).
    std::vector<double> lower_margin;
    std::vector<double> upper_margin;
    double worst_margin = 0.0;
};

/// Field sign conditions at the barrier positions: F(t, x1_i(t)) > 0 and
/// F(t, x2_i(t)) < 0 on n_t samples of [0, T].
SignConditionReport chain_sign_conditions(const ChainSpec& chain, const std::vector<BarrierPair>& barriers,
                                          double T, int n_t);

MetricSpec flat_metric(int dim);

/// Round unit sphere in the polar chart (θ, φ), θ measured from +e_z.
/// The chart excludes θ < θ_min and θ > π − θ_min.
MetricSpec sphere_metric(double theta_min = 1e-3);

/// Γ^k_ij at q: closed form when available, otherwise central differences of
/// A with the Levi-Civita formula.  Throws Error(SingularMetric).
Christoffel christoffel(const MetricSpec& metric, const Vec& q);

/// ∇_q̇ q̇ = v: accel = −Γ(q̇, q̇) + v, with `force` holding v.
SystemSpec metric_system(std::string name, const MetricSpec& metric, int dim, AccelFn v, double T,
                         std::optional<GrowthBound> growth = std::nullopt);

SystemSpec geodesic_system(const MetricSpec& metric, int dim);

/// Largest asymmetry of A over seeded samples of the box; throws
/// Error(SingularMetric) if A fails to be positive definite at a sample.
double validate_metric(const MetricSpec& metric, const SampleBox& box, int samples, std::uint64_t seed);

using SphereForce = std::function<double(double t, const Eigen::Vector3d& r, const Eigen::Vector3d& rdot)>;

/// Unit-length spherical pendulum, unit mass, gravity `g` along −e_z and
/// horizontal force (Fx, Fy).  The covariant field is A⁻¹Jᵀ(−g e_z + F)
/// where J is the embedding Jacobian.  `bound` is a constant C ≥ ‖F‖.
SystemSpec spherical_pendulum_system(SphereForce Fx, SphereForce Fy, double T, std::optional<double> bound,
                                     double gravity = 1.0, double theta_min = 1e-3);

/// Embedding of the polar chart and its velocity map.
Eigen::Vector3d sphere_point(double theta, double phi);
Eigen::Vector3d sphere_velocity(double theta, double phi, double dtheta, double dphi);

struct GrowthGrid {
    int n_t = 16;
    Vec q_lo, q_hi;
    int n_q = 9;
    double qd_cap = 10.0;
    int n_qd = 9;
};

struct GrowthReport {
    bool holds = true;
    double worst_margin = 0.0;
    long samples = 0;
};

/// Checks ‖v‖ ≤ a + b‖q̇‖^{2−δ} on a tensor grid over [0, T] × box × [−cap, cap]^n.
/// Flat systems use the max norm of the field and the Euclidean norm of q̇;
/// metric systems use the A-norm for both.
GrowthReport growth_check(const SystemSpec& system, const GrowthGrid& grid);

struct BarrierConditionReport {
    bool holds = true;
    double worst_order = 0.0;       // min over t of x2 − x1
    double worst_lower = 0.0;       // min of ẍ1 − v at the lower barrier
    double worst_upper = 0.0;       // min of v − ẍ2 at the upper barrier
    double worst_periodicity = 0.0; // max |x(t + T) − x(t)| over the barriers
    std::vector<std::string> violations;
};

/// Barrier hypotheses on n_t samples of [0, T]: x1 < x2, ẍ1 > v at the lower
/// wall and ẍ2 < v at the upper wall.  For dim > 1 the other coordinates are
/// sampled in their boxes and velocities in [−qd_cap, qd_cap] (`samples`
/// seeded draws per time).
BarrierConditionReport check_barrier_conditions(const SystemSpec& system, const std::vector<BarrierPair>& barriers,
                                                int n_t, double qd_cap = 10.0, int samples = 32,
                                                std::uint64_t seed = 1);

}  // namespace forced_osc
