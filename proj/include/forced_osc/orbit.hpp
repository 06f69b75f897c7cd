#pragma once

#include "forced_osc/ode.hpp"
#include "forced_osc/segment.hpp"
#include "forced_osc/system.hpp"

#include <complex>
#include <optional>
#include <vector>

namespace forced_osc {

struct ShootConfig {
    double tol_residual = 1e-9;
    int max_iters = 50;
    double fd_step = 1e-7;
    bool central_differences = false;
    /// Multiple-shooting sub-intervals of [0, T]; 1 is plain single shooting.
    int segments = 8;
    double backtrack = 0.5;
    double min_step = 1e-4;
    /// Integrator used by every period-map evaluation.
    IntegratorConfig integrator = tight_integrator();
    /// Dense samples recorded on the returned orbit.
    int n_dense = 2000;

    static IntegratorConfig tight_integrator() {
        IntegratorConfig c;
        c.rel_tol = c.abs_tol = 1e-12;
        return c;
    }
};

struct ConfinementReport {
    /// Per-kind minima over the dense checks; for metric balls `lower` holds
    /// −level(q) and `upper` is unused (+∞).
    double lower = 0.0;
    double upper = 0.0;
    double speed = 0.0;
    double margin = 0.0;
    /// (p − ε) − speed: positive when the orbit avoids the cutoff band.
    double band = 0.0;
    bool confined = false;
    bool band_clear = false;
    int n_checks = 0;
};

struct FloquetReport {
    Mat monodromy;
    std::vector<std::complex<double>> multipliers;
    double max_residual = 0.0;
    bool residual_ok = false;
};

struct PeriodicOrbit {
    State s0;
    double residual_norm = 0.0;  // max norm of P(s0) − s0, angles wrapped
    int iterations = 0;
    Trajectory trajectory;
    std::optional<ConfinementReport> confinement;
    std::optional<FloquetReport> floquet;
    double barrier_margin() const { return confinement ? confinement->margin : 0.0; }
};

/// State at t = T of the solution through (0, s0).
State period_map(const SystemSpec& system, const State& s0, const IntegratorConfig& cfg = ShootConfig::tight_integrator());

/// P(s) − s in stacked form with angular coordinates wrapped.
Vec shooting_residual(const SystemSpec& system, const State& s, const IntegratorConfig& cfg);

/// Damped Newton for a fixed point of the period map, run on the
/// multiple-shooting system over `segments` sub-intervals with
/// finite-difference Jacobians.  Accepts only when the single-shot residual
/// ‖P(s0) − s0‖∞ is below tol_residual.  When `bounds` is given, trial
/// steps whose s0 leaves the segment enlarged by 50% are rejected.
/// Throws Error(NoConvergence) or Error(SingularJacobian); the latter when
/// |det(I − DP)| < 1e-12 or its smallest singular value is below the
/// finite-difference noise level 10·tol/fd_step.
PeriodicOrbit newton_shoot(const SystemSpec& system, const State& guess, const ShootConfig& cfg = {},
                           const PeriodicSegment* bounds = nullptr);

struct MultistartConfig {
    /// Grid nodes per axis: q axes first, then q̇ axes; a single entry applies
    /// to every axis.
    std::vector<int> grid{10};
    int jobs = 1;
    ShootConfig shoot;
    int n_checks = 2000;
    double eps = 0.0;  // band half-width for the certification test
    double dedup = 1e-6;
    double speed_fraction = 1.0;  // velocity nodes span this fraction of the speed bound
    std::vector<State> extra_starts;  // tried after the grid; an empty grid means only these
};

struct StartRecord {
    State start;
    bool converged = false;
    double residual = 0.0;
    std::string failure;
};

struct MultistartResult {
    std::vector<PeriodicOrbit> orbits;
    std::vector<StartRecord> starts;
    long converged = 0;
    long outside = 0;  // converged to a fixed point outside W_0
};

/// Shoots from every interior node of a grid over W_0, deduplicates the
/// fixed points and verifies confinement of each.  Runs `jobs` worker
/// threads; the result is independent of the thread count.
MultistartResult multistart_search(const SystemSpec& system, const PeriodicSegment& segment,
                                   const MultistartConfig& cfg);

/// Nodes used by multistart_search (exposed for reporting).
std::vector<State> multistart_grid(const PeriodicSegment& segment, const std::vector<int>& counts,
                                   double speed_fraction = 1.0);

struct WindingReport {
    int index = 0;
    double total_angle = 0.0;
    long evaluations = 0;
    double min_norm = 0.0;
};

/// Period map with trajectories stopped at their first exit from W.  The
/// exit point at time τ is carried back to W_0 by the product structure of
/// the segment (affine in q, piecewise linear in q̇ fixing ±p and sending
/// ẋ_i(τ) to ẋ_i(0)).  Its interior fixed points are exactly the fixed points
/// of P whose trajectories stay in W.  1-DOF box segments only.
State stopped_period_map(const SystemSpec& system, const PeriodicSegment& segment, const State& s0,
                         const IntegratorConfig& cfg = ShootConfig::tight_integrator());

/// Winding number of P(s) − s along a closed polygon in the (q, q̇) plane of
/// a 1-DOF system, refined until every angle increment is below π/2.  With
/// `stop`, the stopped period map replaces P, so the result is the index of
/// the fixed points confined to the segment.
/// Throws Error(ZeroOnContour) or Error(RefinementLimit).
WindingReport winding_index(const SystemSpec& system, const std::vector<Eigen::Vector2d>& contour, int n_points,
                            const IntegratorConfig& cfg = ShootConfig::tight_integrator(), long max_evaluations = 200000,
                            const PeriodicSegment* stop = nullptr);

/// Rectangle [a, b] × [−c, c] traversed counterclockwise.
std::vector<Eigen::Vector2d> rectangle_contour(double a, double b, double c);

ConfinementReport verify_confinement(const PeriodicOrbit& orbit, const PeriodicSegment& segment, int n_checks,
                                     double eps = 0.0);

/// Monodromy DP(s0) by central differences of the period map.
FloquetReport floquet_multipliers(const SystemSpec& system, const PeriodicOrbit& orbit, double fd_step = 1e-6,
                                  const IntegratorConfig& cfg = ShootConfig::tight_integrator());

}  // namespace forced_osc
