#pragma once

#include "forced_osc/barrier.hpp"
#include "forced_osc/system.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace forced_osc {

enum class FaceType { LowerWall, UpperWall, LowerCap, UpperCap, Boundary, SpeedShell };
enum class FaceClass { Pending, Exit, Entry, TangentExit, Unresolved };

std::string_view to_string(FaceType type);
std::string_view to_string(FaceClass cls);

/// A piece of ∂W_t.  Box faces are parametrized by one free edge variable
/// (q̇_j on walls, q_j on caps) whose admissible interval at time t is
/// `span(t)`; the remaining coordinates range over the box.
struct Face {
    std::string id;
    FaceType type = FaceType::LowerWall;
    int coord = 0;
    std::function<std::pair<double, double>(double)> span;
    /// Open faces are sampled away from their endpoints, which belong to the
    /// adjacent closed exit faces.
    bool closed = true;
    /// Metric-ball boundary faces: sign of ∇level·q̇ selected (+1 or −1).
    int normal_sign = 0;
    FaceClass expected = FaceClass::Entry;
    FaceClass classification = FaceClass::Pending;

    bool is_exit() const { return classification == FaceClass::Exit || classification == FaceClass::TangentExit; }
};

/// Smooth region D = {level < 0} with a sampling box around it.
struct RegionSpec {
    std::string name;
    std::function<double(const Vec&)> level;
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess;
    Vec q_lo, q_hi;
};

/// Spherical cap {cos θ > ε} in the polar chart.
RegionSpec polar_cap_region(double eps);
/// Ball ‖q − c‖ < r in a flat chart.
RegionSpec ball_region(const Vec& centre, double r);

enum class SegmentKind { Box, MetricBall };

/// Ważewski periodic segment over [0, T].
struct PeriodicSegment {
    SegmentKind kind = SegmentKind::Box;
    double period = kTwoPi;
    int dim = 1;
    double p = 1.0;
    std::vector<BarrierPair> barriers;
    std::optional<RegionSpec> region;
    std::optional<MetricSpec> metric;
    std::vector<Face> faces;
    /// Caps classified against the cutoff-modified system.
    bool caps_modified = false;
    std::vector<std::string> notes;

    /// Signed distance-like margin to ∂W_t: positive inside.  Box segments
    /// use min over coordinates of (q − x1, x2 − q, p − |q̇|); metric balls
    /// use min(−level(q), p − ½⟨q̇, Aq̇⟩).
    double margin(double t, const State& s) const;
    bool contains(double t, const State& s) const { return margin(t, s) >= 0.0; }
};

/// γ(t) = arccot f(t) ∈ (0, π).
double gamma_of_t(const std::function<double(double)>& f, double t);

/// W = [0, T] × [0, π] × [−p, p] with the exit faces of the horizontally
/// forced pendulum: right {q = 0, q̇ ≤ 0}, left {q = π, q̇ ≥ 0},
/// top {q ≥ γ(t), q̇ = p}, bottom {q ≤ γ(t), q̇ = −p}.  The rest of the
/// boundary is pre-marked entry.
PeriodicSegment build_pendulum_segment(std::function<double(double)> f, double p, double T);

/// W = {x_j ∈ [x1_j(t), x2_j(t)], q̇_j ∈ [−p, p]}.  Walls split at the
/// tangency curves q̇_j = ẋ_i(t); the exit parts are {q = x2, q̇ ≥ ẋ2} and
/// {q = x1, q̇ ≤ ẋ1}.  Caps are pre-marked entry: under the cutoff-modified
/// field the acceleration at |q̇_j| = p is pure friction.
/// Throws Error(SpeedBoundTooSmall) when p ≤ max |ẋ_i| on a 512-point grid.
PeriodicSegment build_barrier_segment(const std::vector<BarrierPair>& barriers, double p, double T);

/// W = {q ∈ D̄, ½⟨q̇, Aq̇⟩ ≤ p}: the solid reading of the speed condition.
/// Faces: boundary with ∇level·q̇ ≥ 0 (exit), boundary with ∇level·q̇ < 0
/// (entry) and the speed shell (entry for the friction-modified field).
PeriodicSegment build_metric_ball_segment(const MetricSpec& metric, const RegionSpec& region, int dim, double p,
                                          double T);

struct FaceSample {
    std::size_t face = 0;
    double t = 0.0;
    State state;
    double rate = 0.0;    // outward first-order rate −ġ
    double second = 0.0;  // outward second-order rate −g̈ (tangencies only)
    FaceClass cls = FaceClass::Pending;
};

struct OutwardRates {
    double rate = 0.0;
    double second = 0.0;
    FaceClass cls = FaceClass::Pending;
};

/// Outward rates of face `face` at one boundary point.
OutwardRates outward_rates(const SystemSpec& system, const PeriodicSegment& segment, std::size_t face, double t,
                           const State& s);

struct FaceResult {
    std::string id;
    FaceClass expected = FaceClass::Entry;
    FaceClass classification = FaceClass::Pending;
    bool verified = false;
    long samples = 0;
    long tangent_samples = 0;
    long unresolved = 0;
    long mismatched = 0;
    /// Smallest strictness margin over the face: the first-order rate, or the
    /// second-order rate at tangencies, signed so that positive agrees with
    /// the expected class.
    double margin = 0.0;
};

struct FaceCheckReport {
    std::vector<FaceResult> faces;
    std::vector<FaceSample> samples;
    bool all_verified = false;
    long unresolved = 0;
    double exit_margin = 0.0;  // min margin over exit faces
};

inline constexpr double kStrictTol = 1e-9;

/// Samples every face (1-DOF: an n_t × n_u grid with n_t·n_u ≥ n_samples;
/// otherwise n_samples seeded random points), evaluates the outward rate of
/// the extended field (1, q̇, accel) and escalates |rate| ≤ 1e-9 to the
/// second-order rate along the flow.  Updates the face classifications.
/// Points failing both tests are counted as unresolved, never guessed.
FaceCheckReport check_exit_faces(const SystemSpec& system, PeriodicSegment& segment, int n_samples,
                                 std::uint64_t seed = 1, bool keep_samples = false);

/// Independent perimeter scan of W_t (1-DOF box segments): classifies
/// n points of the rectangle boundary and counts the runs of exit points.
int scan_exit_components(const SystemSpec& system, const PeriodicSegment& segment, double t, int n);

struct IndexReport {
    int chi_W = 1;
    int chi_exit = 0;
    int index = 1;
    int exit_components = 0;
    std::string method;
};

/// χ(W_0) − χ(W_0^{--}) for product segments.  1-DOF: exit arcs on the
/// rectangle perimeter merged on a circle.  Boxes in R^n: the product
/// formula ∏ (1 − χ(E_j)).  Metric balls: χ(S^{n−1}) = 1 + (−1)^{n−1}.
/// Throws Error(UnclassifiedFaces) or Error(NonProductSegment).
IndexReport euler_characteristics(const PeriodicSegment& segment);

}  // namespace forced_osc
