#pragma once

#include "forced_osc/segment.hpp"
#include "forced_osc/system.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace forced_osc {

/// Speed variable used by the cutoff on flat systems with dim > 1.
enum class CutoffNorm { Componentwise, Euclidean };

/// χ_{p,ε}: 1 on [0, p − ε] ∪ [p + ε, ∞), 0 on [p − ε/2, p + ε/2] and a
/// monotone smoothstep on the two transition bands.
struct CutoffProfile {
    double p = 1.0;
    double eps = 0.1;
    double mu = 0.1;
    /// Degree of the transition polynomial: 3 (C¹) or 5 (C²).
    int smoothness = 5;
    CutoffNorm flat_norm = CutoffNorm::Componentwise;

    /// Throws Error(InvalidArgument) unless p > ε > 0, μ > 0.
    void validate() const;
};

double smoothstep(double u, int degree);

double chi(const CutoffProfile& profile, double speed);

/// v χ − μ q̇ (1 − χ).  1-DOF and componentwise systems apply χ(|q̇_j|) per
/// coordinate; Euclidean mode uses χ(‖q̇‖).  Metric systems use the kinetic
/// energy ½⟨q̇, Aq̇⟩ as the speed variable and keep the Christoffel terms.
SystemSpec modified_system(const SystemSpec& system, const CutoffProfile& profile);

struct EscapeRecord {
    double t0 = 0.0;
    State s0;
    bool modified = false;
    bool escaped = false;
    bool chart_excluded = false;
    double time = 0.0;
};

struct EscapeReport {
    long tested = 0;
    long escaped = 0;
    long chart_excluded = 0;
    double max_escape_time = 0.0;
    std::optional<EscapeRecord> worst_case;
    std::vector<EscapeRecord> records;

    bool passed() const { return tested > 0 && escaped + chart_excluded == tested; }
};

struct EscapeConfig {
    int n_samples = 200;
    double t_max = 1.0;
    int n_t0 = 8;
    std::uint64_t seed = 1;
    /// Box segments: widening of the slab [x⁻ − w, x⁺ + w].
    double slab_widening = 1.0;
    /// Metric balls: the neighbourhood {level < delta} of D.
    double delta = 0.05;
    bool keep_records = false;
};

/// Integrates band-speed samples under the original and the modified system
/// and checks that each leaves the widened slab (or the δ-neighbourhood of
/// D) before t_max.  Samples that leave the chart are counted separately.
EscapeReport escape_experiment(const SystemSpec& system, const PeriodicSegment& segment,
                               const CutoffProfile& profile, const EscapeConfig& cfg);

struct SelectPRow {
    double p = 0.0;
    bool passed = false;
    long tested = 0;
    long escaped = 0;
    double max_escape_time = 0.0;
};

struct SelectPReport {
    double p = 0.0;
    std::vector<SelectPRow> table;
    bool upward_closed = true;
};

/// Runs the escape experiment for every p of an increasing schedule and
/// returns the first passing one.  Throws Error(ScheduleExhausted).
SelectPReport select_p(const SystemSpec& system, const PeriodicSegment& segment, double eps, double mu,
                       const std::vector<double>& schedule, const EscapeConfig& cfg);

struct TrackingRow {
    double lambda = 0.0;
    double deviation = 0.0;
};

/// For each λ: integrates ∇_q̇ q̇ = v and the geodesic equation from
/// (q0, λ q̇0) over [0, T_geo/λ] and reports sup ‖q1 − q2‖ over `n_dense`
/// samples.  Throws Error(ChartExit).
std::vector<TrackingRow> geodesic_tracking(const MetricSpec& metric, int dim, AccelFn v, const Vec& q0,
                                           const Vec& qd0, double T_geo, const std::vector<double>& lambdas,
                                           int n_dense = 2000);

struct EscapeTimeReport {
    double tau = 0.0;
    long samples = 0;
    long chart_excluded = 0;
    Vec worst_q, worst_qd;
};

/// Empirical bound on the time unit-speed geodesics from points of D need to
/// leave {level < delta}: n_points seeded interior points × n_dirs evenly
/// spread directions.  Throws Error(NoEscape) if a geodesic is still inside
/// after `hard_cap`.
EscapeTimeReport escape_time_bound(const MetricSpec& metric, int dim, const RegionSpec& region, double delta,
                                   int n_points, int n_dirs, std::uint64_t seed = 1, double hard_cap = 100.0);

}  // namespace forced_osc
