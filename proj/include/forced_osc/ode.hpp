#pragma once

#include "forced_osc/system.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace forced_osc {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    /// Output sampling step; 0 records one sample per accepted step.
    double dense_dt = 0.0;
    /// Reference mode: constant steps of size max_step, no error control.
    bool fixed_step = false;
    long max_steps = 5'000'000;
};

struct Sample {
    double t;
    State state;
};

/// Densely sampled solution segment.  Immutable once returned by an
/// integrator; `state_at` interpolates with cubic Hermite polynomials between
/// accepted steps.
class Trajectory {
public:
    const std::vector<Sample>& samples() const { return samples_; }
    double t0() const { return node_t_.front(); }
    double t1() const { return node_t_.back(); }
    /// Sum over accepted steps of the max-norm local error estimate.
    double est_error() const { return est_error_; }
    std::size_t accepted_steps() const { return node_t_.size() - 1; }

    const State& initial_state() const { return samples_.front().state; }
    const State& final_state() const { return samples_.back().state; }
    State state_at(double t) const;

private:
    friend class IntegratorCore;
    std::vector<Sample> samples_;
    std::vector<double> node_t_;
    std::vector<Vec> node_y_;
    std::vector<Vec> node_f_;
    double est_error_ = 0.0;
};

enum class EventDirection { Rising, Falling, Any };

struct EventSpec {
    std::function<double(double t, const State& s)> guard;
    EventDirection direction = EventDirection::Any;
    bool terminal = true;
    std::string name;
};

struct EventHit {
    std::size_t event_index;
    double t;
    State state;
    double guard_value;
};

struct EventResult {
    Trajectory trajectory;
    std::vector<EventHit> hits;
};

/// Embedded Dormand–Prince 5(4) integration from (t0, s0) to t1 > t0.
/// Throws Error(StepUnderflow) or Error(NonFiniteState); a system with a
/// chart guard additionally throws Error(ChartSingularity).
Trajectory integrate(const SystemSpec& system, double t0, const State& s0, double t1,
                     const IntegratorConfig& cfg = {});

/// Final state only; bit-identical to integrate(...).final_state().
State propagate(const SystemSpec& system, double t0, const State& s0, double t1,
                const IntegratorConfig& cfg = {});

/// Integrates until t_max or the first terminal event.  Each hit is localized
/// by bisection over the bracketing step (at most 60 halvings) until
/// |guard| < 1e-10.
EventResult integrate_until(const SystemSpec& system, double t0, const State& s0,
                            const std::vector<EventSpec>& events, double t_max,
                            const IntegratorConfig& cfg = {});

}  // namespace forced_osc
