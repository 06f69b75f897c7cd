#include "forced_osc/ode.hpp"

#include "forced_osc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace forced_osc {

namespace {

// Dormand–Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kGuardTol = 1e-10;
constexpr int kBisectionIters = 60;
constexpr double kBlowUp = 1e10;

Vec hermite(double ta, const Vec& ya, const Vec& fa, double tb, const Vec& yb, const Vec& fb,
            double t) {
    const double h = tb - ta;
    const double s = (t - ta) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * ya + (h10 * h) * fa + h01 * yb + (h11 * h) * fb;
}

}  // namespace

State Trajectory::state_at(double t) const {
    if (t <= node_t_.front()) return State::unstack(node_y_.front());
    if (t >= node_t_.back()) return State::unstack(node_y_.back());
    const auto it = std::upper_bound(node_t_.begin(), node_t_.end(), t);
    const auto i = static_cast<std::size_t>(it - node_t_.begin()) - 1;
    return State::unstack(hermite(node_t_[i], node_y_[i], node_f_[i], node_t_[i + 1],
                                  node_y_[i + 1], node_f_[i + 1], t));
}

/// Shared stepping engine; observers receive every accepted step.
class IntegratorCore {
public:
    IntegratorCore(const SystemSpec& system, const IntegratorConfig& cfg)
        : sys_(system), cfg_(cfg), n_(system.dim) {
        if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0))
            throw Error(ErrorKind::InvalidArgument, "integrator tolerances must be positive");
        if (cfg.fixed_step && !(cfg.max_step > 0.0 && std::isfinite(cfg.max_step)))
            throw Error(ErrorKind::InvalidArgument, "fixed-step mode needs a finite max_step");
        for (auto* k : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_}) k->resize(2 * n_);
        tmp_.resize(2 * n_);
    }

    void rhs(double t, const Vec& y, Vec& out) const {
        out.resize(2 * n_);
        out.head(n_) = y.tail(n_);
        out.tail(n_) = sys_.accel(t, y.head(n_), y.tail(n_));
    }

    /// One DP step of size h from (t, y) with f = rhs(t, y).  Fills ynew and
    /// the embedded error estimate; k7_ holds rhs(t + h, ynew).
    void step(double t, const Vec& y, const Vec& f, double h, Vec& ynew, Vec* err) {
        k1_ = f;
        tmp_ = y + h * (a21 * k1_);
        rhs(t + c2 * h, tmp_, k2_);
        tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        rhs(t + c3 * h, tmp_, k3_);
        tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        rhs(t + c4 * h, tmp_, k4_);
        tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        rhs(t + c5 * h, tmp_, k5_);
        tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        rhs(t + h, tmp_, k6_);
        ynew = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        rhs(t + h, ynew, k7_);
        if (err) *err = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    }

    Vec single_step(double t, const Vec& y, const Vec& f, double h) {
        Vec out(2 * n_);
        step(t, y, f, h, out, nullptr);
        return out;
    }

    double error_norm(const Vec& err, const Vec& y, const Vec& ynew) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < err.size(); ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double r = err[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / static_cast<double>(err.size()));
    }

    double initial_step(double t0, const Vec& y0, const Vec& f0, double span) {
        auto scaled_norm = [&](const Vec& v) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y0[i]);
                acc += (v[i] / sc) * (v[i] / sc);
            }
            return std::sqrt(acc / static_cast<double>(v.size()));
        };
        const double d0 = scaled_norm(y0);
        const double d1 = scaled_norm(f0);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, span);
        Vec y1 = y0 + h0 * f0;
        Vec f1;
        rhs(t0 + h0, y1, f1);
        const double d2 = scaled_norm(f1 - f0) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
        return std::min({100.0 * h0, h1, cfg_.max_step, span});
    }

    /// Drives the integration.  `observer(ta, ya, fa, tb, yb, fb)` returns true
    /// to stop after the given step.
    template <class Observer>
    void run(double t0, const Vec& y0, double t1, Observer&& observer) {
        if (!(t1 > t0)) throw Error(ErrorKind::InvalidArgument, "integration span must satisfy t1 > t0");
        if (!y0.allFinite()) throw Error(ErrorKind::NonFiniteState, "initial state is not finite");
        Vec y = y0, f, ynew(2 * n_), err(2 * n_);
        rhs(t0, y, f);
        double t = t0;
        const double span = t1 - t0;
        double h = cfg_.fixed_step ? cfg_.max_step : initial_step(t0, y, f, span);
        double err_prev = 1e-4;
        long steps = 0;
        bool last_rejection_nonfinite = false;
        while (t < t1) {
            if (++steps > cfg_.max_steps)
                throw Error(ErrorKind::StepUnderflow, "step budget exhausted at t = " + std::to_string(t));
            bool final_step = false;
            if (t + 1.01 * h >= t1 || (cfg_.fixed_step && t + h >= t1 - 1e-14 * std::max(1.0, std::abs(t1)))) {
                h = t1 - t;
                final_step = true;
            }
            const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
            if (h < h_min) {
                // A collapsing step on a huge state is a blow-up, not stiffness.
                const bool blow_up = last_rejection_nonfinite || y.cwiseAbs().maxCoeff() > kBlowUp;
                throw Error(blow_up ? ErrorKind::NonFiniteState : ErrorKind::StepUnderflow,
                            "step size underflow at t = " + std::to_string(t));
            }
            step(t, y, f, h, ynew, &err);
            double en = 0.0;
            if (!cfg_.fixed_step) {
                en = ynew.allFinite() && k7_.allFinite() ? error_norm(err, y, ynew)
                                                         : std::numeric_limits<double>::infinity();
                if (!std::isfinite(en) || en > 1.0) {
                    last_rejection_nonfinite = !std::isfinite(en);
                    const double fac = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.25;
                    h *= std::min(fac, 1.0);
                    continue;
                }
            } else if (!ynew.allFinite()) {
                throw Error(ErrorKind::NonFiniteState, "state became non-finite at t = " + std::to_string(t));
            }
            last_rejection_nonfinite = false;
            const double tb = final_step ? t1 : t + h;
            if (sys_.in_chart && !sys_.in_chart(ynew.head(n_))) {
                throw Error(ErrorKind::ChartSingularity,
                            "trajectory left the chart of '" + sys_.name + "' at t = " + std::to_string(tb));
            }
            local_error_ = err.cwiseAbs().maxCoeff();
            const bool stop = observer(t, y, f, tb, ynew, k7_);
            t = tb;
            y = ynew;
            f = k7_;
            if (stop) return;
            if (!cfg_.fixed_step) {
                const double e = std::max(en, 1e-10);
                double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
                fac = std::clamp(fac, 0.2, 10.0);
                err_prev = e;
                h = std::min(h * fac, cfg_.max_step);
            }
        }
    }

    double local_error() const { return local_error_; }

    /// Records nodes and dense samples into a trajectory.
    class Recorder {
    public:
        Recorder(Trajectory& traj, double t0, const Vec& y0, const Vec& f0, double dense_dt)
            : traj_(traj), t0_(t0), dt_(dense_dt) {
            traj_.node_t_.push_back(t0);
            traj_.node_y_.push_back(y0);
            traj_.node_f_.push_back(f0);
            traj_.samples_.push_back({t0, State::unstack(y0)});
            next_k_ = 1;
        }

        void add(double tb, const Vec& yb, const Vec& fb, double local_error) {
            const double ta = traj_.node_t_.back();
            if (dt_ > 0.0) {
                for (;;) {
                    const double ts = t0_ + static_cast<double>(next_k_) * dt_;
                    if (ts >= tb - 1e-12 * std::max(1.0, std::abs(tb))) break;
                    traj_.samples_.push_back({ts, State::unstack(hermite(ta, traj_.node_y_.back(),
                                                                         traj_.node_f_.back(), tb, yb, fb, ts))});
                    ++next_k_;
                }
            }
            traj_.node_t_.push_back(tb);
            traj_.node_y_.push_back(yb);
            traj_.node_f_.push_back(fb);
            traj_.est_error_ += local_error;
            if (dt_ <= 0.0) traj_.samples_.push_back({tb, State::unstack(yb)});
        }

        void finish() {
            if (dt_ > 0.0) {
                const double tb = traj_.node_t_.back();
                traj_.samples_.push_back({tb, State::unstack(traj_.node_y_.back())});
            }
        }

        /// Emits samples up to t_hit and closes the trajectory there.
        void truncate(double t_hit, const Vec& y_hit, const Vec& f_hit, double local_error) {
            add(t_hit, y_hit, f_hit, local_error);
        }

    private:
        Trajectory& traj_;
        double t0_;
        double dt_;
        long next_k_ = 1;
    };

private:
    const SystemSpec& sys_;
    IntegratorConfig cfg_;
    int n_;
    Vec k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_;
    double local_error_ = 0.0;
};

namespace {

void check_state(const SystemSpec& system, const State& s0) {
    if (s0.q.size() != system.dim || s0.qd.size() != system.dim)
        throw Error(ErrorKind::InvalidArgument, "state dimension does not match system '" + system.name + "'");
}

}  // namespace

Trajectory integrate(const SystemSpec& system, double t0, const State& s0, double t1,
                     const IntegratorConfig& cfg) {
    check_state(system, s0);
    IntegratorCore core(system, cfg);
    const Vec y0 = s0.stacked();
    Vec f0;
    core.rhs(t0, y0, f0);
    Trajectory traj;
    IntegratorCore::Recorder rec(traj, t0, y0, f0, cfg.dense_dt);
    core.run(t0, y0, t1, [&](double, const Vec&, const Vec&, double tb, const Vec& yb, const Vec& fb) {
        rec.add(tb, yb, fb, core.local_error());
        return false;
    });
    rec.finish();
    return traj;
}

State propagate(const SystemSpec& system, double t0, const State& s0, double t1,
                const IntegratorConfig& cfg) {
    check_state(system, s0);
    IntegratorCore core(system, cfg);
    Vec last = s0.stacked();
    core.run(t0, last, t1, [&](double, const Vec&, const Vec&, double, const Vec& yb, const Vec&) {
        last = yb;
        return false;
    });
    return State::unstack(last);
}

EventResult integrate_until(const SystemSpec& system, double t0, const State& s0,
                            const std::vector<EventSpec>& events, double t_max,
                            const IntegratorConfig& cfg) {
    check_state(system, s0);
    IntegratorCore core(system, cfg);
    const Vec y0 = s0.stacked();
    Vec f0;
    core.rhs(t0, y0, f0);
    EventResult result;
    IntegratorCore::Recorder rec(result.trajectory, t0, y0, f0, cfg.dense_dt);

    std::vector<double> g_prev(events.size());
    for (std::size_t e = 0; e < events.size(); ++e) g_prev[e] = events[e].guard(t0, s0);

    auto crosses = [](EventDirection dir, double ga, double gb) {
        if (ga == 0.0) return false;
        const bool rising = ga < 0.0 && gb >= 0.0;
        const bool falling = ga > 0.0 && gb <= 0.0;
        switch (dir) {
            case EventDirection::Rising: return rising;
            case EventDirection::Falling: return falling;
            case EventDirection::Any: return rising || falling;
        }
        return false;
    };

    core.run(t0, y0, t_max, [&](double ta, const Vec& ya, const Vec& fa, double tb, const Vec& yb, const Vec& fb) {
        const double h = tb - ta;
        std::vector<EventHit> step_hits;
        std::vector<double> g_now(events.size());
        for (std::size_t e = 0; e < events.size(); ++e) {
            const double gb = events[e].guard(tb, State::unstack(yb));
            g_now[e] = gb;
            if (!crosses(events[e].direction, g_prev[e], gb)) continue;
            // Bisection on the step length, re-stepping from the left node.
            double lo = 0.0, hi = h;
            const double g_lo = g_prev[e];
            double best_tau = h, best_g = gb;
            Vec best_y = yb;
            if (std::abs(gb) >= kGuardTol) {
                for (int it = 0; it < kBisectionIters; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const Vec ym = core.single_step(ta, ya, fa, mid);
                    const double gm = events[e].guard(ta + mid, State::unstack(ym));
                    if (std::abs(gm) < std::abs(best_g)) {
                        best_tau = mid;
                        best_g = gm;
                        best_y = ym;
                    }
                    if (std::abs(gm) < kGuardTol) break;
                    if ((gm < 0.0) == (g_lo < 0.0)) lo = mid;
                    else hi = mid;
                }
            }
            step_hits.push_back({e, ta + best_tau, State::unstack(best_y), best_g});
        }
        for (std::size_t e = 0; e < events.size(); ++e) g_prev[e] = g_now[e];
        if (step_hits.empty()) {
            rec.add(tb, yb, fb, core.local_error());
            return false;
        }
        std::sort(step_hits.begin(), step_hits.end(),
                  [](const EventHit& a, const EventHit& b) { return a.t < b.t; });
        std::optional<EventHit> terminal;
        for (const auto& hit : step_hits) {
            if (terminal && hit.t > terminal->t) break;
            result.hits.push_back(hit);
            if (events[hit.event_index].terminal && !terminal) terminal = hit;
        }
        if (!terminal) {
            rec.add(tb, yb, fb, core.local_error());
            return false;
        }
        Vec y_hit = terminal->state.stacked();
        Vec f_hit;
        core.rhs(terminal->t, y_hit, f_hit);
        if (terminal->t > ta) rec.truncate(terminal->t, y_hit, f_hit, core.local_error());
        return true;
    });
    rec.finish();
    return result;
}

}  // namespace forced_osc
