#include "forced_osc/cutoff.hpp"

#include "forced_osc/errors.hpp"
#include "forced_osc/gallery.hpp"
#include "forced_osc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace forced_osc {

void CutoffProfile::validate() const {
    if (!(eps > 0.0) || !(p > eps)) throw Error(ErrorKind::InvalidArgument, "cutoff needs p > eps > 0");
    if (!(mu > 0.0)) throw Error(ErrorKind::InvalidArgument, "cutoff friction mu must be positive");
    if (smoothness != 3 && smoothness != 5)
        throw Error(ErrorKind::InvalidArgument, "cutoff smoothness must be 3 or 5");
}

double smoothstep(double u, int degree) {
    u = std::clamp(u, 0.0, 1.0);
    if (degree == 3) return u * u * (3.0 - 2.0 * u);
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

double chi(const CutoffProfile& c, double speed) {
    const double s = std::abs(speed);
    const double half = 0.5 * c.eps;
    if (s <= c.p - c.eps || s >= c.p + c.eps) return 1.0;
    if (s >= c.p - half && s <= c.p + half) return 0.0;
    if (s < c.p) return 1.0 - smoothstep((s - (c.p - c.eps)) / half, c.smoothness);
    return smoothstep((s - (c.p + half)) / half, c.smoothness);
}

SystemSpec modified_system(const SystemSpec& system, const CutoffProfile& profile) {
    profile.validate();
    SystemSpec m = system;
    m.name = system.name + "+cutoff";
    const auto base = system.accel;
    const double mu = profile.mu;
    if (system.metric) {
        const auto metric = *system.metric;
        const auto v = system.force;
        auto energy = [metric](const Vec& q, const Vec& qd) { return 0.5 * qd.dot(metric.A(q) * qd); };
        m.accel = [=](double t, const Vec& q, const Vec& qd) {
            const double c = chi(profile, energy(q, qd));
            Vec a = base(t, q, qd);
            if (c < 1.0) a -= (1.0 - c) * (v(t, q, qd) + mu * qd);
            return a;
        };
        m.force = [=](double t, const Vec& q, const Vec& qd) {
            const double c = chi(profile, energy(q, qd));
            return Vec(c * v(t, q, qd) - (mu * (1.0 - c)) * qd);
        };
        return m;
    }
    if (system.dim > 1 && profile.flat_norm == CutoffNorm::Euclidean) {
        m.accel = [=](double t, const Vec& q, const Vec& qd) {
            const double c = chi(profile, qd.norm());
            return Vec(c * base(t, q, qd) - (mu * (1.0 - c)) * qd);
        };
        return m;
    }
    m.accel = [=](double t, const Vec& q, const Vec& qd) {
        Vec a = base(t, q, qd);
        for (Eigen::Index j = 0; j < a.size(); ++j) {
            const double c = chi(profile, qd[j]);
            a[j] = c * a[j] - mu * (1.0 - c) * qd[j];
        }
        return a;
    };
    return m;
}

namespace {

IntegratorConfig escape_integrator() {
    IntegratorConfig cfg;
    cfg.rel_tol = cfg.abs_tol = 1e-9;
    return cfg;
}

struct Slab {
    Vec lo, hi;
};

Slab widened_slab(const PeriodicSegment& seg, double widen) {
    Slab s{Vec::Constant(seg.dim, std::numeric_limits<double>::infinity()),
           Vec::Constant(seg.dim, -std::numeric_limits<double>::infinity())};
    for (int k = 0; k < 256; ++k) {
        const double t = seg.period * k / 256.0;
        for (int j = 0; j < seg.dim; ++j) {
            s.lo[j] = std::min(s.lo[j], seg.barriers[j].lower.x(t));
            s.hi[j] = std::max(s.hi[j], seg.barriers[j].upper.x(t));
        }
    }
    s.lo.array() -= widen;
    s.hi.array() += widen;
    return s;
}

}  // namespace

EscapeReport escape_experiment(const SystemSpec& system, const PeriodicSegment& segment,
                               const CutoffProfile& profile, const EscapeConfig& cfg) {
    profile.validate();
    if (cfg.n_samples < 1 || !(cfg.t_max > 0.0) || cfg.n_t0 < 1)
        throw Error(ErrorKind::InvalidArgument, "escape experiment needs samples, start times and t_max > 0");
    const SystemSpec modified = modified_system(system, profile);
    const int dim = system.dim;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double p = profile.p, eps = profile.eps;

    EventSpec leave;
    leave.direction = EventDirection::Falling;
    leave.terminal = true;
    leave.name = "leave";
    if (segment.kind == SegmentKind::MetricBall) {
        const auto region = *segment.region;
        const double delta = cfg.delta;
        leave.guard = [region, delta](double, const State& s) { return delta - region.level(s.q); };
    } else {
        const Slab slab = widened_slab(segment, cfg.slab_widening);
        leave.guard = [slab](double, const State& s) {
            return std::min((s.q - slab.lo).minCoeff(), (slab.hi - s.q).minCoeff());
        };
    }

    EscapeReport rep;
    const auto icfg = escape_integrator();
    for (int k = 0; k < cfg.n_samples; ++k) {
        const double t0 = segment.period * (k % cfg.n_t0) / cfg.n_t0;
        const double band = (p - eps) + 2.0 * eps * unit(rng);
        const double sign = (k / cfg.n_t0) % 2 == 0 ? 1.0 : -1.0;
        State s0{Vec(dim), Vec(dim)};
        if (segment.kind == SegmentKind::MetricBall) {
            const auto& region = *segment.region;
            const auto& metric = *segment.metric;
            int guard = 0;
            do {
                for (int i = 0; i < dim; ++i)
                    s0.q[i] = region.q_lo[i] + (region.q_hi[i] - region.q_lo[i]) * unit(rng);
            } while ((region.level(s0.q) > 0.0 || (metric.in_chart && !metric.in_chart(s0.q))) && ++guard < 10000);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (int i = 0; i < dim; ++i) s0.qd[i] = gauss(rng);
            const double e = 0.5 * s0.qd.dot(metric.A(s0.q) * s0.qd);
            s0.qd *= std::sqrt(band / e);
        } else {
            const int j = (k / (2 * cfg.n_t0)) % dim;
            for (int i = 0; i < dim; ++i) {
                const double lo = segment.barriers[i].lower.x(t0), hi = segment.barriers[i].upper.x(t0);
                s0.q[i] = lo + (hi - lo) * unit(rng);
                s0.qd[i] = (p + eps) * (2.0 * unit(rng) - 1.0);
            }
            s0.qd[j] = sign * band;
        }
        for (const SystemSpec* sys : {&system, &modified}) {
            EscapeRecord rec;
            rec.t0 = t0;
            rec.s0 = s0;
            rec.modified = sys == &modified;
            try {
                const auto res = integrate_until(*sys, t0, s0, {leave}, t0 + cfg.t_max, icfg);
                rec.escaped = !res.hits.empty();
                rec.time = rec.escaped ? res.hits.front().t - t0 : cfg.t_max;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::ChartSingularity) throw;
                rec.chart_excluded = true;
            }
            ++rep.tested;
            if (rec.chart_excluded) {
                ++rep.chart_excluded;
            } else if (rec.escaped) {
                ++rep.escaped;
            }
            if (!rec.chart_excluded && (!rep.worst_case || rec.time > rep.worst_case->time ||
                                        (rep.worst_case->escaped && !rec.escaped))) {
                if (!rep.worst_case || rep.worst_case->escaped || !rec.escaped) rep.worst_case = rec;
            }
            if (rec.escaped) rep.max_escape_time = std::max(rep.max_escape_time, rec.time);
            if (cfg.keep_records) rep.records.push_back(rec);
        }
    }
    return rep;
}

SelectPReport select_p(const SystemSpec& system, const PeriodicSegment& segment, double eps, double mu,
                       const std::vector<double>& schedule, const EscapeConfig& cfg) {
    if (schedule.empty()) throw Error(ErrorKind::InvalidArgument, "p schedule is empty");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (!(schedule[i] > schedule[i - 1])) throw Error(ErrorKind::InvalidArgument, "p schedule must increase");
    SelectPReport rep;
    bool seen_pass = false;
    for (double p : schedule) {
        CutoffProfile prof{p, eps, mu};
        PeriodicSegment seg = segment;
        seg.p = p;
        const auto r = escape_experiment(system, seg, prof, cfg);
        rep.table.push_back({p, r.passed(), r.tested, r.escaped, r.max_escape_time});
        if (r.passed() && !seen_pass) {
            rep.p = p;
            seen_pass = true;
        } else if (!r.passed() && seen_pass) {
            rep.upward_closed = false;
        }
    }
    if (!seen_pass) throw Error(ErrorKind::ScheduleExhausted, "no p in the schedule passes the escape experiment");
    return rep;
}

std::vector<TrackingRow> geodesic_tracking(const MetricSpec& metric, int dim, AccelFn v, const Vec& q0,
                                           const Vec& qd0, double T_geo, const std::vector<double>& lambdas,
                                           int n_dense) {
    if (!(T_geo > 0.0) || n_dense < 1) throw Error(ErrorKind::InvalidArgument, "tracking needs T_geo > 0");
    const auto perturbed = metric_system("perturbed", metric, dim, std::move(v), 1.0);
    const auto geodesic = geodesic_system(metric, dim);
    std::vector<TrackingRow> rows;
    for (double lambda : lambdas) {
        if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
        const double t1 = T_geo / lambda;
        IntegratorConfig cfg;
        cfg.rel_tol = cfg.abs_tol = 1e-12;
        cfg.dense_dt = t1 / n_dense;
        const State s0(q0, lambda * qd0);
        try {
            const auto a = integrate(perturbed, 0.0, s0, t1, cfg);
            const auto b = integrate(geodesic, 0.0, s0, t1, cfg);
            double dev = 0.0;
            const std::size_t n = std::min(a.samples().size(), b.samples().size());
            for (std::size_t i = 0; i < n; ++i)
                dev = std::max(dev, (a.samples()[i].state.q - b.samples()[i].state.q).norm());
            rows.push_back({lambda, dev});
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ChartSingularity)
                throw Error(ErrorKind::ChartExit, "tracking trajectory left the chart at lambda = " + std::to_string(lambda));
            throw;
        }
    }
    return rows;
}

EscapeTimeReport escape_time_bound(const MetricSpec& metric, int dim, const RegionSpec& region, double delta,
                                   int n_points, int n_dirs, std::uint64_t seed, double hard_cap) {
    if (n_points < 1 || n_dirs < 1) throw Error(ErrorKind::InvalidArgument, "escape bound needs samples");
    const auto geo = geodesic_system(metric, dim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    EventSpec out{[&region, delta](double, const State& s) { return region.level(s.q) - delta; },
                  EventDirection::Rising, true, "leave"};
    IntegratorConfig cfg;
    cfg.rel_tol = cfg.abs_tol = 1e-10;
    EscapeTimeReport rep;
    for (int k = 0; k < n_points; ++k) {
        Vec q(dim);
        int guard = 0;
        do {
            for (int i = 0; i < dim; ++i) q[i] = region.q_lo[i] + (region.q_hi[i] - region.q_lo[i]) * unit(rng);
        } while ((region.level(q) >= 0.0 || (metric.in_chart && !metric.in_chart(q))) && ++guard < 100000);
        const Mat A = metric.A(q);
        const Eigen::LLT<Mat> llt(A);
        if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularMetric, "metric is not positive definite");
        const double offset = unit(rng);
        for (int d = 0; d < n_dirs; ++d) {
            Vec e(dim);
            if (dim == 2) {
                const double ang = kTwoPi * (d + offset) / n_dirs;
                e << std::cos(ang), std::sin(ang);
            } else {
                for (int i = 0; i < dim; ++i) e[i] = gauss(rng);
                e.normalize();
            }
            // A = LLᵀ, so q̇ = L⁻ᵀe has ⟨q̇, Aq̇⟩ = 1.
            const Vec qd = llt.matrixU().solve(e);
            ++rep.samples;
            try {
                const auto res = integrate_until(geo, 0.0, State(q, qd), {out}, hard_cap, cfg);
                if (res.hits.empty()) {
                    throw Error(ErrorKind::NoEscape,
                                "a unit-speed geodesic stays in the neighbourhood of D beyond t = " + std::to_string(hard_cap));
                }
                if (res.hits.front().t > rep.tau) {
                    rep.tau = res.hits.front().t;
                    rep.worst_q = q;
                    rep.worst_qd = qd;
                }
            } catch (const Error& err) {
                if (err.kind() != ErrorKind::ChartSingularity) throw;
                ++rep.chart_excluded;
            }
        }
    }
    return rep;
}

}  // namespace forced_osc
