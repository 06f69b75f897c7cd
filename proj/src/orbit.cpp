#include "forced_osc/orbit.hpp"

#include "forced_osc/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace forced_osc {

State period_map(const SystemSpec& system, const State& s0, const IntegratorConfig& cfg) {
    return propagate(system, 0.0, s0, system.period, cfg);
}

Vec shooting_residual(const SystemSpec& system, const State& s, const IntegratorConfig& cfg) {
    return wrapped_difference(system, s.stacked(), period_map(system, s, cfg).stacked());
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

State wrapped(const SystemSpec& system, State s) {
    for (int i = 0; i < system.dim; ++i)
        if (system.is_angular(i)) s.q[i] = wrap_angle(s.q[i]);
    return s;
}

bool in_enlarged(const PeriodicSegment& seg, const State& s) {
    if (seg.kind == SegmentKind::MetricBall) {
        const auto& r = *seg.region;
        for (int i = 0; i < seg.dim; ++i) {
            const double w = 0.5 * (r.q_hi[i] - r.q_lo[i]);
            if (s.q[i] < r.q_lo[i] - w || s.q[i] > r.q_hi[i] + w) return false;
        }
        if (seg.metric->in_chart && !seg.metric->in_chart(s.q)) return false;
        return 0.5 * s.qd.dot(seg.metric->A(s.q) * s.qd) <= 1.5 * seg.p;
    }
    for (int j = 0; j < seg.dim; ++j) {
        const double lo = seg.barriers[j].lower.x(0.0), hi = seg.barriers[j].upper.x(0.0);
        const double w = 0.5 * (hi - lo);
        if (s.q[j] < lo - w || s.q[j] > hi + w || std::abs(s.qd[j]) > 1.5 * seg.p) return false;
    }
    return true;
}

double residual_or_inf(const SystemSpec& system, const State& s, const IntegratorConfig& cfg, Vec* out) {
    try {
        *out = shooting_residual(system, s, cfg);
        return out->allFinite() ? out->lpNorm<Eigen::Infinity>() : kInf;
    } catch (const Error&) {
        return kInf;
    }
}

}  // namespace

namespace {

// Multiple-shooting unknowns: the states at t_k = kT/N.
struct Shooter {
    const SystemSpec& system;
    const ShootConfig& cfg;
    int N;
    int m;

    double t(int k) const { return system.period * k / N; }

    Vec flow(int k, const Vec& y) const {
        return propagate(system, t(k), State::unstack(y), t(k + 1), cfg.integrator).stacked();
    }

    double residual(const Vec& Y, Vec* F) const {
        F->resize(m * N);
        try {
            for (int k = 0; k < N; ++k) {
                const Vec end = flow(k, Y.segment(m * k, m));
                const Vec next = Y.segment(m * ((k + 1) % N), m);
                F->segment(m * k, m) = wrapped_difference(system, next, end);
            }
        } catch (const Error&) {
            return kInf;
        }
        return F->allFinite() ? F->lpNorm<Eigen::Infinity>() : kInf;
    }
};


enum class Seed { Constant, Flow };

PeriodicOrbit shoot_once(const SystemSpec& system, const State& guess, const ShootConfig& cfg,
                         const PeriodicSegment* bounds, Seed seed, int segments) {
    const Shooter sh{system, cfg, segments, 2 * system.dim};
    const int m = sh.m, N = sh.N;
    const double noise_floor =
        std::max(1e-12, 10.0 * std::max(cfg.integrator.rel_tol, cfg.integrator.abs_tol) / cfg.fd_step);

    auto wrap_nodes = [&](Vec Y) {
        for (int k = 0; k < N; ++k)
            for (int i = 0; i < system.dim; ++i)
                if (system.is_angular(i)) Y[m * k + i] = wrap_angle(Y[m * k + i]);
        return Y;
    };

    Vec Y = wrapped(system, guess).stacked().replicate(N, 1);
    if (seed == Seed::Flow) {
        Vec y = Y.head(m);
        for (int k = 1; k < N; ++k) {
            try {
                y = sh.flow(k - 1, y);
            } catch (const Error&) {
            }
            Y.segment(m * k, m) = y;
        }
    }
    Y = wrap_nodes(Y);
    Vec F;
    double norm = sh.residual(Y, &F);
    if (!std::isfinite(norm)) throw Error(ErrorKind::NoConvergence, "period map undefined at the initial guess");

    Vec R;
    double single = kInf;
    int it = 0;
    for (;;) {
        if (norm <= cfg.tol_residual) {
            single = residual_or_inf(system, State::unstack(Vec(Y.head(m))), cfg.integrator, &R);
            if (single <= cfg.tol_residual) break;
        }
        if (it >= cfg.max_iters)
            throw Error(ErrorKind::NoConvergence, "no convergence after " + std::to_string(cfg.max_iters) +
                                                      " iterations (residual " + std::to_string(norm) + ")");
        ++it;
        Mat J = Mat::Zero(m * N, m * N);
        Mat DP = Mat::Identity(m, m);
        for (int k = 0; k < N; ++k) {
            const Vec yk = Y.segment(m * k, m);
            const Vec base = sh.flow(k, yk);
            Mat Phi(m, m);
            for (int c = 0; c < m; ++c) {
                const double h = cfg.fd_step * std::max(1.0, std::abs(yk[c]));
                Vec yp = yk;
                yp[c] += h;
                if (cfg.central_differences) {
                    Vec ym = yk;
                    ym[c] -= h;
                    Phi.col(c) = wrapped_difference(system, sh.flow(k, ym), sh.flow(k, yp)) / (2.0 * h);
                } else {
                    Phi.col(c) = wrapped_difference(system, base, sh.flow(k, yp)) / h;
                }
            }
            J.block(m * k, m * k, m, m) = Phi;
            J.block(m * k, m * ((k + 1) % N), m, m) -= Mat::Identity(m, m);
            DP = Phi * DP;
        }
        const Mat IminusDP = Mat::Identity(m, m) - DP;
        const double det = IminusDP.determinant();
        const Eigen::JacobiSVD<Mat> svd(IminusDP);
        const double smin = svd.singularValues()(m - 1);
        if (std::abs(det) < 1e-12 || smin < noise_floor)
            throw Error(ErrorKind::SingularJacobian, "det(I - DP) = " + std::to_string(det) + ", smallest singular value " +
                                                         std::to_string(smin) + " at iterate " + std::to_string(it));
        const Vec delta = J.fullPivLu().solve(-F);
        double lambda = 1.0;
        for (;;) {
            const Vec trial = wrap_nodes(Y + lambda * delta);
            Vec Ft;
            const bool inside = !bounds || in_enlarged(*bounds, State::unstack(Vec(trial.head(m))));
            const double nt = inside ? sh.residual(trial, &Ft) : kInf;
            if (nt < norm) {
                Y = trial;
                F = Ft;
                norm = nt;
                break;
            }
            lambda *= cfg.backtrack;
            if (lambda < cfg.min_step)
                throw Error(ErrorKind::NoConvergence, "line search stalled at residual " + std::to_string(norm));
        }
    }
    PeriodicOrbit orbit;
    orbit.s0 = State::unstack(Vec(Y.head(m)));
    orbit.residual_norm = single;
    orbit.iterations = it;
    IntegratorConfig dense = cfg.integrator;
    dense.dense_dt = system.period / std::max(1, cfg.n_dense);
    orbit.trajectory = integrate(system, 0.0, orbit.s0, system.period, dense);
    return orbit;
}

}  // namespace

PeriodicOrbit newton_shoot(const SystemSpec& system, const State& guess, const ShootConfig& cfg,
                           const PeriodicSegment* bounds) {
    if (!(cfg.tol_residual > 0.0) || cfg.max_iters < 0 || !(cfg.fd_step > 0.0) || !(cfg.backtrack > 0.0) ||
        !(cfg.backtrack < 1.0) || !(cfg.min_step > 0.0) || cfg.segments < 1)
        throw Error(ErrorKind::InvalidArgument, "shooting configuration entries must be positive");
    if (cfg.segments == 1) return shoot_once(system, guess, cfg, bounds, Seed::Constant, 1);
    // Nodes held at the guess suit confined orbits near the guess; orbits that
    // travel far within a period need nodes on the guess's own trajectory.
    try {
        return shoot_once(system, guess, cfg, bounds, Seed::Constant, cfg.segments);
    } catch (const Error& first) {
        try {
            return shoot_once(system, guess, cfg, bounds, Seed::Flow, cfg.segments);
        } catch (const Error&) {
        }
        try {
            return shoot_once(system, guess, cfg, bounds, Seed::Constant, 1);
        } catch (const Error&) {
        }
        throw;
    }
}

std::vector<State> multistart_grid(const PeriodicSegment& seg, const std::vector<int>& counts,
                                   double speed_fraction) {
    const int n = seg.dim;
    if (counts.empty()) throw Error(ErrorKind::InvalidArgument, "multistart grid needs node counts");
    std::vector<int> c(2 * n);
    for (int i = 0; i < 2 * n; ++i) {
        c[i] = counts.size() == 1 ? counts[0] : counts.at(i);
        if (c[i] < 1) throw Error(ErrorKind::InvalidArgument, "grid counts must be positive");
    }
    if (!(speed_fraction > 0.0) || speed_fraction > 1.0)
        throw Error(ErrorKind::InvalidArgument, "speed_fraction must lie in (0, 1]");
    auto node = [](double lo, double hi, int k, int m) { return lo + (hi - lo) * (k + 0.5) / m; };
    std::vector<State> out;
    std::vector<int> idx(2 * n, 0);
    for (;;) {
        State s{Vec(n), Vec(n)};
        bool keep = true;
        if (seg.kind == SegmentKind::MetricBall) {
            for (int i = 0; i < n; ++i) s.q[i] = node(seg.region->q_lo[i], seg.region->q_hi[i], idx[i], c[i]);
            if (seg.region->level(s.q) >= 0.0 || (seg.metric->in_chart && !seg.metric->in_chart(s.q))) {
                keep = false;
            } else {
                // Velocity nodes in an A-orthonormal frame: q̇ = L⁻ᵀe with A = LLᵀ.
                const Mat A = seg.metric->A(s.q);
                const Eigen::LLT<Mat> llt(A);
                const double r = speed_fraction * std::sqrt(2.0 * seg.p);
                Vec e(n);
                for (int i = 0; i < n; ++i) e[i] = node(-r, r, idx[n + i], c[n + i]);
                s.qd = llt.matrixU().solve(e);
                keep = 0.5 * e.squaredNorm() < seg.p;
            }
        } else {
            for (int i = 0; i < n; ++i) {
                s.q[i] = node(seg.barriers[i].lower.x(0.0), seg.barriers[i].upper.x(0.0), idx[i], c[i]);
                s.qd[i] = node(-speed_fraction * seg.p, speed_fraction * seg.p, idx[n + i], c[n + i]);
            }
        }
        if (keep) out.push_back(s);
        int a = 2 * n - 1;
        while (a >= 0 && ++idx[a] == c[a]) idx[a--] = 0;
        if (a < 0) break;
    }
    return out;
}

MultistartResult multistart_search(const SystemSpec& system, const PeriodicSegment& segment,
                                   const MultistartConfig& cfg) {
    auto nodes = cfg.grid.empty() ? std::vector<State>{} : multistart_grid(segment, cfg.grid, cfg.speed_fraction);
    nodes.insert(nodes.end(), cfg.extra_starts.begin(), cfg.extra_starts.end());
    if (nodes.empty()) throw Error(ErrorKind::InvalidArgument, "multistart needs grid nodes or explicit starts");
    std::vector<std::optional<PeriodicOrbit>> found(nodes.size());
    MultistartResult res;
    res.starts.resize(nodes.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < nodes.size();) {
            auto& rec = res.starts[i];
            rec.start = nodes[i];
            try {
                found[i] = newton_shoot(system, nodes[i], cfg.shoot, &segment);
                rec.converged = true;
                rec.residual = found[i]->residual_norm;
            } catch (const Error& e) {
                rec.failure = e.what();
                Vec r;
                rec.residual = residual_or_inf(system, nodes[i], cfg.shoot.integrator, &r);
            }
        }
    };
    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& f : found) {
        if (!f) continue;
        ++res.converged;
        if (!segment.contains(0.0, f->s0)) {
            ++res.outside;
            continue;
        }
        const Vec y = f->s0.stacked();
        const bool dup = std::any_of(res.orbits.begin(), res.orbits.end(), [&](const PeriodicOrbit& o) {
            return wrapped_difference(system, o.s0.stacked(), y).lpNorm<Eigen::Infinity>() < cfg.dedup;
        });
        if (!dup) res.orbits.push_back(std::move(*f));
    }
    std::sort(res.orbits.begin(), res.orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        const Vec x = a.s0.stacked(), y = b.s0.stacked();
        return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
    });
    for (auto& o : res.orbits) {
        o.confinement = verify_confinement(o, segment, cfg.n_checks, cfg.eps);
        o.floquet = floquet_multipliers(system, o, 1e-6, cfg.shoot.integrator);
    }
    return res;
}

std::vector<Eigen::Vector2d> rectangle_contour(double a, double b, double c) {
    return {{a, -c}, {b, -c}, {b, c}, {a, c}};
}

State stopped_period_map(const SystemSpec& system, const PeriodicSegment& seg, const State& s0,
                         const IntegratorConfig& cfg) {
    if (seg.kind != SegmentKind::Box || seg.dim != 1 || system.dim != 1)
        throw Error(ErrorKind::InvalidArgument, "stopped period map needs a 1-DOF box segment");
    const EventSpec leave{[&seg](double t, const State& s) { return seg.margin(t, s); }, EventDirection::Falling, true,
                          "exit"};
    const auto res = integrate_until(system, 0.0, s0, {leave}, system.period, cfg);
    if (res.hits.empty()) return res.trajectory.final_state();
    const double tau = res.hits.front().t;
    const State& e = res.hits.front().state;
    const auto& b = seg.barriers[0];
    const double lo_t = b.lower.x(tau), hi_t = b.upper.x(tau), lo_0 = b.lower.x(0.0), hi_0 = b.upper.x(0.0);
    const double q = lo_0 + (e.q[0] - lo_t) * (hi_0 - lo_0) / (hi_t - lo_t);
    // Which wall is nearest decides the tangency speed carried along.
    const bool upper = std::abs(e.q[0] - hi_t) < std::abs(e.q[0] - lo_t);
    const double knot_t = upper ? b.upper.dx(tau) : b.lower.dx(tau);
    const double knot_0 = upper ? b.upper.dx(0.0) : b.lower.dx(0.0);
    const double p = seg.p, v = std::clamp(e.qd[0], -p, p);
    const double qd = v >= knot_t ? knot_0 + (v - knot_t) * (p - knot_0) / (p - knot_t)
                                  : knot_0 + (v - knot_t) * (knot_0 + p) / (knot_t + p);
    return state1(q, qd);
}

WindingReport winding_index(const SystemSpec& system, const std::vector<Eigen::Vector2d>& contour, int n_points,
                            const IntegratorConfig& cfg, long max_evaluations, const PeriodicSegment* stop) {
    if (system.dim != 1) throw Error(ErrorKind::InvalidArgument, "winding index needs a 1-DOF system");
    if (contour.size() < 3 || n_points < 4)
        throw Error(ErrorKind::InvalidArgument, "contour needs at least 3 vertices and 4 points");
    const std::size_t m = contour.size();
    std::vector<double> cum(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + (contour[(i + 1) % m] - contour[i]).norm();
    const double L = cum[m];
    auto point = [&](double s) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), s);
        const std::size_t i = std::min<std::size_t>(m - 1, std::max<std::ptrdiff_t>(0, it - cum.begin() - 1));
        const double len = cum[i + 1] - cum[i];
        const double u = len > 0.0 ? (s - cum[i]) / len : 0.0;
        return Eigen::Vector2d(contour[i] + u * (contour[(i + 1) % m] - contour[i]));
    };
    WindingReport rep;
    rep.min_norm = kInf;
    auto eval = [&](double s) {
        if (++rep.evaluations > max_evaluations)
            throw Error(ErrorKind::RefinementLimit, "winding refinement exceeded " + std::to_string(max_evaluations) +
                                                        " period-map evaluations");
        const Eigen::Vector2d x = point(s);
        const State z = state1(x[0], x[1]);
        const Vec r = stop ? Vec(stopped_period_map(system, *stop, z, cfg).stacked() - z.stacked())
                           : shooting_residual(system, z, cfg);
        const double nr = r.norm();
        rep.min_norm = std::min(rep.min_norm, nr);
        if (nr < 1e-10)
            throw Error(ErrorKind::ZeroOnContour, "P(s) - s vanishes on the contour at (" + std::to_string(x[0]) +
                                                      ", " + std::to_string(x[1]) + ")");
        return Eigen::Vector2d(r[0], r[1]);
    };
    auto increment = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    };
    struct Node {
        double s;
        Eigen::Vector2d r;
    };
    double total = 0.0;
    Node prev{0.0, eval(0.0)};
    const Node first = prev;
    for (int k = 1; k <= n_points; ++k) {
        Node end = k == n_points ? Node{L, first.r} : Node{L * k / n_points, eval(L * k / n_points)};
        // Depth-first bisection of [prev, end] until increments are below π/2.
        std::vector<Node> stack{end};
        while (!stack.empty()) {
            const Node b = stack.back();
            const double d = increment(prev.r, b.r);
            if (std::abs(d) < kPi / 2) {
                total += d;
                prev = b;
                stack.pop_back();
                continue;
            }
            const double mid = 0.5 * (prev.s + b.s);
            if (b.s - prev.s < 1e-12 * L)
                throw Error(ErrorKind::RefinementLimit, "angle increment unresolved near contour parameter " +
                                                            std::to_string(mid / L));
            stack.push_back({mid, eval(mid)});
        }
    }
    rep.total_angle = total;
    rep.index = static_cast<int>(std::lround(total / kTwoPi));
    return rep;
}

ConfinementReport verify_confinement(const PeriodicOrbit& orbit, const PeriodicSegment& seg, int n_checks,
                                     double eps) {
    if (n_checks < 2) throw Error(ErrorKind::InvalidArgument, "confinement needs at least two checks");
    ConfinementReport rep;
    rep.n_checks = n_checks;
    rep.lower = rep.upper = rep.speed = rep.band = kInf;
    const auto& tr = orbit.trajectory;
    for (int k = 0; k < n_checks; ++k) {
        const double t = tr.t0() + (tr.t1() - tr.t0()) * k / (n_checks - 1);
        const State s = tr.state_at(t);
        if (seg.kind == SegmentKind::MetricBall) {
            const double e = 0.5 * s.qd.dot(seg.metric->A(s.q) * s.qd);
            rep.lower = std::min(rep.lower, -seg.region->level(s.q));
            rep.speed = std::min(rep.speed, seg.p - e);
            rep.band = std::min(rep.band, seg.p - eps - e);
            continue;
        }
        for (int j = 0; j < seg.dim; ++j) {
            rep.lower = std::min(rep.lower, s.q[j] - seg.barriers[j].lower.x(t));
            rep.upper = std::min(rep.upper, seg.barriers[j].upper.x(t) - s.q[j]);
            rep.speed = std::min(rep.speed, seg.p - std::abs(s.qd[j]));
            rep.band = std::min(rep.band, seg.p - eps - std::abs(s.qd[j]));
        }
    }
    rep.margin = std::min({rep.lower, rep.upper, rep.speed});
    rep.confined = rep.margin > 0.0;
    rep.band_clear = rep.band > 0.0;
    return rep;
}

FloquetReport floquet_multipliers(const SystemSpec& system, const PeriodicOrbit& orbit, double fd_step,
                                  const IntegratorConfig& cfg) {
    const int n = 2 * system.dim;
    const Vec y = orbit.s0.stacked();
    FloquetReport rep;
    rep.monodromy = Mat(n, n);
    for (int k = 0; k < n; ++k) {
        Vec yp = y, ym = y;
        yp[k] += fd_step;
        ym[k] -= fd_step;
        const Vec pp = period_map(system, State::unstack(yp), cfg).stacked();
        const Vec pm = period_map(system, State::unstack(ym), cfg).stacked();
        rep.monodromy.col(k) = wrapped_difference(system, pm, pp) / (2.0 * fd_step);
    }
    const Eigen::EigenSolver<Mat> es(rep.monodromy);
    if (es.info() != Eigen::Success) return rep;
    const Eigen::MatrixXcd V = es.eigenvectors();
    const Eigen::VectorXcd lam = es.eigenvalues();
    const Eigen::MatrixXcd M = rep.monodromy.cast<std::complex<double>>();
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXcd v = V.col(i).normalized();
        rep.max_residual = std::max(rep.max_residual, (M * v - lam[i] * v).norm());
        rep.multipliers.push_back(lam[i]);
    }
    std::sort(rep.multipliers.begin(), rep.multipliers.end(),
              [](const auto& a, const auto& b) { return std::abs(a) > std::abs(b); });
    rep.residual_ok = rep.max_residual < 1e-6;
    return rep;
}

}  // namespace forced_osc
