#include "forced_osc/segment.hpp"

#include "forced_osc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace forced_osc {

std::string_view to_string(FaceType type) {
    switch (type) {
        case FaceType::LowerWall: return "lower_wall";
        case FaceType::UpperWall: return "upper_wall";
        case FaceType::LowerCap: return "lower_cap";
        case FaceType::UpperCap: return "upper_cap";
        case FaceType::Boundary: return "boundary";
        case FaceType::SpeedShell: return "speed_shell";
    }
    return "unknown";
}

std::string_view to_string(FaceClass cls) {
    switch (cls) {
        case FaceClass::Pending: return "pending";
        case FaceClass::Exit: return "exit";
        case FaceClass::Entry: return "entry";
        case FaceClass::TangentExit: return "tangent-exit";
        case FaceClass::Unresolved: return "unresolved";
    }
    return "unknown";
}

RegionSpec polar_cap_region(double eps) {
    RegionSpec r;
    r.name = "polar_cap";
    r.level = [eps](const Vec& q) { return eps - std::cos(q[0]); };
    r.grad = [](const Vec& q) {
        Vec g(2);
        g << std::sin(q[0]), 0.0;
        return g;
    };
    r.hess = [](const Vec& q) {
        Mat h = Mat::Zero(2, 2);
        h(0, 0) = std::cos(q[0]);
        return h;
    };
    r.q_lo = Vec(2);
    r.q_hi = Vec(2);
    r.q_lo << 1e-3, -kPi;
    r.q_hi << std::acos(eps), kPi;
    return r;
}

RegionSpec ball_region(const Vec& centre, double radius) {
    RegionSpec r;
    r.name = "ball";
    r.level = [centre, radius](const Vec& q) { return (q - centre).norm() - radius; };
    r.grad = [centre](const Vec& q) {
        const Vec d = q - centre;
        const double n = d.norm();
        return n > 0.0 ? Vec(d / n) : Vec(Vec::Zero(q.size()));
    };
    r.hess = [centre](const Vec& q) {
        const Vec d = q - centre;
        const double n = d.norm();
        const auto k = q.size();
        if (n == 0.0) return Mat(Mat::Zero(k, k));
        return Mat((Mat::Identity(k, k) - d * d.transpose() / (n * n)) / n);
    };
    r.q_lo = centre.array() - radius;
    r.q_hi = centre.array() + radius;
    return r;
}

double PeriodicSegment::margin(double t, const State& s) const {
    if (kind == SegmentKind::MetricBall) {
        const double e = 0.5 * s.qd.dot(metric->A(s.q) * s.qd);
        return std::min(-region->level(s.q), p - e);
    }
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < dim; ++j) {
        m = std::min({m, s.q[j] - barriers[j].lower.x(t), barriers[j].upper.x(t) - s.q[j], p - std::abs(s.qd[j])});
    }
    return m;
}

double gamma_of_t(const std::function<double(double)>& f, double t) {
    // arccot into (0, π): atan2(1, f) = π/2 − atan f.
    return std::atan2(1.0, f(t));
}

namespace {

Face make_face(std::string id, FaceType type, int coord, std::function<std::pair<double, double>(double)> span,
               FaceClass expected, bool closed) {
    Face f;
    f.id = std::move(id);
    f.type = type;
    f.coord = coord;
    f.span = std::move(span);
    f.expected = expected;
    f.closed = closed;
    return f;
}

}  // namespace

PeriodicSegment build_pendulum_segment(std::function<double(double)> f, double p, double T) {
    if (!(p > 0.0)) throw Error(ErrorKind::InvalidArgument, "speed bound p must be positive");
    PeriodicSegment seg;
    seg.kind = SegmentKind::Box;
    seg.period = T;
    seg.dim = 1;
    seg.p = p;
    seg.barriers = {BarrierPair::constant(0.0, kPi)};
    auto gamma = [f](double t) { return gamma_of_t(f, t); };
    using E = FaceClass;
    using P = std::pair<double, double>;
    seg.faces.push_back(make_face("right", FaceType::LowerWall, 0, [p](double) { return P{-p, 0.0}; }, E::Exit, true));
    seg.faces.push_back(make_face("left", FaceType::UpperWall, 0, [p](double) { return P{0.0, p}; }, E::Exit, true));
    seg.faces.push_back(make_face("top", FaceType::UpperCap, 0, [gamma](double t) { return P{gamma(t), kPi}; }, E::Exit, true));
    seg.faces.push_back(make_face("bottom", FaceType::LowerCap, 0, [gamma](double t) { return P{0.0, gamma(t)}; }, E::Exit, true));
    seg.faces.push_back(make_face("right_rest", FaceType::LowerWall, 0, [p](double) { return P{0.0, p}; }, E::Entry, false));
    seg.faces.push_back(make_face("left_rest", FaceType::UpperWall, 0, [p](double) { return P{-p, 0.0}; }, E::Entry, false));
    seg.faces.push_back(make_face("top_rest", FaceType::UpperCap, 0, [gamma](double t) { return P{0.0, gamma(t)}; }, E::Entry, false));
    seg.faces.push_back(make_face("bottom_rest", FaceType::LowerCap, 0, [gamma](double t) { return P{gamma(t), kPi}; }, E::Entry, false));
    return seg;
}

PeriodicSegment build_barrier_segment(const std::vector<BarrierPair>& barriers, double p, double T) {
    if (barriers.empty()) throw Error(ErrorKind::InvalidArgument, "at least one barrier pair is required");
    double slope = 0.0;
    for (const auto& b : barriers)
        for (int k = 0; k < 512; ++k) {
            const double t = T * k / 512.0;
            slope = std::max({slope, std::abs(b.lower.dx(t)), std::abs(b.upper.dx(t))});
        }
    if (!(p > slope)) {
        throw Error(ErrorKind::SpeedBoundTooSmall,
                    "p = " + std::to_string(p) + " does not exceed the barrier slope " + std::to_string(slope));
    }
    PeriodicSegment seg;
    seg.kind = SegmentKind::Box;
    seg.period = T;
    seg.dim = static_cast<int>(barriers.size());
    seg.p = p;
    seg.barriers = barriers;
    seg.caps_modified = true;
    seg.notes.push_back("speed caps are classified against the cutoff-modified field");
    using E = FaceClass;
    using P = std::pair<double, double>;
    for (int j = 0; j < seg.dim; ++j) {
        const auto b = barriers[j];
        const std::string x = seg.dim == 1 ? "x" : "x" + std::to_string(j + 1);
        auto lo_dx = b.lower.dx;
        auto hi_dx = b.upper.dx;
        seg.faces.push_back(make_face(x + "_lower_exit", FaceType::LowerWall, j, [p, lo_dx](double t) { return P{-p, lo_dx(t)}; }, E::Exit, true));
        seg.faces.push_back(make_face(x + "_upper_exit", FaceType::UpperWall, j, [p, hi_dx](double t) { return P{hi_dx(t), p}; }, E::Exit, true));
        seg.faces.push_back(make_face(x + "_lower_entry", FaceType::LowerWall, j, [p, lo_dx](double t) { return P{lo_dx(t), p}; }, E::Entry, false));
        seg.faces.push_back(make_face(x + "_upper_entry", FaceType::UpperWall, j, [p, hi_dx](double t) { return P{-p, hi_dx(t)}; }, E::Entry, false));
        auto lo_x = b.lower.x;
        auto hi_x = b.upper.x;
        seg.faces.push_back(make_face(x + "_cap_minus", FaceType::LowerCap, j, [lo_x, hi_x](double t) { return P{lo_x(t), hi_x(t)}; }, E::Entry, false));
        seg.faces.push_back(make_face(x + "_cap_plus", FaceType::UpperCap, j, [lo_x, hi_x](double t) { return P{lo_x(t), hi_x(t)}; }, E::Entry, false));
    }
    return seg;
}

PeriodicSegment build_metric_ball_segment(const MetricSpec& metric, const RegionSpec& region, int dim, double p,
                                          double T) {
    if (!(p > 0.0)) throw Error(ErrorKind::InvalidArgument, "speed bound p must be positive");
    PeriodicSegment seg;
    seg.kind = SegmentKind::MetricBall;
    seg.period = T;
    seg.dim = dim;
    seg.p = p;
    seg.region = region;
    seg.metric = metric;
    seg.caps_modified = true;
    seg.notes.push_back("solid speed set <qd, A qd> <= 2p is used for W_t");
    seg.notes.push_back("speed shell is classified against the friction-modified field");
    Face exit_face = make_face("boundary_exit", FaceType::Boundary, 0, nullptr, FaceClass::Exit, true);
    exit_face.normal_sign = 1;
    Face entry_face = make_face("boundary_entry", FaceType::Boundary, 0, nullptr, FaceClass::Entry, false);
    entry_face.normal_sign = -1;
    seg.faces = {exit_face, entry_face, make_face("speed_shell", FaceType::SpeedShell, 0, nullptr, FaceClass::Entry, false)};
    return seg;
}

namespace {

struct Rates {
    double rate;
    double second;
};

// Directional derivative of the acceleration along the flow.
Vec accel_rate(const SystemSpec& sys, double t, const State& s, const Vec& a) {
    const double h = 1e-6;
    const Vec ap = sys.accel(t + h, s.q + h * s.qd, s.qd + h * a);
    const Vec am = sys.accel(t - h, s.q - h * s.qd, s.qd - h * a);
    return (ap - am) / (2 * h);
}

Rates face_rates(const SystemSpec& sys, const PeriodicSegment& seg, const Face& face, double t, const State& s) {
    const int j = face.coord;
    const Vec a = sys.accel(t, s.q, s.qd);
    switch (face.type) {
        case FaceType::LowerWall: {
            const auto& b = seg.barriers[j].lower;
            return {b.dx(t) - s.qd[j], b.ddx(t) - a[j]};
        }
        case FaceType::UpperWall: {
            const auto& b = seg.barriers[j].upper;
            return {s.qd[j] - b.dx(t), a[j] - b.ddx(t)};
        }
        case FaceType::LowerCap: return {-a[j], std::abs(a[j]) > kStrictTol ? 0.0 : -accel_rate(sys, t, s, a)[j]};
        case FaceType::UpperCap: return {a[j], std::abs(a[j]) > kStrictTol ? 0.0 : accel_rate(sys, t, s, a)[j]};
        case FaceType::Boundary: {
            const Vec g = seg.region->grad(s.q);
            const double r = g.dot(s.qd);
            return {r, s.qd.dot(seg.region->hess(s.q) * s.qd) + g.dot(a)};
        }
        case FaceType::SpeedShell: {
            // E = ½⟨q̇, Aq̇⟩ along a second-order Taylor path of the flow.
            const Vec ad = accel_rate(sys, t, s, a);
            auto energy = [&](double tau) {
                const Vec q = s.q + tau * s.qd + 0.5 * tau * tau * a;
                const Vec qd = s.qd + tau * a + 0.5 * tau * tau * ad;
                return 0.5 * qd.dot(seg.metric->A(q) * qd);
            };
            const double h = 1e-4;
            const double ep = energy(h), em = energy(-h), e0 = energy(0.0);
            return {(ep - em) / (2 * h), -(ep - 2 * e0 + em) / (h * h)};
        }
    }
    return {0.0, 0.0};
}

FaceClass classify(const Rates& r) {
    if (r.rate > kStrictTol) return FaceClass::Exit;
    if (r.rate < -kStrictTol) return FaceClass::Entry;
    if (r.second > kStrictTol) return FaceClass::TangentExit;
    if (r.second < -kStrictTol) return FaceClass::Entry;
    return FaceClass::Unresolved;
}

double strictness(const Rates& r) { return std::abs(r.rate) > kStrictTol ? r.rate : r.second; }

State box_point(const PeriodicSegment& seg, const Face& face, double t, double u, const Vec& q_other,
                const Vec& qd_other) {
    State s(q_other, qd_other);
    const int j = face.coord;
    const auto& b = seg.barriers[j];
    switch (face.type) {
        case FaceType::LowerWall: s.q[j] = b.lower.x(t); s.qd[j] = u; break;
        case FaceType::UpperWall: s.q[j] = b.upper.x(t); s.qd[j] = u; break;
        case FaceType::LowerCap: s.q[j] = u; s.qd[j] = -seg.p; break;
        case FaceType::UpperCap: s.q[j] = u; s.qd[j] = seg.p; break;
        default: break;
    }
    return s;
}

// Newton projection of a point onto {level = 0}.
std::optional<Vec> project_to_boundary(const RegionSpec& region, Vec q) {
    for (int it = 0; it < 60; ++it) {
        const double l = region.level(q);
        if (std::abs(l) < 1e-13) return q;
        const Vec g = region.grad(q);
        const double g2 = g.squaredNorm();
        if (!(g2 > 1e-20)) return std::nullopt;
        q -= (l / g2) * g;
    }
    return std::nullopt;
}

Vec random_direction(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

std::vector<std::pair<double, State>> ball_points(const PeriodicSegment& seg, const Face& face, int n,
                                                  std::mt19937_64& rng) {
    const auto& region = *seg.region;
    const auto& metric = *seg.metric;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, State>> out;
    const int dim = seg.dim;
    int attempts = 0;
    while (static_cast<int>(out.size()) < n && attempts < 100 * n) {
        ++attempts;
        const double t = seg.period * unit(rng);
        Vec q(dim);
        for (int i = 0; i < dim; ++i) q[i] = region.q_lo[i] + (region.q_hi[i] - region.q_lo[i]) * unit(rng);
        if (face.type == FaceType::Boundary) {
            auto qb = project_to_boundary(region, q);
            if (!qb) continue;
            q = *qb;
        } else if (region.level(q) > 0.0) {
            continue;
        }
        if (metric.in_chart && !metric.in_chart(q)) continue;
        const Mat A = metric.A(q);
        Vec dir = random_direction(rng, dim);
        const bool tangent = face.type == FaceType::Boundary && face.normal_sign > 0 && out.size() % 4 == 0;
        const Vec g = region.grad(q);
        if (face.type == FaceType::Boundary) {
            // Remove the A-normal component for tangent samples, or orient.
            const Vec ng = A.ldlt().solve(g);
            if (tangent) dir -= (g.dot(dir) / g.dot(ng)) * ng;
            else if (face.normal_sign * g.dot(dir) < 0.0) dir = -dir;
            if (!tangent && std::abs(g.dot(dir)) < 1e-6 * dir.norm()) continue;
        }
        const double norm_a = std::sqrt(dir.dot(A * dir));
        if (!(norm_a > 0.0)) continue;
        const double energy = face.type == FaceType::SpeedShell ? seg.p : seg.p * unit(rng);
        const Vec qd = dir * (std::sqrt(2.0 * energy) / norm_a);
        out.emplace_back(t, State(q, qd));
    }
    return out;
}

}  // namespace

OutwardRates outward_rates(const SystemSpec& system, const PeriodicSegment& segment, std::size_t face, double t,
                           const State& s) {
    const Rates r = face_rates(system, segment, segment.faces.at(face), t, s);
    return {r.rate, r.second, classify(r)};
}

FaceCheckReport check_exit_faces(const SystemSpec& system, PeriodicSegment& segment, int n_samples,
                                 std::uint64_t seed, bool keep_samples) {
    if (n_samples < 1) throw Error(ErrorKind::InvalidArgument, "n_samples must be positive");
    if (system.dim != segment.dim) throw Error(ErrorKind::InvalidArgument, "segment and system dimensions differ");
    FaceCheckReport rep;
    rep.exit_margin = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int dim = segment.dim;
    const double T = segment.period;

    for (std::size_t fi = 0; fi < segment.faces.size(); ++fi) {
        auto& face = segment.faces[fi];
        FaceResult res;
        res.id = face.id;
        res.expected = face.expected;
        res.margin = std::numeric_limits<double>::infinity();
        long n_exit = 0, n_entry = 0;
        auto record = [&](double t, const State& s) {
            if (!s.finite()) return;
            const Rates r = face_rates(system, segment, face, t, s);
            const FaceClass c = classify(r);
            ++res.samples;
            if (std::abs(r.rate) <= kStrictTol) ++res.tangent_samples;
            if (c == FaceClass::Unresolved) ++res.unresolved;
            else if (c == FaceClass::Entry) ++n_entry;
            else ++n_exit;
            const double sgn = face.expected == FaceClass::Entry ? -1.0 : 1.0;
            res.margin = std::min(res.margin, sgn * strictness(r));
            if (keep_samples) rep.samples.push_back({fi, t, s, r.rate, r.second, c});
        };

        if (segment.kind == SegmentKind::MetricBall) {
            for (const auto& [t, s] : ball_points(segment, face, n_samples, rng)) record(t, s);
        } else if (dim == 1) {
            const int n_t = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_samples))));
            const int n_u = std::max(2, (n_samples + n_t - 1) / n_t);
            for (int k = 0; k < n_t; ++k) {
                const double t = T * k / n_t;
                const auto [lo, hi] = face.span(t);
                for (int i = 0; i < n_u; ++i) {
                    const double w = face.closed ? static_cast<double>(i) / (n_u - 1) : (i + 0.5) / n_u;
                    record(t, box_point(segment, face, t, lo + (hi - lo) * w, Vec::Zero(1), Vec::Zero(1)));
                }
            }
        } else {
            Vec qo(dim), qdo(dim);
            for (int k = 0; k < n_samples; ++k) {
                const double t = T * unit(rng);
                for (int i = 0; i < dim; ++i) {
                    const double lo = segment.barriers[i].lower.x(t), hi = segment.barriers[i].upper.x(t);
                    qo[i] = lo + (hi - lo) * unit(rng);
                    qdo[i] = segment.p * (2.0 * unit(rng) - 1.0);
                }
                const auto [lo, hi] = face.span(t);
                double w = unit(rng);
                if (face.closed && k < 2) w = static_cast<double>(k);
                else if (!face.closed) w = 1e-6 + (1.0 - 2e-6) * w;
                record(t, box_point(segment, face, t, lo + (hi - lo) * w, qo, qdo));
            }
        }

        if (res.samples == 0) {
            face.classification = FaceClass::Unresolved;
            res.classification = FaceClass::Unresolved;
            res.margin = 0.0;
        } else if (res.unresolved > 0 || (n_exit > 0 && n_entry > 0)) {
            face.classification = FaceClass::Unresolved;
        } else if (n_exit > 0) {
            face.classification = res.tangent_samples > 0 ? FaceClass::TangentExit : FaceClass::Exit;
        } else {
            face.classification = FaceClass::Entry;
        }
        res.classification = face.classification;
        const bool want_exit = face.expected != FaceClass::Entry;
        res.mismatched = want_exit ? n_entry : n_exit;
        res.verified = res.unresolved == 0 && res.samples > 0 && face.is_exit() == want_exit &&
                       face.classification != FaceClass::Unresolved;
        rep.unresolved += res.unresolved;
        if (want_exit) rep.exit_margin = std::min(rep.exit_margin, res.margin);
        rep.faces.push_back(res);
    }
    rep.all_verified = std::all_of(rep.faces.begin(), rep.faces.end(), [](const FaceResult& f) { return f.verified; });
    return rep;
}

int scan_exit_components(const SystemSpec& system, const PeriodicSegment& segment, double t, int n) {
    if (segment.kind != SegmentKind::Box || segment.dim != 1)
        throw Error(ErrorKind::InvalidArgument, "perimeter scan needs a one-degree-of-freedom box segment");
    const double x1 = segment.barriers[0].lower.x(t), x2 = segment.barriers[0].upper.x(t);
    const double p = segment.p, w = x2 - x1;
    const double per = 2 * w + 4 * p;
    Face probe;
    probe.coord = 0;
    auto exit_on = [&](FaceType type, double q, double qd) {
        probe.type = type;
        const FaceClass c = classify(face_rates(system, segment, probe, t, State(Vec::Constant(1, q), Vec::Constant(1, qd))));
        return c == FaceClass::Exit || c == FaceClass::TangentExit;
    };
    std::vector<char> ex(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double sigma = per * (k + 0.5) / n;
        bool e;
        if (sigma < w) e = exit_on(FaceType::LowerCap, x1 + sigma, -p);
        else if (sigma < w + 2 * p) e = exit_on(FaceType::UpperWall, x2, -p + (sigma - w));
        else if (sigma < 2 * w + 2 * p) e = exit_on(FaceType::UpperCap, x2 - (sigma - w - 2 * p), p);
        else e = exit_on(FaceType::LowerWall, x1, p - (sigma - 2 * w - 2 * p));
        ex[static_cast<std::size_t>(k)] = e;
    }
    int runs = 0;
    for (int k = 0; k < n; ++k)
        if (ex[k] && !ex[(k + n - 1) % n]) ++runs;
    if (runs == 0 && n > 0 && ex[0]) return 0;  // the whole perimeter exits
    return runs;
}

namespace {

struct Arc {
    double a, b;
};

// Counts components of a union of closed arcs on a circle of length `per`.
// Returns −1 when the arcs cover the whole circle.
int circle_components(std::vector<Arc> arcs, double per) {
    if (arcs.empty()) return 0;
    const double tol = 1e-9 * per;
    std::sort(arcs.begin(), arcs.end(), [](const Arc& x, const Arc& y) { return x.a < y.a; });
    std::vector<Arc> merged;
    for (const auto& arc : arcs) {
        if (!merged.empty() && arc.a <= merged.back().b + tol) merged.back().b = std::max(merged.back().b, arc.b);
        else merged.push_back(arc);
    }
    if (merged.size() > 1 && merged.front().a <= tol && merged.back().b >= per - tol) {
        merged.front().a = merged.back().a - per;
        merged.pop_back();
    }
    if (merged.size() == 1 && merged.front().b - merged.front().a >= per - tol) return -1;
    return static_cast<int>(merged.size());
}

std::vector<Arc> exit_arcs(const PeriodicSegment& seg, int coord, double t, double& per) {
    const double x1 = seg.barriers[coord].lower.x(t), x2 = seg.barriers[coord].upper.x(t);
    const double p = seg.p, w = x2 - x1;
    per = 2 * w + 4 * p;
    std::vector<Arc> arcs;
    for (const auto& f : seg.faces) {
        if (f.coord != coord || !f.is_exit()) continue;
        const auto [lo, hi] = f.span(t);
        switch (f.type) {
            case FaceType::LowerCap: arcs.push_back({lo - x1, hi - x1}); break;
            case FaceType::UpperWall: arcs.push_back({w + lo + p, w + hi + p}); break;
            case FaceType::UpperCap: arcs.push_back({w + 2 * p + x2 - hi, w + 2 * p + x2 - lo}); break;
            case FaceType::LowerWall: arcs.push_back({2 * w + 3 * p - hi, 2 * w + 3 * p - lo}); break;
            default: break;
        }
    }
    return arcs;
}

}  // namespace

IndexReport euler_characteristics(const PeriodicSegment& segment) {
    for (const auto& f : segment.faces) {
        if (f.classification == FaceClass::Pending)
            throw Error(ErrorKind::UnclassifiedFaces, "face '" + f.id + "' has not been classified");
        if (f.classification == FaceClass::Unresolved)
            throw Error(ErrorKind::UnclassifiedFaces, "face '" + f.id + "' could not be classified");
    }
    IndexReport rep;
    rep.chi_W = 1;
    if (segment.kind == SegmentKind::MetricBall) {
        const auto exit_it = std::find_if(segment.faces.begin(), segment.faces.end(),
                                          [](const Face& f) { return f.type == FaceType::Boundary && f.is_exit(); });
        const bool shell_exit = std::any_of(segment.faces.begin(), segment.faces.end(), [](const Face& f) {
            return f.type == FaceType::SpeedShell && f.is_exit();
        });
        if (exit_it == segment.faces.end() || shell_exit)
            throw Error(ErrorKind::NonProductSegment, "metric-ball exit set is not the outward half of the boundary");
        const int n = segment.dim;
        rep.chi_exit = 1 + ((n - 1) % 2 == 0 ? 1 : -1);
        rep.exit_components = n >= 2 ? 1 : 2;
        rep.index = rep.chi_W - rep.chi_exit;
        rep.method = "metric ball: exit set homotopic to S^" + std::to_string(n - 1);
        return rep;
    }
    // Product structure: cross-sections at 0 and T must coincide.
    const double T = segment.period;
    for (const auto& b : segment.barriers) {
        if (std::abs(b.lower.x(T) - b.lower.x(0.0)) > 1e-10 || std::abs(b.upper.x(T) - b.upper.x(0.0)) > 1e-10)
            throw Error(ErrorKind::NonProductSegment, "barriers differ at t = 0 and t = T");
    }
    for (const auto& f : segment.faces) {
        const auto a = f.span(0.0), b = f.span(T);
        if (std::abs(a.first - b.first) > 1e-10 || std::abs(a.second - b.second) > 1e-10)
            throw Error(ErrorKind::NonProductSegment, "face '" + f.id + "' differs at t = 0 and t = T");
    }
    int product = 1;
    int nonempty = 0, components = 0;
    for (int j = 0; j < segment.dim; ++j) {
        double per = 0.0;
        const int c = circle_components(exit_arcs(segment, j, 0.0, per), per);
        const int chi_e = c < 0 ? 0 : c;
        product *= 1 - chi_e;
        if (c != 0) {
            ++nonempty;
            components = c < 0 ? 1 : c;
        }
    }
    rep.index = product;
    rep.chi_exit = rep.chi_W - product;
    rep.exit_components = nonempty == 0 ? 0 : (nonempty == 1 ? components : 1);
    rep.method = segment.dim == 1 ? "exit arcs on the perimeter of W_0" : "product of per-coordinate exit arcs";
    return rep;
}

}  // namespace forced_osc
