#include "forced_osc/scenario.hpp"

#include "forced_osc/errors.hpp"
#include "forced_osc/expr.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace forced_osc {

const std::vector<std::string>& gallery_names() {
    static const std::vector<std::string> names{"pendulum",      "curve_pendulum",     "rotating_curve", "morse_chain",
                                                "spherical_pendulum", "custom_flat", "geodesic"};
    return names;
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"verify-segment", "select-p",  "find-orbits",
                                                "index",          "lemma-demo", "escape-bound"};
    return names;
}

SystemSpec Scenario::face_system() const {
    const bool modified = segment_source == SegmentSource::Barriers || segment_source == SegmentSource::VerticalTangents ||
                          segment_source == SegmentSource::PolarCap || segment_source == SegmentSource::Ball;
    return modified && cutoff ? modified_system(system, *cutoff) : system;
}

namespace {

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
    return out;
}

std::vector<std::string> state_variables(int dim) {
    std::vector<std::string> v{"t"};
    if (dim == 1) return {"t", "q", "qd"};
    for (int i = 1; i <= dim; ++i) v.push_back("q" + std::to_string(i));
    for (int i = 1; i <= dim; ++i) v.push_back("qd" + std::to_string(i));
    return v;
}

AccelFn field_of(std::vector<Expr> exprs) {
    return [exprs = std::move(exprs)](double t, const Vec& q, const Vec& qd) {
        const auto n = q.size();
        std::vector<double> v(1 + 2 * n);
        v[0] = t;
        for (Eigen::Index i = 0; i < n; ++i) {
            v[1 + i] = q[i];
            v[1 + n + i] = qd[i];
        }
        Vec out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = exprs[i](v);
        return out;
    };
}

Barrier barrier_of(const Expr& e) {
    const Expr d = e.derivative(0), dd = d.derivative(0);
    return {[e](double t) { return e.eval({t}); }, [d](double t) { return d.eval({t}); },
            [dd](double t) { return dd.eval({t}); }};
}

/// Walks the YAML tree, turning type errors into ParseError diagnostics and
/// collecting unknown keys and semantic violations.
class Reader {
public:
    Reader(std::string path, bool strict, std::vector<std::string>& warnings)
        : path_(std::move(path)), strict_(strict), warnings_(warnings) {}

    std::vector<std::string> violations;

    [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) const {
        std::ostringstream os;
        os << path_;
        if (n.Mark().line >= 0) os << ':' << n.Mark().line + 1 << ':' << n.Mark().column + 1;
        os << ": field '" << field << "': " << msg;
        throw Error(ErrorKind::ParseError, os.str());
    }

    void keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
        if (!n) return;
        if (!n.IsMap()) fail(n, where, "expected a mapping");
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (allowed.count(key)) continue;
            const std::string name = where.empty() ? key : where + "." + key;
            if (strict_) fail(kv.first, name, "unknown key");
            warnings_.push_back("unknown key '" + name + "' ignored");
        }
    }

    std::string text(const YAML::Node& n, const std::string& field) const {
        if (!n.IsScalar()) fail(n, field, "expected a scalar");
        return n.Scalar();
    }

    double number(const YAML::Node& n, const std::string& field) const {
        const auto s = text(n, field);
        double v = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec == std::errc() && r.ptr == s.data() + s.size()) return v;
        const Expr e = expr(n, field, {});
        return e.eval({});
    }

    static std::string field(const std::string& where, const char* key) {
        return where.empty() ? std::string(key) : where + "." + key;
    }

    double number(const YAML::Node& parent, const char* key, const std::string& where, double fallback) const {
        const auto n = parent[key];
        return n ? number(n, field(where, key)) : fallback;
    }

    std::optional<double> maybe_number(const YAML::Node& parent, const char* key, const std::string& where) const {
        const auto n = parent[key];
        if (!n) return std::nullopt;
        return number(n, field(where, key));
    }

    int integer(const YAML::Node& parent, const char* key, const std::string& where, int fallback) const {
        const auto n = parent[key];
        if (!n) return fallback;
        const double v = number(n, field(where, key));
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(n, field(where, key), "expected an integer");
        return static_cast<int>(v);
    }

    bool boolean(const YAML::Node& parent, const char* key, const std::string& where, bool fallback) const {
        const auto n = parent[key];
        if (!n) return fallback;
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            fail(n, field(where, key), "expected true or false");
        }
    }

    Expr expr(const YAML::Node& n, const std::string& field, const std::vector<std::string>& vars) const {
        const auto s = text(n, field);
        try {
            return Expr::parse(s, vars);
        } catch (const Error& e) {
            fail(n, field, e.what());
        }
    }

    std::vector<double> numbers(const YAML::Node& n, const std::string& field) const {
        if (!n.IsSequence()) fail(n, field, "expected a list");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(number(n[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }

    std::vector<Expr> exprs(const YAML::Node& n, const std::string& field, const std::vector<std::string>& vars) const {
        if (n.IsScalar()) return {expr(n, field, vars)};
        if (!n.IsSequence()) fail(n, field, "expected an expression or a list of expressions");
        std::vector<Expr> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(expr(n[i], field + "[" + std::to_string(i) + "]", vars));
        return out;
    }

    Vec vec(const YAML::Node& n, const std::string& field) const {
        const auto v = numbers(n, field);
        return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

private:
    std::string path_;
    bool strict_;
    std::vector<std::string>& warnings_;
};

CurveSpec read_curve(Reader& rd, const YAML::Node& n) {
    if (!n) rd.fail(n, "system.curve", "missing");
    rd.keys(n, "system.curve", {"kind", "centre", "radius", "a", "b"});
    const auto kind = n["kind"] ? rd.text(n["kind"], "system.curve.kind") : std::string("circle");
    Vec c = Vec::Zero(2);
    if (n["centre"]) c = rd.vec(n["centre"], "system.curve.centre");
    if (c.size() != 2) rd.fail(n["centre"], "system.curve.centre", "expected two coordinates");
    if (kind == "circle") {
        const double r = rd.number(n, "radius", "system.curve", 1.0);
        if (!(r > 0.0)) rd.violations.push_back("system.curve.radius must be positive");
        return circle_curve(c[0], c[1], r > 0.0 ? r : 1.0);
    }
    if (kind == "ellipse") {
        const double a = rd.number(n, "a", "system.curve", 1.0), b = rd.number(n, "b", "system.curve", 1.0);
        if (!(a > 0.0 && b > 0.0)) rd.violations.push_back("system.curve semi-axes must be positive");
        return ellipse_curve(a > 0.0 ? a : 1.0, b > 0.0 ? b : 1.0, c[0], c[1]);
    }
    rd.fail(n["kind"], "system.curve.kind", "expected circle or ellipse");
}

struct Built {
    std::optional<CurveSpec> curve;
    std::optional<RotationLaw> law;
    std::optional<Expr> pendulum_force;
};

void read_system(Reader& rd, const YAML::Node& n, Scenario& sc, Built& b) {
    if (!n) {
        rd.violations.push_back("missing section 'system'");
        return;
    }
    if (!n["gallery"]) {
        rd.violations.push_back("system.gallery is required; gallery: " + join(gallery_names()));
        return;
    }
    const auto g = rd.text(n["gallery"], "system.gallery");
    sc.gallery = g;
    const double T = rd.number(n, "period", "system", kTwoPi);
    if (!(T > 0.0)) {
        rd.violations.push_back("system.period must be positive");
        return;
    }
    auto bound = rd.maybe_number(n, "force_bound", "system");
    auto need = [&](const char* key) {
        if (n[key]) return true;
        rd.violations.push_back(std::string("system.") + key + " is required for gallery system '" + g + "'");
        return false;
    };
    auto unbounded = [&] {
        rd.violations.push_back("system.force_bound is required for gallery system '" + g +
                                "' (no growth bound without it)");
    };

    if (g == "pendulum") {
        rd.keys(n, "system", {"gallery", "period", "force", "force_bound"});
        if (!need("force")) return;
        const Expr f = rd.expr(n["force"], "system.force", {"t", "q", "qd"});
        b.pendulum_force = f;
        if (!bound) return unbounded();
        sc.system = pendulum_system([f](double t, double q, double qd) { return f.eval({t, q, qd}); }, T, bound);
    } else if (g == "curve_pendulum") {
        rd.keys(n, "system", {"gallery", "period", "curve", "force", "force_bound"});
        if (!need("force")) return;
        const Expr f = rd.expr(n["force"], "system.force", {"t"});
        b.curve = read_curve(rd, n["curve"]);
        sc.system = curve_pendulum_system(*b.curve, [f](double t) { return f.eval({t}); }, T, bound);
    } else if (g == "rotating_curve") {
        rd.keys(n, "system", {"gallery", "period", "curve", "phi"});
        if (!need("phi")) return;
        const Expr phi = rd.expr(n["phi"], "system.phi", {"t"});
        const Expr d = phi.derivative(0), dd = d.derivative(0);
        b.curve = read_curve(rd, n["curve"]);
        b.law = RotationLaw{[phi](double t) { return phi.eval({t}); }, [d](double t) { return d.eval({t}); },
                            [dd](double t) { return dd.eval({t}); }};
        sc.system = rotating_curve_system(*b.curve, *b.law, T);
    } else if (g == "morse_chain") {
        rd.keys(n, "system", {"gallery", "period", "n", "force", "force_bound"});
        if (!need("force")) return;
        ChainSpec chain;
        chain.n = rd.integer(n, "n", "system", 1);
        if (chain.n < 1) return rd.violations.push_back("system.n must be at least 1");
        const Expr f = rd.expr(n["force"], "system.force", {"t", "x"});
        chain.F = [f](double t, double x) { return f.eval({t, x}); };
        chain.F_bound = bound;
        if (!bound) return unbounded();
        sc.chain = chain;
        sc.system = morse_chain_system(chain, T);
    } else if (g == "spherical_pendulum") {
        rd.keys(n, "system", {"gallery", "period", "fx", "fy", "force_bound", "gravity", "theta_min"});
        const std::vector<std::string> vars{"t", "x", "y", "z", "vx", "vy", "vz"};
        auto force = [&](const char* key) -> SphereForce {
            if (!n[key]) return [](double, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.0; };
            const Expr e = rd.expr(n[key], std::string("system.") + key, vars);
            return [e](double t, const Eigen::Vector3d& r, const Eigen::Vector3d& v) {
                return e.eval({t, r.x(), r.y(), r.z(), v.x(), v.y(), v.z()});
            };
        };
        auto fx = force("fx"), fy = force("fy");
        if (!bound) return unbounded();
        sc.system = spherical_pendulum_system(fx, fy, T, bound, rd.number(n, "gravity", "system", 1.0),
                                              rd.number(n, "theta_min", "system", 1e-3));
    } else if (g == "custom_flat" || g == "geodesic") {
        const bool geo = g == "geodesic";
        if (geo)
            rd.keys(n, "system", {"gallery", "period", "metric", "dim", "field", "name"});
        else
            rd.keys(n, "system", {"gallery", "period", "dim", "accel", "growth", "angular", "name"});
        const auto metric_name = geo && n["metric"] ? rd.text(n["metric"], "system.metric") : std::string("flat");
        if (metric_name != "flat" && metric_name != "sphere")
            return rd.violations.push_back("system.metric must be flat or sphere");
        const int dim = metric_name == "sphere" ? 2 : rd.integer(n, "dim", "system", 1);
        if (dim < 1) return rd.violations.push_back("system.dim must be at least 1");
        const char* key = geo ? "field" : "accel";
        std::vector<Expr> es;
        if (n[key]) {
            es = rd.exprs(n[key], std::string("system.") + key, state_variables(dim));
        } else if (geo) {
            es.assign(dim, Expr::constant(0.0));
        } else {
            return (void)need(key);
        }
        if (static_cast<int>(es.size()) != dim)
            return rd.violations.push_back(std::string("system.") + key + " needs " + std::to_string(dim) +
                                           " components");
        const auto name = n["name"] ? rd.text(n["name"], "system.name") : g;
        if (geo) {
            const MetricSpec m = metric_name == "sphere" ? sphere_metric() : flat_metric(dim);
            sc.system = metric_system(name, m, dim, field_of(es), T);
        } else {
            sc.system = flat_system(name, dim, T, field_of(es));
            if (const auto gn = n["growth"]) {
                rd.keys(gn, "system.growth", {"a", "b", "delta"});
                sc.system.growth = GrowthBound{rd.number(gn, "a", "system.growth", 0.0),
                                               rd.number(gn, "b", "system.growth", 0.0),
                                               rd.number(gn, "delta", "system.growth", 1.0)};
            }
            if (const auto an = n["angular"]) {
                if (!an.IsSequence()) rd.fail(an, "system.angular", "expected a list of booleans");
                for (const auto& x : an) sc.system.angular.push_back(x.as<bool>());
            }
        }
    } else {
        rd.violations.push_back("unknown system '" + g + "'; gallery: " + join(gallery_names()));
    }
}

void read_segment(Reader& rd, const YAML::Node& n, Scenario& sc, const Built& b) {
    if (!n) return;
    rd.keys(n, "segment", {"kind", "p", "lower", "upper", "cap_eps", "centre", "radius"});
    if (!n["kind"]) return rd.violations.push_back("segment.kind is required (pendulum, barriers, vertical_tangents, "
                                                   "polar_cap, ball)");
    const auto kind = rd.text(n["kind"], "segment.kind");
    if (!n["p"]) return rd.violations.push_back("segment.p is required");
    const double p = rd.number(n["p"], "segment.p");
    if (!(p > 0.0)) return rd.violations.push_back("segment.p must be positive");
    if (!sc.system.accel) return;  // the system already failed validation
    const double T = sc.system.period;
    const int dim = sc.system.dim;
    auto wrong_system = [&](const char* what) {
        rd.violations.push_back("segment kind '" + kind + "' needs " + what + " (system is '" + sc.gallery + "')");
    };
    try {
        if (kind == "pendulum") {
            if (sc.gallery != "pendulum") return wrong_system("the pendulum system");
            const Expr f = *b.pendulum_force;
            if (f.depends_on(1) || f.depends_on(2))
                return rd.violations.push_back("segment kind 'pendulum' needs a force depending on t only");
            sc.segment_source = SegmentSource::Pendulum;
            sc.segment = build_pendulum_segment([f](double t) { return f.eval({t, 0.0, 0.0}); }, p, T);
        } else if (kind == "barriers") {
            if (sc.system.metric) return wrong_system("a flat system");
            if (!n["lower"] || !n["upper"]) return rd.violations.push_back("segment.lower and segment.upper are required");
            const auto lo = rd.exprs(n["lower"], "segment.lower", {"t"});
            const auto hi = rd.exprs(n["upper"], "segment.upper", {"t"});
            if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
                return rd.violations.push_back("segment.lower and segment.upper need " + std::to_string(dim) +
                                               " entries each");
            bool ok = true;
            for (int j = 0; j < dim; ++j) {
                double worst_gap = INFINITY, worst_t = 0.0, period_defect = 0.0;
                for (int k = 0; k <= 512; ++k) {
                    const double t = T * k / 512.0;
                    const double gap = hi[j].eval({t}) - lo[j].eval({t});
                    if (gap < worst_gap) worst_gap = gap, worst_t = t;
                    period_defect = std::max({period_defect, std::abs(lo[j].eval({t + T}) - lo[j].eval({t})),
                                              std::abs(hi[j].eval({t + T}) - hi[j].eval({t}))});
                }
                if (!(worst_gap > 0.0)) {
                    std::ostringstream os;
                    os << "barrier order condition x1(t) < x2(t) fails for coordinate " << j + 1 << " at t = " << worst_t
                       << " (x2 - x1 = " << worst_gap << ")";
                    rd.violations.push_back(os.str());
                    ok = false;
                }
                if (period_defect > 1e-10) {
                    rd.violations.push_back("barriers of coordinate " + std::to_string(j + 1) + " are not T-periodic");
                    ok = false;
                }
            }
            if (!ok) return;
            for (int j = 0; j < dim; ++j) sc.barriers.push_back({barrier_of(lo[j]), barrier_of(hi[j])});
            sc.segment_source = SegmentSource::Barriers;
            sc.segment = build_barrier_segment(sc.barriers, p, T);
        } else if (kind == "vertical_tangents") {
            if (!b.law) return wrong_system("the rotating_curve system");
            sc.barriers = {rotating_curve_barriers(*b.curve, *b.law)};
            sc.segment_source = SegmentSource::VerticalTangents;
            sc.segment = build_barrier_segment(sc.barriers, p, T);
        } else if (kind == "polar_cap") {
            if (sc.gallery != "spherical_pendulum" && !(sc.system.metric && dim == 2))
                return wrong_system("a system on the sphere");
            const double eps = rd.number(n, "cap_eps", "segment", 0.1);
            if (!(eps > -1.0 && eps < 1.0)) return rd.violations.push_back("segment.cap_eps must lie in (-1, 1)");
            sc.segment_source = SegmentSource::PolarCap;
            sc.segment = build_metric_ball_segment(*sc.system.metric, polar_cap_region(eps), 2, p, T);
        } else if (kind == "ball") {
            if (!sc.system.metric) return wrong_system("a metric system");
            const Vec c = n["centre"] ? rd.vec(n["centre"], "segment.centre") : Vec(Vec::Zero(dim));
            const double r = rd.number(n, "radius", "segment", 1.0);
            if (c.size() != dim || !(r > 0.0))
                return rd.violations.push_back("segment.centre needs " + std::to_string(dim) +
                                               " entries and segment.radius must be positive");
            sc.segment_source = SegmentSource::Ball;
            sc.segment = build_metric_ball_segment(*sc.system.metric, ball_region(c, r), dim, p, T);
        } else {
            rd.violations.push_back("unknown segment kind '" + kind +
                                    "' (pendulum, barriers, vertical_tangents, polar_cap, ball)");
        }
    } catch (const Error& e) {
        rd.violations.push_back("segment: " + std::string(e.what()));
    }
}

void read_cutoff(Reader& rd, const YAML::Node& n, Scenario& sc) {
    if (!n) return;
    rd.keys(n, "cutoff", {"eps", "mu", "smoothness", "norm"});
    CutoffProfile c;
    c.p = sc.segment ? sc.segment->p : 0.0;
    c.eps = rd.number(n, "eps", "cutoff", c.eps);
    c.mu = rd.number(n, "mu", "cutoff", c.mu);
    c.smoothness = rd.integer(n, "smoothness", "cutoff", c.smoothness);
    if (n["norm"]) {
        const auto s = rd.text(n["norm"], "cutoff.norm");
        if (s == "euclidean")
            c.flat_norm = CutoffNorm::Euclidean;
        else if (s != "componentwise")
            rd.fail(n["norm"], "cutoff.norm", "expected componentwise or euclidean");
    }
    if (!sc.segment) return rd.violations.push_back("cutoff needs a segment (p is the segment's speed bound)");
    if (!(c.p > c.eps && c.eps > 0.0)) {
        std::ostringstream os;
        os << "cutoff requires p > eps > 0 (p = " << c.p << ", eps = " << c.eps << ")";
        rd.violations.push_back(os.str());
        return;
    }
    try {
        c.validate();
    } catch (const Error& e) {
        return rd.violations.push_back(std::string("cutoff: ") + e.what());
    }
    sc.cutoff = c;
}

void read_stages(Reader& rd, const YAML::Node& root, Scenario& sc) {
    const std::string v = "verify-segment", s = "select-p", f = "find-orbits", i = "index", l = "lemma-demo",
                      e = "escape-bound";
    if (const auto n = root[v]) {
        rd.keys(n, v, {"samples", "growth", "barrier_samples"});
        sc.verify.samples = rd.integer(n, "samples", v, sc.verify.samples);
        sc.verify.growth = rd.boolean(n, "growth", v, sc.verify.growth);
        sc.verify.barrier_samples = rd.integer(n, "barrier_samples", v, sc.verify.barrier_samples);
        if (sc.verify.samples < 100) rd.violations.push_back("verify-segment.samples must be at least 100");
    }
    if (const auto n = root[s]) {
        rd.keys(n, s, {"schedule", "samples", "t_max", "n_t0", "slab_widening", "delta"});
        if (n["schedule"]) sc.select.schedule = rd.numbers(n["schedule"], s + ".schedule");
        auto& ec = sc.select.escape;
        ec.n_samples = rd.integer(n, "samples", s, ec.n_samples);
        ec.t_max = rd.number(n, "t_max", s, ec.t_max);
        ec.n_t0 = rd.integer(n, "n_t0", s, ec.n_t0);
        ec.slab_widening = rd.number(n, "slab_widening", s, ec.slab_widening);
        ec.delta = rd.number(n, "delta", s, ec.delta);
        if (ec.n_samples < 1 || ec.n_t0 < 1 || !(ec.t_max > 0.0))
            rd.violations.push_back("select-p: samples, n_t0 and t_max must be positive");
        if (!std::is_sorted(sc.select.schedule.begin(), sc.select.schedule.end()) ||
            std::adjacent_find(sc.select.schedule.begin(), sc.select.schedule.end()) != sc.select.schedule.end())
            rd.violations.push_back("select-p.schedule must be strictly increasing");
    }
    if (const auto n = root[f]) {
        rd.keys(n, f,
                {"grid", "speed_fraction", "starts", "min_orbits", "expect_orbits", "tol", "max_iters", "segments",
                 "fd_step", "n_checks", "dedup", "recheck_tol"});
        auto& m = sc.find.search;
        if (n["grid"]) {
            m.grid.clear();
            for (double x : rd.numbers(n["grid"], f + ".grid")) m.grid.push_back(static_cast<int>(x));
        }
        m.speed_fraction = rd.number(n, "speed_fraction", f, m.speed_fraction);
        if (const auto st = n["starts"]) {
            if (!st.IsSequence()) rd.fail(st, f + ".starts", "expected a list of states");
            for (std::size_t k = 0; k < st.size(); ++k) {
                const Vec y = rd.vec(st[k], f + ".starts[" + std::to_string(k) + "]");
                if (y.size() != 2 * sc.system.dim) {
                    rd.violations.push_back(f + ".starts entries need " + std::to_string(2 * sc.system.dim) +
                                            " numbers (q then qd)");
                    break;
                }
                m.extra_starts.push_back(State::unstack(y));
            }
        }
        sc.find.min_orbits = rd.integer(n, "min_orbits", f, sc.find.min_orbits);
        if (n["expect_orbits"]) sc.find.expect_orbits = rd.integer(n, "expect_orbits", f, 0);
        m.shoot.tol_residual = rd.number(n, "tol", f, m.shoot.tol_residual);
        m.shoot.max_iters = rd.integer(n, "max_iters", f, m.shoot.max_iters);
        m.shoot.segments = rd.integer(n, "segments", f, m.shoot.segments);
        m.shoot.fd_step = rd.number(n, "fd_step", f, m.shoot.fd_step);
        m.n_checks = rd.integer(n, "n_checks", f, m.n_checks);
        m.dedup = rd.number(n, "dedup", f, m.dedup);
        sc.find.recheck_tol = rd.number(n, "recheck_tol", f, sc.find.recheck_tol);
        if (std::any_of(m.grid.begin(), m.grid.end(), [](int c) { return c < 1; }))
            rd.violations.push_back("find-orbits.grid counts must be positive");
        if (!m.grid.empty() && m.grid.size() != 1 && static_cast<int>(m.grid.size()) != 2 * sc.system.dim)
            rd.violations.push_back("find-orbits.grid needs 1 or " + std::to_string(2 * sc.system.dim) + " counts");
        if (!(m.speed_fraction > 0.0 && m.speed_fraction <= 1.0))
            rd.violations.push_back("find-orbits.speed_fraction must lie in (0, 1]");
    }
    if (const auto n = root[i]) {
        rd.keys(n, i, {"collar", "points", "tol"});
        sc.index.collar = rd.number(n, "collar", i, sc.index.collar);
        sc.index.points = rd.integer(n, "points", i, sc.index.points);
        sc.index.tol = rd.number(n, "tol", i, sc.index.tol);
    }
    if (const auto n = root[l]) {
        rd.keys(n, l, {"q0", "qd0", "t_geo", "lambdas", "expected", "tol", "decreasing", "n_dense"});
        const int dim = sc.system.dim;
        auto& lm = sc.lemma;
        lm.q0 = n["q0"] ? rd.vec(n["q0"], l + ".q0") : Vec(Vec::Zero(dim));
        lm.qd0 = n["qd0"] ? rd.vec(n["qd0"], l + ".qd0") : Vec(Vec::Zero(dim));
        if (lm.q0.size() != dim || lm.qd0.size() != dim)
            rd.violations.push_back("lemma-demo.q0 and qd0 need " + std::to_string(dim) + " entries");
        lm.t_geo = rd.number(n, "t_geo", l, lm.t_geo);
        if (n["lambdas"]) lm.lambdas = rd.numbers(n["lambdas"], l + ".lambdas");
        if (lm.lambdas.empty()) rd.violations.push_back("lemma-demo.lambdas must not be empty");
        if (n["expected"]) lm.expected = rd.expr(n["expected"], l + ".expected", {"lambda"});
        lm.tol = rd.number(n, "tol", l, lm.tol);
        lm.decreasing = rd.boolean(n, "decreasing", l, lm.decreasing);
        lm.n_dense = rd.integer(n, "n_dense", l, lm.n_dense);
    }
    if (const auto n = root[e]) {
        rd.keys(n, e, {"delta", "points", "directions", "tau_max"});
        auto& eb = sc.escape_bound;
        eb.delta = rd.number(n, "delta", e, eb.delta);
        eb.points = rd.integer(n, "points", e, eb.points);
        eb.directions = rd.integer(n, "directions", e, eb.directions);
        eb.tau_max = rd.maybe_number(n, "tau_max", e);
    }
}

void check_pipeline(Reader& rd, Scenario& sc, bool declared_segment) {
    const auto& known = stage_names();
    for (const auto& st : sc.pipeline) {
        if (std::find(known.begin(), known.end(), st) == known.end()) {
            rd.violations.push_back("unknown stage '" + st + "'; stages: " + join(known));
            continue;
        }
        auto need = [&](bool ok, const std::string& what) {
            if (!ok) rd.violations.push_back("stage '" + st + "' requires " + what);
        };
        // A declared segment that failed validation is already reported.
        if (declared_segment && !sc.segment) continue;
        if (st == "verify-segment" || st == "find-orbits") need(sc.segment.has_value(), "a segment");
        if (st == "select-p") {
            need(sc.segment.has_value(), "a segment");
            need(sc.cutoff.has_value(), "a cutoff section");
        }
        if (st == "index")
            need(sc.segment && sc.segment->kind == SegmentKind::Box && sc.segment->dim == 1,
                 "a one-degree-of-freedom box segment");
        if (st == "lemma-demo") need(sc.system.metric.has_value() && sc.system.force != nullptr, "a metric system");
        if (st == "escape-bound")
            need(sc.segment && sc.segment->kind == SegmentKind::MetricBall, "a polar_cap or ball segment");
    }
}

}  // namespace

Scenario parse_scenario(const std::string& path, bool strict) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw Error(ErrorKind::ParseError, path + ": cannot open file");
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorKind::ParseError, path + ":" + std::to_string(e.mark.line + 1) + ":" +
                                               std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    Scenario sc;
    sc.path = path;
    Reader rd(path, strict, sc.warnings);
    if (!root.IsMap()) throw Error(ErrorKind::ParseError, path + ": expected a mapping at the top level");
    std::set<std::string> top{"schema_version", "name", "seed", "output_dir", "system", "segment", "cutoff",
                              "pipeline"};
    for (const auto& st : stage_names()) top.insert(st);
    rd.keys(root, "", top);

    try {
        if (!root["schema_version"]) {
            rd.violations.push_back("schema_version is required (current: " + std::to_string(kSchemaVersion) + ")");
        } else if (rd.integer(root, "schema_version", "", 0) != kSchemaVersion) {
            rd.violations.push_back("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
        }
        sc.name = root["name"] ? rd.text(root["name"], "name") : std::string("scenario");
        if (root["seed"]) {
            const double s = rd.number(root["seed"], "seed");
            if (s < 0 || s != std::floor(s)) rd.fail(root["seed"], "seed", "expected a non-negative integer");
            sc.seed = static_cast<std::uint64_t>(s);
        }
        sc.output_dir = root["output_dir"] ? rd.text(root["output_dir"], "output_dir") : "out/" + sc.name;

        Built b;
        try {
            read_system(rd, root["system"], sc, b);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ParseError) throw;
            rd.violations.push_back(std::string("system: ") + e.what());
        }
        read_segment(rd, root["segment"], sc, b);
        read_cutoff(rd, root["cutoff"], sc);

        if (const auto p = root["pipeline"]) {
            if (!p.IsSequence()) rd.fail(p, "pipeline", "expected a list of stage names");
            for (const auto& x : p) sc.pipeline.push_back(rd.text(x, "pipeline"));
        }
        if (sc.pipeline.empty()) rd.violations.push_back("pipeline must list at least one stage");
        read_stages(rd, root, sc);
        check_pipeline(rd, sc, static_cast<bool>(root["segment"]));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::ParseError, path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }

    if (!rd.violations.empty()) {
        std::string msg = path + ": " + std::to_string(rd.violations.size()) + " violation(s):";
        for (const auto& v : rd.violations) msg += "\n  - " + v;
        throw Error(ErrorKind::ValidationError, msg);
    }
    return sc;
}

}  // namespace forced_osc
