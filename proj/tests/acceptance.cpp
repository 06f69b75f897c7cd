// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.  Tolerances are pinned below; scenarios are the shipped
// files, so the checks exercise exactly what the CLI runs.

#include "forced_osc/cutoff.hpp"
#include "forced_osc/errors.hpp"
#include "forced_osc/gallery.hpp"
#include "forced_osc/orbit.hpp"
#include "forced_osc/scenario.hpp"
#include "forced_osc/segment.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace forced_osc;

namespace {

constexpr double kResidualTol = 1e-9;
constexpr double kConfineMargin = 0.01;
constexpr double kRecheckTol = 1e-12;
constexpr double kRecheckMismatch = 1e-8;
constexpr double kOrbitLocation = 1e-6;
constexpr double kFloquetRel = 0.01;
constexpr double kLemmaTol = 1e-6;
constexpr int kDominanceSamples = 10000;
constexpr double kSphereTau = kPi + 0.1;
constexpr double kSmoothJump = 0.05;
constexpr double kChainMargin = 0.05;

const std::string kDir = FORCED_OSC_SCENARIO_DIR;

Scenario load(const std::string& name) { return parse_scenario(kDir + "/" + name + ".scn", true); }

struct Check {
    bool ok = true;
    std::ostringstream note;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            note << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const char* title, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.note << " [exception: " << e.what() << "]";
    }
    if (!c.ok) ++failures;
    std::printf("%s [%d] %s:%s\n", c.ok ? "PASS" : "FAIL", id, title, c.note.str().c_str());
    std::fflush(stdout);
}

double recheck_mismatch(const SystemSpec& sys, const State& s0) {
    IntegratorConfig cfg;
    cfg.rel_tol = cfg.abs_tol = kRecheckTol;
    const State end = propagate(sys, 0.0, s0, sys.period, cfg);
    return wrapped_difference(sys, s0.stacked(), end.stacked()).lpNorm<Eigen::Infinity>();
}

int stopped_winding(const Scenario& sc, double collar, int points) {
    const auto& seg = *sc.segment;
    const auto& b = seg.barriers[0];
    IntegratorConfig cfg;
    cfg.rel_tol = cfg.abs_tol = 1e-10;
    const auto contour = rectangle_contour(b.lower.x(0.0) + collar, b.upper.x(0.0) - collar, seg.p - collar);
    return winding_index(sc.face_system(), contour, points, cfg, 200000, &seg).index;
}

void forced_pendulum(Check& c) {
    auto sc = load("pendulum_forced");
    auto& seg = *sc.segment;
    const auto faces = check_exit_faces(sc.face_system(), seg, 2000, sc.seed);
    bool strict = faces.unresolved == 0;
    for (const auto& f : faces.faces)
        if (f.expected == FaceClass::Exit) strict = strict && f.verified && f.margin > 0.0;
    c.require(faces.all_verified && strict, "exit faces strict");
    const auto idx = euler_characteristics(seg);
    c.require(idx.chi_W == 1 && idx.chi_exit == 2 && idx.index == -1, "index 1 - 2 = -1");
    c.note << " index " << idx.chi_W << " - " << idx.chi_exit << " = " << idx.index << ", exit margin "
           << faces.exit_margin;

    const auto res = multistart_search(sc.system, seg, sc.find.search);
    int good = 0;
    for (const auto& o : res.orbits) {
        const auto& cf = *o.confinement;
        const double q_margin = std::min(cf.lower, cf.upper);
        const double mismatch = recheck_mismatch(sc.system, o.s0);
        if (o.residual_norm < kResidualTol && cf.confined && q_margin > kConfineMargin &&
            mismatch < kRecheckMismatch) {
            ++good;
            c.note << "; orbit q0 = " << o.s0.q[0] << " residual " << o.residual_norm << " q-margin " << q_margin
                   << " recheck " << mismatch;
        }
    }
    c.require(good >= 1, "confined orbit with residual, margin and re-integration bounds");
}

void index_cross_validation(Check& c) {
    for (const char* name : {"pendulum_free", "pendulum_forced", "pendulum_offset"}) {
        auto sc = load(name);
        (void)check_exit_faces(sc.face_system(), *sc.segment, 2000, sc.seed);
        const int euler = euler_characteristics(*sc.segment).index;
        const int w = stopped_winding(sc, 0.05, 64);
        c.note << ' ' << name << ": winding " << w << " euler " << euler << ';';
        c.require(w == euler && euler == -1, std::string(name) + " winding equals index -1");
    }
}

void autonomous_oracle(Check& c) {
    auto sc = load("pendulum_free");
    auto cfg = sc.find.search;
    cfg.grid = {50};
    const auto res = multistart_search(sc.system, *sc.segment, cfg);
    c.note << ' ' << res.starts.size() << " starts, " << res.orbits.size() << " orbit(s)";
    c.require(res.starts.size() == 2500, "50x50 grid");
    c.require(res.orbits.size() == 1, "exactly one orbit");
    if (res.orbits.size() != 1) return;
    const auto& o = res.orbits.front();
    c.require(std::abs(o.s0.q[0] - kPi / 2) < kOrbitLocation && std::abs(o.s0.qd[0]) < kOrbitLocation,
              "orbit at (pi/2, 0)");
    const auto& m = o.floquet->multipliers;
    const double up = std::exp(kTwoPi), down = std::exp(-kTwoPi);
    const double e_up = std::abs(m[0] - up) / up, e_down = std::abs(m[1] - down) / down;
    c.note << " at (" << o.s0.q[0] << ", " << o.s0.qd[0] << "), multipliers " << m[0].real() << ", "
           << m[1].real() << " (rel. errors " << e_up << ", " << e_down << ")";
    c.require(e_up < kFloquetRel && e_down < kFloquetRel, "Floquet multipliers e^(+-2pi) within 1%");
}

void lemma_demo(Check& c) {
    const auto flat = load("lemma_flat");
    const auto& lf = flat.lemma;
    const auto rows = geodesic_tracking(*flat.system.metric, flat.system.dim, flat.system.force, lf.q0, lf.qd0,
                                        lf.t_geo, {1, 2, 4, 8, 16});
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.deviation - 1.0 / (2.0 * r.lambda * r.lambda)));
    c.note << " flat worst |dev - 1/(2 lambda^2)| = " << worst;
    c.require(rows.size() == 5 && worst < kLemmaTol, "flat closed form");

    const auto sphere = load("lemma_sphere");
    const auto& ls = sphere.lemma;
    const auto srows = geodesic_tracking(*sphere.system.metric, 2, sphere.system.force, ls.q0, ls.qd0, ls.t_geo,
                                         ls.lambdas);
    bool decreasing = srows.size() >= 2;
    for (std::size_t k = 1; k < srows.size(); ++k) decreasing = decreasing && srows[k].deviation < srows[k - 1].deviation;
    c.note << "; sphere deviations " << srows.front().deviation << " -> " << srows.back().deviation;
    c.require(decreasing, "sphere deviations strictly decrease");
}

void cutoff_suite(Check& c) {
    // Exact values and monotonicity for both smoothness degrees.
    for (int deg : {3, 5}) {
        const CutoffProfile pr{10.0, 2.0, 0.1, deg};
        const std::pair<double, double> exact[] = {{0, 1}, {8, 1},  {8.5, 0.5}, {9, 0},    {10, 0},
                                                   {11, 0}, {11.5, 0.5}, {12, 1}, {100, 1}};
        for (const auto& [x, v] : exact) c.require(std::abs(chi(pr, x) - v) < 1e-15, "chi exact value");
        double prev = chi(pr, 8.0);
        for (int k = 1; k <= 1000; ++k) {
            const double x = 8.0 + k * 1e-3, y = chi(pr, x);
            c.require(y <= prev, "chi nonincreasing on [p - eps, p - eps/2]");
            prev = y;
        }
        prev = chi(pr, 11.0);
        for (int k = 1; k <= 1000; ++k) {
            const double x = 11.0 + k * 1e-3, y = chi(pr, x);
            c.require(y >= prev, "chi nondecreasing on [p + eps/2, p + eps]");
            prev = y;
        }
    }

    // Dominance: the field part of the modified system is chi v with 0 <= chi <= 1.
    {
        const auto sc = load("pendulum_forced");
        const auto mod = modified_system(sc.system, *sc.cutoff);
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double p = sc.cutoff->p, eps = sc.cutoff->eps, mu = sc.cutoff->mu;
        double worst = -INFINITY;
        for (int k = 0; k < kDominanceSamples; ++k) {
            const double t = kTwoPi * u(rng), q = kPi * u(rng);
            const double qd = (u(rng) < 0.5 ? -1 : 1) * (p - 1.5 * eps + 3.0 * eps * u(rng));
            const State s = state1(q, qd);
            const double v = sc.system.acceleration(t, s)[0];
            const double x = chi(*sc.cutoff, std::abs(qd));
            const double field_part = mod.acceleration(t, s)[0] + mu * qd * (1.0 - x);
            worst = std::max(worst, std::abs(field_part) - std::abs(v));
        }
        c.note << " dominance worst |chi v| - |v| = " << worst << ';';
        c.require(worst <= 1e-12, "dominance |chi v| <= |v|");
    }

    // Escape experiment at the shipped (p, eps) of every scenario with a cutoff.
    for (const char* name :
         {"pendulum_forced", "pendulum_free", "pendulum_offset", "rotating_curve", "morse_chain", "spherical_pendulum"}) {
        const auto sc = load(name);
        auto ec = sc.select.escape;
        ec.seed = sc.seed;
        const auto r = escape_experiment(sc.system, *sc.segment, *sc.cutoff, ec);
        c.note << ' ' << name << " p=" << sc.cutoff->p << ": " << r.escaped << "+" << r.chart_excluded << "/"
               << r.tested << ';';
        c.require(r.passed(), std::string("escape ") + name);
    }

    // Upward closure of the select_p pass set.
    {
        const auto sc = load("pendulum_forced");
        auto ec = sc.select.escape;
        ec.seed = sc.seed;
        const auto r = select_p(sc.system, *sc.segment, sc.cutoff->eps, sc.cutoff->mu, sc.select.schedule, ec);
        bool closed = true, seen = false;
        for (const auto& row : r.table) {
            if (seen && !row.passed) closed = false;
            seen = seen || row.passed;
        }
        c.note << " select_p -> " << r.p;
        c.require(closed && r.upward_closed, "select_p pass set upward closed");
    }
}

void spherical(Check& c) {
    const auto sc = load("spherical_pendulum");
    const auto& seg = *sc.segment;
    const auto eb = escape_time_bound(*seg.metric, 2, *seg.region, sc.escape_bound.delta, sc.escape_bound.points,
                                      sc.escape_bound.directions, sc.seed);
    c.note << " tau = " << eb.tau;
    c.require(eb.tau <= kSphereTau, "tau <= pi + 0.1");
    const double cap = 0.1;
    const auto res = multistart_search(sc.system, seg, sc.find.search);
    bool found = false;
    for (const auto& o : res.orbits) {
        double min_cos = INFINITY;
        for (const auto& s : o.trajectory.samples()) min_cos = std::min(min_cos, std::cos(s.state.q[0]));
        c.note << "; orbit theta0 = " << o.s0.q[0] << " residual " << o.residual_norm << " min cos(theta) "
               << min_cos << " over " << o.trajectory.samples().size() << " samples";
        found = found || (o.residual_norm < kResidualTol && min_cos > cap);
    }
    c.require(found, "periodic orbit with cos(theta) > eps at all dense samples");
}

void rotating_curve(Check& c) {
    const auto sc = load("rotating_curve");
    const auto& bar = sc.barriers.at(0);
    double jump = 0.0;
    for (int k = 1; k <= 256; ++k) {
        const double t0 = kTwoPi * (k - 1) / 256, t1 = kTwoPi * k / 256;
        jump = std::max({jump, std::abs(bar.upper.x(t1) - bar.upper.x(t0)), std::abs(bar.lower.x(t1) - bar.lower.x(t0))});
    }
    c.note << " max s1/s2 jump " << jump;
    c.require(jump < kSmoothJump, "s1, s2 smooth");
    const auto bc = check_barrier_conditions(sc.system, sc.barriers, 256, sc.segment->p);
    c.note << "; barrier margins " << bc.worst_lower << ", " << bc.worst_upper;
    c.require(bc.holds, "barrier conditions");
    const auto res = multistart_search(sc.system, *sc.segment, sc.find.search);
    int confined = 0;
    for (const auto& o : res.orbits) confined += o.confinement->confined && o.residual_norm < kResidualTol;
    c.note << "; confined orbits " << confined;
    c.require(confined == 1, "one confined orbit");
}

void morse_chain(Check& c) {
    const auto sc = load("morse_chain");
    const auto sign = chain_sign_conditions(*sc.chain, sc.barriers, sc.system.period, 256);
    bool barriers_ok = sc.barriers.size() == 3;
    for (int i = 0; i < 3 && barriers_ok; ++i)
        barriers_ok = sc.barriers[i].lower.x(0.0) == 2.0 * (i + 1) - 0.5 && sc.barriers[i].upper.x(0.0) == 2.0 * (i + 1) + 0.5;
    c.require(barriers_ok, "barriers [2i - 1/2, 2i + 1/2]");
    c.note << " sign-condition margin " << sign.worst_margin;
    c.require(sign.holds, "sign conditions");
    const auto res = multistart_search(sc.system, *sc.segment, sc.find.search);
    int confined = 0;
    for (const auto& o : res.orbits) {
        const double m = std::min(o.confinement->lower, o.confinement->upper);
        if (o.confinement->confined && m > kChainMargin && o.residual_norm < kResidualTol) {
            ++confined;
            c.note << "; orbit (" << o.s0.q.transpose() << ") margin " << m;
        }
    }
    c.require(confined == 1, "one confined orbit with margin > 0.05");
}

void hamel(Check& c) {
    const auto sc = load("hamel");
    const auto res = multistart_search(sc.system, *sc.segment, sc.find.search);
    bool found = false;
    for (const auto& o : res.orbits) {
        const double mismatch = recheck_mismatch(sc.system, o.s0);
        c.note << " orbit (" << o.s0.q[0] << ", " << o.s0.qd[0] << ") residual " << o.residual_norm << " recheck "
               << mismatch << ';';
        found = found || (o.residual_norm < kResidualTol && mismatch < kRecheckMismatch);
    }
    c.require(std::abs(sc.system.period - kTwoPi) < 1e-15, "period 2 pi");
    c.require(found, "2 pi-periodic solution with residual < 1e-9");
}

void contradiction_policy(Check& c) {
    const auto dir = std::filesystem::temp_directory_path() / "forced_osc_contradiction";
    std::filesystem::create_directories(dir);
    const auto file = dir / "synthetic.scn";
    {
        std::ofstream f(file);
        f << "schema_version: 1\nname: synthetic\nseed: 3\n"
             "system: {gallery: pendulum, force: 0.5*sin(t), force_bound: 0.5}\n"
             "segment: {kind: pendulum, p: 20}\n"
             "pipeline: [verify-segment, find-orbits]\n"
             "find-orbits: {grid: [4], max_iters: 0, min_orbits: 0}\n";
    }
    RunOptions on;
    on.out_dir = (dir / "on").string();
    const auto tripped = run_scenario(parse_scenario(file.string(), true), on);
    bool named = false;
    for (const auto& f : tripped.failures) named = named || f.kind == "Contradiction";
    c.require(tripped.exit_code != 0 && named, "check on: hard failure");
    c.require(std::filesystem::exists(dir / "on" / "failure_grid_residuals.csv"), "residual dump written");
    RunOptions off = on;
    off.out_dir = (dir / "off").string();
    off.contradiction_check = false;
    const auto mutated = run_scenario(parse_scenario(file.string(), true), off);
    c.require(mutated.exit_code == 0, "check off: mutation passes unnoticed");
    c.note << " check on -> exit " << tripped.exit_code << ", check off -> exit " << mutated.exit_code;
}

}  // namespace

int main() {
    criterion(1, "forced pendulum segment, index and confined orbit", forced_pendulum);
    criterion(2, "index cross-validation by stopped winding", index_cross_validation);
    criterion(3, "autonomous oracle (f = 0)", autonomous_oracle);
    criterion(4, "geodesic tracking deviation", lemma_demo);
    criterion(5, "cutoff profile, dominance, escape and selection", cutoff_suite);
    criterion(6, "spherical pendulum", spherical);
    criterion(7, "rotating curve", rotating_curve);
    criterion(8, "Morse chain", morse_chain);
    criterion(9, "x'' + cos x = sin t", hamel);
    criterion(10, "contradiction policy", contradiction_policy);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
