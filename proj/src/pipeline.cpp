#include "forced_osc/errors.hpp"
#include "forced_osc/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace forced_osc {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Shortest representation that reads back to the same double.
std::string fmt(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

json num(double x) { return std::isfinite(x) ? json(x) : json(fmt(x)); }

json vec_json(const Vec& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

json state_json(const State& s) { return {{"q", vec_json(s.q)}, {"qd", vec_json(s.qd)}}; }

class Csv {
public:
    explicit Csv(const fs::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
    }
    Csv& header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
        out_ << '\n';
        return *this;
    }
    template <class... Ts>
    void row(const Ts&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string cell(double x) { return fmt(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(long x) { return std::to_string(x); }
    static std::string cell(std::size_t x) { return std::to_string(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }
    static std::string cell(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    static std::string cell(const char* s) { return cell(std::string(s)); }
    static std::string cell(const Vec& v) {
        std::string out;
        for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
        return out;
    }
    std::ofstream out_;
};

std::vector<std::string> state_columns(int dim, bool with_t) {
    std::vector<std::string> c;
    if (with_t) c.push_back("t");
    for (int i = 1; i <= dim; ++i) c.push_back("q" + std::to_string(i));
    for (int i = 1; i <= dim; ++i) c.push_back("qd" + std::to_string(i));
    return c;
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

struct Context {
    Scenario& sc;
    const RunOptions& opt;
    fs::path out;
    std::vector<FailureRecord> failures;
    std::optional<bool> faces_verified;
    std::optional<IndexReport> index;
    std::vector<std::pair<std::string, double>> tolerances;

    void fail(const std::string& stage, const std::string& kind, const std::string& message) {
        failures.push_back({stage, kind, message});
    }
    void tolerance(const std::string& key, double value) {
        for (auto& [k, v] : tolerances)
            if (k == key) return void(v = value);
        tolerances.emplace_back(key, value);
    }
};

std::string face_system_label(const Scenario& sc) {
    return sc.face_system().name == sc.system.name ? "original" : "cutoff-modified";
}

GrowthGrid growth_grid(const Scenario& sc) {
    const auto& seg = *sc.segment;
    const int n = seg.dim;
    GrowthGrid g;
    g.n_q = g.n_qd = n == 1 ? 9 : n == 2 ? 7 : 4;
    g.q_lo = Vec(n);
    g.q_hi = Vec(n);
    if (seg.kind == SegmentKind::MetricBall) {
        g.q_lo = seg.region->q_lo;
        g.q_hi = seg.region->q_hi;
        g.qd_cap = std::sqrt(2.0 * seg.p);
    } else {
        for (int j = 0; j < n; ++j) {
            double lo = INFINITY, hi = -INFINITY;
            for (int k = 0; k <= 64; ++k) {
                const double t = seg.period * k / 64.0;
                lo = std::min(lo, seg.barriers[j].lower.x(t));
                hi = std::max(hi, seg.barriers[j].upper.x(t));
            }
            g.q_lo[j] = lo;
            g.q_hi[j] = hi;
        }
        g.qd_cap = seg.p;
    }
    return g;
}

/// Exit-face verification and Euler index, shared by verify-segment and the
/// contradiction check of find-orbits.
json classify(Context& cx, bool write_files) {
    auto& sc = cx.sc;
    PeriodicSegment& seg = *sc.segment;
    const bool diagnostic = sc.chain.has_value();
    const auto rep = check_exit_faces(sc.face_system(), seg, sc.verify.samples, sc.seed, write_files && seg.dim == 1);
    json j;
    j["classified_against"] = face_system_label(sc);
    j["gating"] = !diagnostic;
    j["all_verified"] = rep.all_verified;
    j["unresolved"] = rep.unresolved;
    j["exit_margin"] = num(rep.exit_margin);
    json faces = json::array();
    for (const auto& f : rep.faces)
        faces.push_back({{"id", f.id},
                         {"expected", std::string(to_string(f.expected))},
                         {"classification", std::string(to_string(f.classification))},
                         {"verified", f.verified},
                         {"samples", f.samples},
                         {"tangent_samples", f.tangent_samples},
                         {"unresolved", f.unresolved},
                         {"margin", num(f.margin)}});
    j["faces"] = faces;
    if (write_files) {
        Csv csv(cx.out / "segment_faces.csv");
        csv.header({"face", "expected", "classification", "verified", "samples", "tangent_samples", "unresolved",
                    "margin"});
        for (const auto& f : rep.faces)
            csv.row(f.id, std::string(to_string(f.expected)), std::string(to_string(f.classification)), f.verified,
                    f.samples, f.tangent_samples, f.unresolved, f.margin);
        if (!rep.samples.empty()) {
            Csv pts(cx.out / "segment_samples.csv");
            pts.header(state_columns(seg.dim, true) + std::vector<std::string>{"face", "rate", "second", "class"});
            for (const auto& s : rep.samples)
                pts.row(s.t, s.state.q, s.state.qd, seg.faces[s.face].id, s.rate, s.second,
                        std::string(to_string(s.cls)));
        }
    }
    cx.faces_verified = rep.all_verified && !diagnostic;
    if (*cx.faces_verified) {
        cx.index = euler_characteristics(seg);
        j["index"] = {{"chi_W", cx.index->chi_W},
                      {"chi_exit", cx.index->chi_exit},
                      {"index", cx.index->index},
                      {"exit_components", cx.index->exit_components},
                      {"method", cx.index->method}};
    }
    return j;
}

bool stage_verify(Context& cx, json& j) {
    auto& sc = cx.sc;
    const auto& seg = *sc.segment;
    const std::string st = "verify-segment";
    bool ok = true;
    if (sc.verify.growth && sc.system.growth) {
        const auto g = growth_check(sc.system, growth_grid(sc));
        j["growth"] = {{"holds", g.holds},
                       {"worst_margin", num(g.worst_margin)},
                       {"samples", g.samples},
                       {"a", num(sc.system.growth->a)},
                       {"b", num(sc.system.growth->b)},
                       {"delta", num(sc.system.growth->delta)}};
        if (!g.holds) {
            ok = false;
            cx.fail(st, "GrowthBound", "growth bound violated (worst margin " + fmt(g.worst_margin) + ")");
        }
    } else {
        j["growth"] = sc.system.growth ? "skipped" : "no bound declared";
    }
    if (sc.chain) {
        const auto r = chain_sign_conditions(*sc.chain, sc.barriers, seg.period, sc.verify.barrier_samples);
        j["sign_conditions"] = {{"holds", r.holds},
                                {"worst_margin", num(r.worst_margin)},
                                {"lower_margin", r.lower_margin},
                                {"upper_margin", r.upper_margin}};
        if (!r.holds) {
            ok = false;
            cx.fail(st, "SignConditions", "field sign conditions fail at the barriers (worst margin " +
                                              fmt(r.worst_margin) + ")");
        }
    }
    if (!sc.barriers.empty()) {
        const auto r = check_barrier_conditions(sc.system, sc.barriers, sc.verify.barrier_samples, seg.p, 32, sc.seed);
        j["barrier_conditions"] = {{"holds", r.holds},
                                   {"gating", !sc.chain},
                                   {"worst_order", num(r.worst_order)},
                                   {"worst_lower", num(r.worst_lower)},
                                   {"worst_upper", num(r.worst_upper)},
                                   {"worst_periodicity", num(r.worst_periodicity)},
                                   {"violations", r.violations}};
        if (!r.holds && !sc.chain) {
            ok = false;
            cx.fail(st, "BarrierConditions", r.violations.empty() ? "barrier conditions fail" : r.violations.front());
        }
    }
    j["faces"] = classify(cx, true);
    if (!sc.chain) {
        if (!*cx.faces_verified) {
            ok = false;
            cx.fail(st, "UnverifiedFaces", "exit faces could not be verified");
        } else if (cx.index->index == 0) {
            ok = false;
            cx.fail(st, "ZeroIndex", "the segment index is 0, so no periodic orbit is forced");
        }
    }
    if (!seg.notes.empty()) j["notes"] = seg.notes;
    cx.tolerance("faces.strict_tol", kStrictTol);
    return ok;
}

bool stage_select_p(Context& cx, json& j) {
    auto& sc = cx.sc;
    const auto& seg = *sc.segment;
    const std::string st = "select-p";
    EscapeConfig ec = sc.select.escape;
    ec.seed = sc.seed;
    ec.keep_records = true;
    const auto& prof = *sc.cutoff;
    const auto er = escape_experiment(sc.system, seg, prof, ec);
    bool ok = er.passed();
    j["shipped"] = {{"p", num(prof.p)},
                    {"eps", num(prof.eps)},
                    {"mu", num(prof.mu)},
                    {"passed", er.passed()},
                    {"tested", er.tested},
                    {"escaped", er.escaped},
                    {"chart_excluded", er.chart_excluded},
                    {"max_escape_time", num(er.max_escape_time)}};
    if (er.worst_case)
        j["shipped"]["worst_case"] = {{"t0", num(er.worst_case->t0)},
                                      {"s0", state_json(er.worst_case->s0)},
                                      {"modified", er.worst_case->modified},
                                      {"escaped", er.worst_case->escaped},
                                      {"time", num(er.worst_case->time)}};
    {
        Csv csv(cx.out / "escape.csv");
        csv.header(std::vector<std::string>{"t0"} + state_columns(seg.dim, false) +
                   std::vector<std::string>{"modified", "escaped", "chart_excluded", "time"});
        for (const auto& r : er.records) csv.row(r.t0, r.s0.q, r.s0.qd, r.modified, r.escaped, r.chart_excluded, r.time);
    }
    if (!ok) cx.fail(st, "EscapeFailed", "the shipped p = " + fmt(prof.p) + " fails the escape experiment");
    if (!sc.select.schedule.empty()) {
        try {
            const auto sp = select_p(sc.system, seg, prof.eps, prof.mu, sc.select.schedule, ec);
            j["selected_p"] = num(sp.p);
            j["upward_closed"] = sp.upward_closed;
            Csv csv(cx.out / "select_p.csv");
            csv.header({"p", "passed", "tested", "escaped", "max_escape_time"});
            for (const auto& r : sp.table) csv.row(r.p, r.passed, r.tested, r.escaped, r.max_escape_time);
            if (!sp.upward_closed) {
                ok = false;
                cx.fail(st, "NotUpwardClosed", "a larger p fails after a smaller one passes");
            }
            if (sp.p > prof.p) {
                ok = false;
                cx.fail(st, "ShippedPTooSmall", "selected p = " + fmt(sp.p) + " exceeds the shipped p");
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ScheduleExhausted) throw;
            ok = false;
            cx.fail(st, std::string(to_string(e.kind())), e.what());
        }
    }
    cx.tolerance("escape.t_max", ec.t_max);
    return ok;
}

bool stage_find_orbits(Context& cx, json& j) {
    auto& sc = cx.sc;
    const auto& seg = *sc.segment;
    const std::string st = "find-orbits";
    MultistartConfig cfg = sc.find.search;
    cfg.jobs = std::max(1, cx.opt.jobs);
    cfg.eps = sc.cutoff ? sc.cutoff->eps : 0.0;
    if (cx.opt.tol) cfg.shoot.tol_residual = *cx.opt.tol;
    const auto res = multistart_search(sc.system, seg, cfg);
    IntegratorConfig recheck;
    recheck.rel_tol = recheck.abs_tol = sc.find.recheck_tol;

    const int n = sc.system.dim;
    json orbits = json::array();
    int confined = 0;
    bool ok = true;
    Csv summary(cx.out / "orbits.csv");
    summary.header(std::vector<std::string>{"orbit"} + state_columns(n, false) +
                   std::vector<std::string>{"residual", "recheck_mismatch", "margin", "confined", "band_clear",
                                            "max_multiplier_modulus"});
    for (std::size_t k = 0; k < res.orbits.size(); ++k) {
        const auto& o = res.orbits[k];
        const State end = propagate(sc.system, 0.0, o.s0, sc.system.period, recheck);
        const double mismatch = wrapped_difference(sc.system, o.s0.stacked(), end.stacked()).lpNorm<Eigen::Infinity>();
        const auto& c = *o.confinement;
        if (c.confined) ++confined;
        double max_mod = 0.0;
        json mult = json::array();
        if (o.floquet) {
            for (const auto& m : o.floquet->multipliers) {
                mult.push_back({num(m.real()), num(m.imag())});
                max_mod = std::max(max_mod, std::abs(m));
            }
        }
        orbits.push_back({{"s0", state_json(o.s0)},
                          {"residual", num(o.residual_norm)},
                          {"iterations", o.iterations},
                          {"recheck_mismatch", num(mismatch)},
                          {"margin", num(c.margin)},
                          {"lower_margin", num(c.lower)},
                          {"upper_margin", num(c.upper)},
                          {"speed_margin", num(c.speed)},
                          {"band_distance", num(c.band)},
                          {"confined", c.confined},
                          {"band_clear", c.band_clear},
                          {"multipliers", mult},
                          {"orbit_csv", "orbit_" + std::to_string(k) + ".csv"}});
        summary.row(k, o.s0.q, o.s0.qd, o.residual_norm, mismatch, c.margin, c.confined, c.band_clear, max_mod);
        Csv csv(cx.out / ("orbit_" + std::to_string(k) + ".csv"));
        csv.header(state_columns(n, true));
        for (const auto& s : o.trajectory.samples()) csv.row(s.t, s.state.q, s.state.qd);
        if (!(o.residual_norm <= cfg.shoot.tol_residual)) {
            ok = false;
            cx.fail(st, "ResidualTooLarge", "orbit " + std::to_string(k) + " residual " + fmt(o.residual_norm));
        }
    }
    j["starts"] = res.starts.size();
    j["converged"] = res.converged;
    j["outside_segment"] = res.outside;
    j["confined_orbits"] = confined;
    j["orbits"] = orbits;
    if (confined < sc.find.min_orbits) {
        ok = false;
        cx.fail(st, "TooFewOrbits", "found " + std::to_string(confined) + " confined orbit(s), need at least " +
                                        std::to_string(sc.find.min_orbits));
    }
    if (sc.find.expect_orbits && confined != *sc.find.expect_orbits) {
        ok = false;
        cx.fail(st, "OrbitCount", "found " + std::to_string(confined) + " confined orbit(s), expected " +
                                      std::to_string(*sc.find.expect_orbits));
    }

    // A verified segment with nonzero index forces a confined orbit; finding
    // none means the search (or the verification) is wrong.
    if (!cx.faces_verified && !sc.chain) (void)classify(cx, false);
    const bool forced = cx.faces_verified.value_or(false) && cx.index && cx.index->index != 0;
    json policy = {{"enabled", cx.opt.contradiction_check}, {"orbit_forced", forced}};
    if (forced && confined == 0) {
        Csv csv(cx.out / "failure_grid_residuals.csv");
        csv.header(state_columns(n, false) + std::vector<std::string>{"converged", "residual", "failure"});
        for (const auto& s : res.starts) csv.row(s.start.q, s.start.qd, s.converged, s.residual, s.failure);
        policy["tripped"] = true;
        if (cx.opt.contradiction_check) {
            ok = false;
            cx.fail(st, "Contradiction",
                    "segment verified with index " + std::to_string(cx.index->index) +
                        " but no confined orbit was found; start residuals in failure_grid_residuals.csv");
        }
    } else {
        policy["tripped"] = false;
    }
    j["contradiction_policy"] = policy;
    cx.tolerance("shoot.tol_residual", cfg.shoot.tol_residual);
    cx.tolerance("shoot.fd_step", cfg.shoot.fd_step);
    cx.tolerance("shoot.integrator_tol", cfg.shoot.integrator.rel_tol);
    cx.tolerance("shoot.dedup", cfg.dedup);
    cx.tolerance("shoot.recheck_tol", sc.find.recheck_tol);
    return ok;
}

bool stage_index(Context& cx, json& j) {
    auto& sc = cx.sc;
    const auto& seg = *sc.segment;
    const std::string st = "index";
    if (!cx.faces_verified) (void)classify(cx, false);
    if (!cx.index) {
        cx.fail(st, "UnverifiedFaces", "the segment index needs verified exit faces");
        return false;
    }
    const double c = sc.index.collar;
    const auto& b = seg.barriers[0];
    IntegratorConfig icfg;
    icfg.rel_tol = icfg.abs_tol = sc.index.tol;
    const auto contour = rectangle_contour(b.lower.x(0.0) + c, b.upper.x(0.0) - c, seg.p - c);
    const auto w = winding_index(sc.face_system(), contour, sc.index.points, icfg, 200000, &seg);
    j["winding"] = {{"index", w.index},
                    {"total_angle", num(w.total_angle)},
                    {"evaluations", w.evaluations},
                    {"min_norm", num(w.min_norm)},
                    {"collar", num(c)},
                    {"map", "stopped period map"}};
    j["euler_index"] = cx.index->index;
    j["agree"] = w.index == cx.index->index;
    cx.tolerance("index.integrator_tol", sc.index.tol);
    if (w.index != cx.index->index) {
        cx.fail(st, "IndexMismatch", "winding index " + std::to_string(w.index) + " differs from the Euler index " +
                                         std::to_string(cx.index->index));
        return false;
    }
    return true;
}

bool stage_lemma(Context& cx, json& j) {
    auto& sc = cx.sc;
    const auto& lm = sc.lemma;
    const auto rows = geodesic_tracking(*sc.system.metric, sc.system.dim, sc.system.force, lm.q0, lm.qd0, lm.t_geo,
                                        lm.lambdas, lm.n_dense);
    bool ok = true;
    json table = json::array();
    Csv csv(cx.out / "lemma_deviation.csv");
    csv.header({"lambda", "deviation", "expected"});
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const double expected = lm.expected ? lm.expected->eval({r.lambda}) : NAN;
        csv.row(r.lambda, r.deviation, expected);
        table.push_back({{"lambda", num(r.lambda)}, {"deviation", num(r.deviation)}, {"expected", num(expected)}});
        if (lm.expected && !(std::abs(r.deviation - expected) <= lm.tol)) {
            ok = false;
            cx.fail("lemma-demo", "DeviationMismatch",
                    "lambda = " + fmt(r.lambda) + ": deviation " + fmt(r.deviation) + ", expected " + fmt(expected));
        }
        if (lm.decreasing && k > 0 && !(r.deviation < rows[k - 1].deviation)) {
            ok = false;
            cx.fail("lemma-demo", "NotDecreasing", "deviation does not decrease at lambda = " + fmt(r.lambda));
        }
    }
    j["rows"] = table;
    if (lm.expected) j["expected"] = lm.expected->str();
    cx.tolerance("lemma.tol", lm.tol);
    return ok;
}

bool stage_escape_bound(Context& cx, json& j) {
    auto& sc = cx.sc;
    const auto& seg = *sc.segment;
    const auto& eb = sc.escape_bound;
    const auto r = escape_time_bound(*seg.metric, seg.dim, *seg.region, eb.delta, eb.points, eb.directions, sc.seed);
    j["tau"] = num(r.tau);
    j["samples"] = r.samples;
    j["chart_excluded"] = r.chart_excluded;
    j["worst"] = state_json(State(r.worst_q, r.worst_qd));
    if (eb.tau_max) {
        j["tau_max"] = num(*eb.tau_max);
        if (!(r.tau <= *eb.tau_max)) {
            cx.fail("escape-bound", "EscapeTimeTooLong", "tau = " + fmt(r.tau) + " exceeds " + fmt(*eb.tau_max));
            return false;
        }
    }
    return true;
}

void write_manifest(const Context& cx, const std::vector<std::string>& stages) {
    std::ofstream m(cx.out / "manifest.txt", std::ios::binary);
    m << "forced-osc " << FORCED_OSC_VERSION << '\n';
    m << "schema_version " << kSchemaVersion << '\n';
    m << "eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
    m << "nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.'
      << NLOHMANN_JSON_VERSION_PATCH << '\n';
    m << "scenario " << cx.sc.name << '\n';
    m << "system " << cx.sc.system.name << '\n';
    m << "seed " << cx.sc.seed << '\n';
    m << "stages";
    for (const auto& s : stages) m << ' ' << s;
    m << '\n';
    for (const auto& [k, v] : cx.tolerances) m << "tolerance " << k << ' ' << fmt(v) << '\n';
}

}  // namespace

RunResult run_scenario(Scenario sc, const RunOptions& opt) {
    if (opt.seed) sc.seed = *opt.seed;
    RunResult result;
    result.out_dir = opt.out_dir ? *opt.out_dir : sc.output_dir;
    fs::create_directories(result.out_dir);
    Context cx{sc, opt, fs::path(result.out_dir), {}, {}, {}, {}};

    std::vector<std::string> stages;
    for (const auto& s : sc.pipeline)
        if (opt.only.empty() || std::find(opt.only.begin(), opt.only.end(), s) != opt.only.end()) stages.push_back(s);

    IntegratorConfig defaults;
    cx.tolerance("integrator.rel_tol", defaults.rel_tol);
    cx.tolerance("integrator.abs_tol", defaults.abs_tol);
    if (sc.cutoff) {
        cx.tolerance("cutoff.p", sc.cutoff->p);
        cx.tolerance("cutoff.eps", sc.cutoff->eps);
        cx.tolerance("cutoff.mu", sc.cutoff->mu);
    }

    json report;
    report["schema_version"] = kSchemaVersion;
    report["scenario"] = sc.name;
    report["system"] = sc.system.name;
    report["seed"] = sc.seed;
    if (sc.segment)
        report["segment"] = {{"kind", sc.segment->kind == SegmentKind::Box ? "box" : "metric_ball"},
                             {"dim", sc.segment->dim},
                             {"p", num(sc.segment->p)},
                             {"period", num(sc.segment->period)}};
    if (sc.cutoff)
        report["cutoff"] = {{"p", num(sc.cutoff->p)},
                            {"eps", num(sc.cutoff->eps)},
                            {"mu", num(sc.cutoff->mu)},
                            {"smoothness", sc.cutoff->smoothness}};
    json stage_reports = json::array();
    for (const auto& name : stages) {
        json j;
        j["stage"] = name;
        bool ok = false;
        try {
            if (name == "verify-segment") ok = stage_verify(cx, j);
            else if (name == "select-p") ok = stage_select_p(cx, j);
            else if (name == "find-orbits") ok = stage_find_orbits(cx, j);
            else if (name == "index") ok = stage_index(cx, j);
            else if (name == "lemma-demo") ok = stage_lemma(cx, j);
            else if (name == "escape-bound") ok = stage_escape_bound(cx, j);
        } catch (const Error& e) {
            cx.fail(name, std::string(to_string(e.kind())), e.what());
        } catch (const std::exception& e) {
            cx.fail(name, "InternalError", e.what());
        }
        j["passed"] = ok;
        stage_reports.push_back(j);
    }
    report["stages"] = stage_reports;
    json failures = json::array();
    for (const auto& f : cx.failures) failures.push_back({{"stage", f.stage}, {"kind", f.kind}, {"message", f.message}});
    report["failures"] = failures;
    report["warnings"] = sc.warnings;
    report["passed"] = cx.failures.empty();
    {
        std::ofstream out(cx.out / "report.json", std::ios::binary);
        out << report.dump(2) << '\n';
    }
    write_manifest(cx, stages);
    result.failures = cx.failures;
    result.exit_code = cx.failures.empty() ? 0 : 1;
    return result;
}

}  // namespace forced_osc
