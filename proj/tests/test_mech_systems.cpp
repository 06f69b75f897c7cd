#include "forced_osc/errors.hpp"
#include "forced_osc/gallery.hpp"
#include "forced_osc/ode.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace forced_osc;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

double accel1(const SystemSpec& s, double t, double q, double qd) { return s.accel(t, v1(q), v1(qd))[0]; }

// Arclength of the ellipse (a cos u, b sin u) from 0 to u by composite Simpson.
double ellipse_arclength(double a, double b, double u, int n = 200000) {
    auto sp = [&](double x) { return std::hypot(a * std::sin(x), b * std::cos(x)); };
    const double h = u / n;
    double acc = sp(0.0) + sp(u);
    for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * sp(h * k);
    return acc * h / 3.0;
}

// Parameter u with arclength s, by bisection on the Simpson oracle.
double ellipse_parameter(double a, double b, double s) {
    double lo = 0.0, hi = kTwoPi;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ellipse_arclength(a, b, mid, 20000) < s ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

RotationLaw sine_law(double amp) {
    return {[amp](double t) { return amp * std::sin(t); }, [amp](double t) { return amp * std::cos(t); },
            [amp](double t) { return -amp * std::sin(t); }};
}

RotationLaw constant_law(double phi) {
    return {[phi](double) { return phi; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

ChainSpec default_chain() {
    ChainSpec c;
    c.n = 3;
    c.F = [](double t, double x) { return 0.2 * (1.0 + 0.5 * std::sin(t)) * (-std::sin(kPi * x)); };
    c.F_bound = 0.3;
    return c;
}

}  // namespace

TEST_CASE("pendulum field values") {
    const auto p0 = pendulum_system([](double, double, double) { return 0.0; }, kTwoPi, 0.0);
    const auto p1 = pendulum_system([](double, double, double) { return 1.0; }, kTwoPi, 1.0);
    CHECK(std::abs(accel1(p0, 0.3, kPi / 2, 2.0)) < 1e-15);
    CHECK(accel1(p0, 0.3, 0.0, -1.0) == -1.0);
    CHECK(accel1(p1, 1.1, kPi / 2, 0.0) == doctest::Approx(1.0));
    CHECK(p1.growth->a == 2.0);
    CHECK(p1.growth->b == 0.0);
}

TEST_CASE("pendulum without a force bound is rejected") {
    try {
        (void)pendulum_system([](double, double, double) { return 0.0; }, kTwoPi, std::nullopt);
        FAIL("expected UnboundedForce");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnboundedForce);
    }
}

TEST_CASE("curve pendulum on the unit circle recovers the pendulum") {
    const auto c = circle_curve(0.0, 0.0, 1.0);
    const auto s = curve_pendulum_system(c, [](double) { return 0.0; }, kTwoPi);
    for (double q = 0.0; q < kTwoPi; q += 0.37) CHECK(accel1(s, 0.0, q, 0.0) == doctest::Approx(-std::cos(q)));
    CHECK(std::abs(accel1(s, 0.0, kPi / 2, 0.0)) < 1e-15);  // apex: η′ = 0
}

TEST_CASE("ellipse reparametrization agrees with an independent arclength oracle") {
    const double a = 2.0, b = 1.0;
    const auto e = ellipse_curve(a, b);
    CHECK(e.length() == doctest::Approx(ellipse_arclength(a, b, kTwoPi)).epsilon(1e-12));
    CHECK(e.speed_defect(2000) < 1e-8);
    const auto sys = curve_pendulum_system(e, [](double) { return 0.3; }, kTwoPi);
    for (double s : {0.0, 0.7, 2.1, 4.4, 8.9}) {
        const double u = ellipse_parameter(a, b, s);
        const double sp = std::hypot(a * std::sin(u), b * std::cos(u));
        const double dxi = -a * std::sin(u) / sp, deta = b * std::cos(u) / sp;
        CHECK(accel1(sys, 0.0, s, 0.0) == doctest::Approx(0.3 * dxi - deta).epsilon(1e-8));
        const auto p = e.at(s);
        CHECK(std::abs(p.xi - a * std::cos(u)) < 1e-8);
        CHECK(std::abs(p.eta - b * std::sin(u)) < 1e-8);
    }
}

TEST_CASE("ellipse curvature matches the closed form") {
    const double a = 2.0, b = 1.0;
    const auto e = ellipse_curve(a, b);
    for (double s : {0.3, 1.9, 5.5}) {
        const double u = ellipse_parameter(a, b, s);
        const double k = a * b / std::pow(a * a * std::sin(u) * std::sin(u) + b * b * std::cos(u) * std::cos(u), 1.5);
        CHECK(e.at(s).curvature() == doctest::Approx(k).epsilon(1e-7));
    }
}

TEST_CASE("rotating curve with no rotation keeps only gravity") {
    const auto c = circle_curve(0.0, 0.0, 1.0);
    const auto sys = rotating_curve_system(c, constant_law(0.0), kTwoPi);
    for (double s = 0.0; s < kTwoPi; s += 0.41) CHECK(accel1(sys, 0.0, s, 0.0) == doctest::Approx(-std::cos(s)));
    CHECK(accel1(sys, 0.0, 0.0, 0.0) == doctest::Approx(-1.0));  // ξ′ = 0, η′ = 1
}

TEST_CASE("rotating curve matches the Euler-Lagrange equations of T - V") {
    // Inertial position X = R(φ)(ξ, η); L = ½|Ẋ|² − X_y.  s̈ solves the
    // Euler-Lagrange equation, which is linear in s̈; every partial derivative
    // of L is taken by central differences.
    const auto c = circle_curve(0.0, 2.0, 1.0);
    const auto law = sine_law(0.1);
    auto X = [&](double s, double t) {
        const auto p = c.at(s);
        const double ph = law.phi(t);
        return Eigen::Vector2d(p.xi * std::cos(ph) - p.eta * std::sin(ph), p.xi * std::sin(ph) + p.eta * std::cos(ph));
    };
    auto lag = [&](double s, double sd, double t) {
        const double h = 1e-6;
        const Eigen::Vector2d Xs = (X(s + h, t) - X(s - h, t)) / (2 * h);
        const Eigen::Vector2d Xt = (X(s, t + h) - X(s, t - h)) / (2 * h);
        return 0.5 * (Xs * sd + Xt).squaredNorm() - X(s, t).y();
    };
    const auto sys = rotating_curve_system(c, law, kTwoPi);
    for (double t : {0.0, 0.9, 2.5}) {
        for (double s : {0.0, 1.3, 4.0}) {
            const double sd = 0.7, h = 1e-3;
            const double L_s = (lag(s + h, sd, t) - lag(s - h, sd, t)) / (2 * h);
            const double L_vv = (lag(s, sd + h, t) - 2 * lag(s, sd, t) + lag(s, sd - h, t)) / (h * h);
            auto L_v = [&](double ss, double tt) { return (lag(ss, sd + h, tt) - lag(ss, sd - h, tt)) / (2 * h); };
            const double L_vs = (L_v(s + h, t) - L_v(s - h, t)) / (2 * h);
            const double L_vt = (L_v(s, t + h) - L_v(s, t - h)) / (2 * h);
            const double sdd = (L_s - L_vs * sd - L_vt) / L_vv;
            CHECK(accel1(sys, t, s, sd) == doctest::Approx(sdd).epsilon(1e-5));
        }
    }
}

TEST_CASE("vertical tangents of the unit circle") {
    const auto c = circle_curve(0.0, 0.0, 1.0);
    const auto r0 = s1_s2_of_t(c, constant_law(0.0), 0.0);
    CHECK(r0.s1 == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(r0.s2 == doctest::Approx(kTwoPi).epsilon(1e-12));
    const auto r1 = s1_s2_of_t(c, constant_law(kPi / 2), 0.0);
    CHECK(r1.s1 == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(r1.s2 == doctest::Approx(3 * kPi / 2).epsilon(1e-12));
}

TEST_CASE("vertical tangents of an ellipse match the closed-form parameter") {
    const double a = 2.0, b = 1.0, phi = 0.2;
    const auto e = ellipse_curve(a, b);
    const auto r = s1_s2_of_t(e, constant_law(phi), 0.0);
    // The rotated tangent points down when the unrotated one has angle −π/2 − φ.
    auto root_for = [&](double angle) {
        double u = std::atan2(-std::cos(angle) / a, std::sin(angle) / b);
        if (u < 0.0) u += kTwoPi;
        return ellipse_arclength(a, b, u);
    };
    const double s1 = root_for(-kPi / 2 - phi);
    double s2 = root_for(kPi / 2 - phi);
    while (s2 <= s1) s2 += e.length();
    CHECK(std::abs(r.s1 - s1) < 1e-8);
    CHECK(std::abs(r.s2 - s2) < 1e-8);
}

TEST_CASE("a non-convex curve breaks the vertical-tangent count") {
    // Limaçon with a dimple: r(u) = 1 + 0.9 cos u.
    ParametricCurve pc;
    pc.r = [](double u) { const double r = 1.0 + 0.9 * std::cos(u); return Eigen::Vector2d(r * std::cos(u), r * std::sin(u)); };
    pc.dr = [](double u) {
        const double r = 1.0 + 0.9 * std::cos(u), dr = -0.9 * std::sin(u);
        return Eigen::Vector2d(dr * std::cos(u) - r * std::sin(u), dr * std::sin(u) + r * std::cos(u));
    };
    pc.ddr = [](double u) {
        const double r = 1.0 + 0.9 * std::cos(u), dr = -0.9 * std::sin(u), ddr = -0.9 * std::cos(u);
        return Eigen::Vector2d(ddr * std::cos(u) - 2 * dr * std::sin(u) - r * std::cos(u),
                               ddr * std::sin(u) + 2 * dr * std::cos(u) - r * std::sin(u));
    };
    pc.u0 = 0.0;
    pc.u1 = kTwoPi;
    pc.closed = true;
    const auto c = natural_reparametrization(pc);
    bool threw = false;
    for (double phi = 0.0; phi < kTwoPi && !threw; phi += 0.05) {
        try {
            (void)s1_s2_of_t(c, constant_law(phi), 0.0);
        } catch (const Error& e) {
            threw = e.kind() == ErrorKind::Discontinuity;
        }
    }
    CHECK(threw);
}

TEST_CASE("rotating-curve barriers satisfy the barrier hypotheses") {
    const auto c = circle_curve(0.0, 2.0, 1.0);
    const auto law = sine_law(0.1);
    const auto b = rotating_curve_barriers(c, law);
    const auto sys = rotating_curve_system(c, law, kTwoPi);
    const auto rep = check_barrier_conditions(sys, {b}, 200);
    CHECK(rep.holds);
    CHECK(rep.worst_lower > 0.5);
    CHECK(rep.worst_upper > 0.5);
    // ṡ = −φ̇/κ against a central difference of the root itself.
    for (double t : {0.3, 2.0}) {
        const double h = 1e-5;
        CHECK(b.upper.dx(t) == doctest::Approx((b.upper.x(t + h) - b.upper.x(t - h)) / (2 * h)).epsilon(1e-7));
        CHECK(b.lower.dx(t) == doctest::Approx((b.lower.x(t + h) - b.lower.x(t - h)) / (2 * h)).epsilon(1e-7));
    }
    // On the circle the roots are explicit: s1 = π − φ, s2 − L = −φ.
    CHECK(b.upper.x(1.0) == doctest::Approx(kPi - 0.1 * std::sin(1.0)).epsilon(1e-12));
    CHECK(b.lower.x(1.0) == doctest::Approx(-0.1 * std::sin(1.0)).epsilon(1e-12));
    CHECK(b.upper.ddx(1.0) == doctest::Approx(0.1 * std::sin(1.0)).epsilon(1e-6));
}

TEST_CASE("Morse potential closed-form values") {
    CHECK(morse_dV(1.0) == 0.0);
    CHECK(morse_V(1.0) == 0.0);
    CHECK(morse_ddV(1.0) == doctest::Approx(1.0));
    CHECK(morse_dV(2.0) == doctest::Approx(0.2325442).epsilon(1e-7));
    CHECK(morse_dV(1.0 + std::log(2.0)) == doctest::Approx(0.25));
    for (double u = 0.9; u < 5.0; u += 0.01) CHECK(morse_dV(u) <= 0.25 + 1e-15);
}

TEST_CASE("Morse chain at equal spacing is in equilibrium") {
    ChainSpec c = default_chain();
    c.F = [](double, double) { return 0.0; };
    const auto s = morse_chain_system(c, kTwoPi);
    Vec x(3);
    x << 2.0, 4.0, 6.0;
    CHECK(s.accel(0.7, x, Vec::Zero(3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Morse chain force is minus the gradient of the total potential plus F") {
    const auto c = default_chain();
    const auto s = morse_chain_system(c, kTwoPi);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> jitter(-0.6, 0.6);
    for (int k = 0; k < 50; ++k) {
        Vec x(3);
        x << 2.0 + jitter(rng), 4.0 + jitter(rng), 6.0 + jitter(rng);
        const double t = 3.0 * (jitter(rng) + 0.6);
        const Vec a = s.accel(t, x, Vec::Zero(3));
        for (int i = 0; i < 3; ++i) {
            const double h = 1e-5;
            Vec xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double grad = (chain_potential(c, xp) - chain_potential(c, xm)) / (2 * h);
            CHECK(std::abs(a[i] - (-grad + c.F(t, x[i]))) < 1e-8);
        }
    }
}

TEST_CASE("Morse chain sign conditions at the default barriers") {
    const auto c = default_chain();
    std::vector<BarrierPair> b;
    for (int i = 1; i <= 3; ++i) b.push_back(BarrierPair::constant(2.0 * i - 0.5, 2.0 * i + 0.5));
    const auto rep = chain_sign_conditions(c, b, kTwoPi, 200);
    CHECK(rep.holds);
    CHECK(rep.worst_margin == doctest::Approx(0.1).epsilon(1e-2));
}

TEST_CASE("spherical pendulum field") {
    auto zero = [](double, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.0; };
    const auto s = spherical_pendulum_system(zero, zero, kTwoPi, 0.0);
    // −e_z projected on ∂/∂θ at the equator is +1.
    CHECK(s.accel(0.0, v2(kPi / 2, 0.3), v2(0.0, 0.0))[0] == doctest::Approx(1.0));
    CHECK(s.accel(0.0, v2(kPi, 0.3), v2(0.0, 0.0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.is_angular(1));
    CHECK_FALSE(s.is_angular(0));
}

TEST_CASE("spherical pendulum force is the projected ambient force") {
    auto fx = [](double t, const Eigen::Vector3d& r, const Eigen::Vector3d&) { return 0.3 * std::sin(t) + 0.1 * r.x(); };
    auto fy = [](double t, const Eigen::Vector3d&, const Eigen::Vector3d& rd) { return 0.2 * std::cos(t) - 0.1 * rd.y(); };
    const auto s = spherical_pendulum_system(fx, fy, kTwoPi, 1.0);
    // Ambient oracle: tangential acceleration equals the tangential part of
    // (−e_z + F) plus the centripetal term; its chart components follow from
    // least squares against the embedding Jacobian.
    const double th = 1.1, ph = 0.4, dth = 0.3, dph = -0.5, t = 0.8;
    const Vec a = s.accel(t, v2(th, ph), v2(dth, dph));
    const Eigen::Vector3d r = sphere_point(th, ph), rd = sphere_velocity(th, ph, dth, dph);
    const Eigen::Vector3d G(fx(t, r, rd), fy(t, r, rd), -1.0);
    const Eigen::Vector3d Gt = G - G.dot(r) * r;
    // Second derivative of the embedding along the chart curve.
    auto pos = [&](double tau) { return sphere_point(th + dth * tau + 0.5 * a[0] * tau * tau, ph + dph * tau + 0.5 * a[1] * tau * tau); };
    const double h = 1e-4;
    const Eigen::Vector3d rdd = (pos(h) - 2 * pos(0.0) + pos(-h)) / (h * h);
    const Eigen::Vector3d tangential = rdd - rdd.dot(r) * r;
    CHECK((tangential - Gt).norm() < 1e-6);
}

TEST_CASE("equatorial geodesic stays on the equator") {
    auto zero = [](double, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.0; };
    const auto s = spherical_pendulum_system(zero, zero, kTwoPi, 0.0, 0.0);
    const auto traj = integrate(s, 0.0, State(v2(kPi / 2, 0.0), v2(0.0, 1.0)), 10.0);
    for (const auto& smp : traj.samples()) CHECK(std::abs(smp.state.q[0] - kPi / 2) < 1e-12);
    CHECK(traj.final_state().q[1] == doctest::Approx(10.0));
}

TEST_CASE("leaving the polar chart raises ChartSingularity") {
    auto zero = [](double, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.0; };
    const auto s = spherical_pendulum_system(zero, zero, kTwoPi, 0.0, 0.0);
    try {
        (void)integrate(s, 0.0, State(v2(0.05, 0.0), v2(-1.0, 0.0)), 1.0);
        FAIL("expected ChartSingularity");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ChartSingularity);
    }
}

TEST_CASE("geodesics of the flat metric are straight lines") {
    const auto g = geodesic_system(flat_metric(2), 2);
    CHECK(g.accel(0.0, v2(1.0, 2.0), v2(3.0, -4.0)).norm() == 0.0);
    const auto s = propagate(g, 0.0, State(v2(0.0, 0.0), v2(1.0, 2.0)), 3.0);
    CHECK(s.q[0] == doctest::Approx(3.0));
    CHECK(s.q[1] == doctest::Approx(6.0));
}

TEST_CASE("sphere Christoffel symbols: closed form, finite differences, symmetry") {
    const auto closed = sphere_metric();
    auto fd = sphere_metric();
    fd.christoffel = nullptr;
    CHECK(christoffel(closed, v2(kPi / 4, 0.0))[0](1, 1) == doctest::Approx(-0.5));
    // Levi-Civita oracle: Γ^θ_φφ = −½ ∂_θ sin²θ, Γ^φ_θφ = ½ (sin²θ)⁻¹ ∂_θ sin²θ.
    for (double th : {0.3, 0.9, 1.5, 2.4}) {
        const Vec q = v2(th, 1.0);
        const auto a = christoffel(closed, q);
        const auto b = christoffel(fd, q);
        CHECK(a[0](1, 1) == doctest::Approx(-std::sin(th) * std::cos(th)));
        CHECK(a[1](0, 1) == doctest::Approx(std::cos(th) / std::sin(th)));
        for (int k = 0; k < 2; ++k) {
            CHECK((a[k] - b[k]).cwiseAbs().maxCoeff() < 1e-6);
            CHECK((a[k] - a[k].transpose()).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((b[k] - b[k].transpose()).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("geodesic energy is conserved") {
    auto fd = sphere_metric();
    fd.christoffel = nullptr;
    for (const auto& m : {sphere_metric(), fd}) {
        const auto g = geodesic_system(m, 2);
        IntegratorConfig cfg;
        cfg.dense_dt = 0.05;
        const auto traj = integrate(g, 0.0, State(v2(1.0, 0.0), v2(0.3, 1.2)), 10.0, cfg);
        auto energy = [&](const State& s) { return s.qd.dot(m.A(s.q) * s.qd); };
        const double e0 = energy(traj.initial_state());
        for (const auto& smp : traj.samples()) CHECK(std::abs(energy(smp.state) - e0) / e0 < 1e-7);
    }
}

TEST_CASE("indefinite metric is rejected") {
    MetricSpec m;
    m.A = [](const Vec& q) {
        Mat a = Mat::Identity(2, 2);
        a(1, 1) = q[0] - 1.0;
        return a;
    };
    CHECK_THROWS_AS(christoffel(m, v2(0.5, 0.0)), Error);
    try {
        (void)validate_metric(m, SampleBox{v2(0.0, 0.0), v2(0.5, 1.0), 1.0}, 20, 3);
        FAIL("expected SingularMetric");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingularMetric);
    }
    CHECK(validate_metric(sphere_metric(), SampleBox{v2(0.1, 0.0), v2(3.0, 6.0), 1.0}, 100, 3) < 1e-12);
}

TEST_CASE("growth checker") {
    GrowthGrid grid;
    grid.q_lo = v1(-kPi);
    grid.q_hi = v1(kPi);
    grid.qd_cap = 20.0;
    const auto p = pendulum_system([](double t, double q, double qd) { return std::sin(t + q + qd); }, kTwoPi, 1.0);
    const auto ok = growth_check(p, grid);
    CHECK(ok.holds);
    CHECK(ok.worst_margin >= 0.0);

    auto quad = flat_system("quad", 1, 1.0, [](double, const Vec&, const Vec& qd) { return v1(qd[0] * qd[0]); });
    quad.growth = GrowthBound{0.0, 1.0, 0.5};
    CHECK_FALSE(growth_check(quad, grid).holds);

    const auto chain = morse_chain_system(default_chain(), kTwoPi);
    GrowthGrid cg;
    cg.q_lo = Vec(3);
    cg.q_hi = Vec(3);
    cg.q_lo << 1.5, 3.5, 5.5;
    cg.q_hi << 2.5, 4.5, 6.5;
    cg.n_q = 5;
    cg.n_qd = 3;
    cg.n_t = 8;
    CHECK(growth_check(chain, cg).holds);
}

TEST_CASE("every gallery system is T-periodic") {
    const double T = kTwoPi;
    std::vector<std::pair<SystemSpec, SampleBox>> systems;
    systems.push_back({pendulum_system([](double t, double, double) { return 0.5 * std::sin(t); }, T, 0.5),
                       SampleBox{v1(0.0), v1(kPi), 5.0}});
    systems.push_back({curve_pendulum_system(ellipse_curve(2, 1), [](double t) { return std::cos(t); }, T, 1.0),
                       SampleBox{v1(0.0), v1(9.0), 5.0}});
    systems.push_back({rotating_curve_system(circle_curve(0, 2, 1), sine_law(0.1), T), SampleBox{v1(0.0), v1(6.0), 5.0}});
    Vec lo(3), hi(3);
    lo << 1.5, 3.5, 5.5;
    hi << 2.5, 4.5, 6.5;
    systems.push_back({morse_chain_system(default_chain(), T), SampleBox{lo, hi, 2.0}});
    auto fx = [](double t, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.2 * std::sin(t); };
    auto fy = [](double t, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.2 * std::cos(t); };
    systems.push_back({spherical_pendulum_system(fx, fy, T, 0.3), SampleBox{v2(0.1, -3.0), v2(1.4, 3.0), 2.0}});
    for (const auto& [sys, box] : systems) {
        CAPTURE(sys.name);
        CHECK(periodicity_defect(sys, box, 100, 11) < 1e-12);
    }
}
