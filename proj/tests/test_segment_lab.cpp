#include "forced_osc/cutoff.hpp"
#include "forced_osc/errors.hpp"
#include "forced_osc/gallery.hpp"
#include "forced_osc/segment.hpp"

#include <doctest.h>

#include <cmath>

using namespace forced_osc;

namespace {

SystemSpec forced_pendulum(std::function<double(double)> f, double bound) {
    return pendulum_system([f](double t, double, double) { return f(t); }, kTwoPi, bound);
}

State s1(double q, double qd) { return {Vec::Constant(1, q), Vec::Constant(1, qd)}; }

std::size_t face_index(const PeriodicSegment& seg, const std::string& id) {
    for (std::size_t i = 0; i < seg.faces.size(); ++i)
        if (seg.faces[i].id == id) return i;
    FAIL("no face " << id);
    return 0;
}

template <class F>
ErrorKind kind_of(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("gamma is arccot f in (0, pi)") {
    CHECK(gamma_of_t([](double) { return 0.0; }, 0.0) == doctest::Approx(kPi / 2).epsilon(1e-15));
    CHECK(gamma_of_t([](double) { return 1.0; }, 0.0) == doctest::Approx(kPi / 4).epsilon(1e-15));
    CHECK(gamma_of_t([](double) { return -1.0; }, 0.0) == doctest::Approx(3 * kPi / 4).epsilon(1e-15));
    // cot γ = f for a large negative value
    const double g = gamma_of_t([](double) { return -40.0; }, 0.0);
    CHECK(g > kPi / 2);
    CHECK(std::cos(g) / std::sin(g) == doctest::Approx(-40.0).epsilon(1e-12));
}

TEST_CASE("pendulum segment: all exit faces strict and index -1") {
    for (auto f : std::vector<std::function<double(double)>>{
             [](double) { return 0.0; }, [](double t) { return 0.5 * std::sin(t); },
             [](double t) { return 1.0 + 0.3 * std::cos(t); }}) {
        const auto sys = forced_pendulum(f, 1.3);
        auto seg = build_pendulum_segment(f, 20.0, kTwoPi);
        const auto rep = check_exit_faces(sys, seg, 2000);
        CHECK(rep.all_verified);
        CHECK(rep.unresolved == 0);
        CHECK(rep.exit_margin > 0.0);
        const auto idx = euler_characteristics(seg);
        CHECK(idx.chi_W == 1);
        CHECK(idx.chi_exit == 2);
        CHECK(idx.index == -1);
        CHECK(idx.exit_components == 2);
    }
}

TEST_CASE("pendulum outward rates at hand-computed points") {
    const auto f = [](double) { return 0.0; };
    const auto sys = forced_pendulum(f, 0.0);
    const auto seg = build_pendulum_segment(f, 20.0, kTwoPi);
    // right wall q = 0 moving left: the outward rate is -q̇
    auto r = outward_rates(sys, seg, face_index(seg, "right"), 0.0, s1(0.0, -3.0));
    CHECK(r.rate == doctest::Approx(3.0));
    CHECK(r.cls == FaceClass::Exit);
    // right wall at rest: q̈ = -cos 0 = -1 pushes outward
    r = outward_rates(sys, seg, face_index(seg, "right"), 0.0, s1(0.0, 0.0));
    CHECK(r.cls == FaceClass::TangentExit);
    CHECK(r.second == doctest::Approx(1.0));
    // top cap above γ = π/2: q̈ = -cos q
    r = outward_rates(sys, seg, face_index(seg, "top"), 0.0, s1(2.0, 20.0));
    CHECK(r.rate == doctest::Approx(-std::cos(2.0)));
    CHECK(r.cls == FaceClass::Exit);
    // at the equilibrium angle the top cap is tangent; d/dt(-cos q) = sin q·q̇ = 20
    r = outward_rates(sys, seg, face_index(seg, "top"), 0.0, s1(kPi / 2, 20.0));
    CHECK(r.cls == FaceClass::TangentExit);
    CHECK(r.second == doctest::Approx(20.0).epsilon(1e-5));
    r = outward_rates(sys, seg, face_index(seg, "bottom"), 0.0, s1(1.0, -20.0));
    CHECK(r.rate == doctest::Approx(std::cos(1.0)));
}

TEST_CASE("perimeter scan agrees with the index and is stable under refinement") {
    const auto f = [](double t) { return 0.5 * std::sin(t); };
    const auto sys = forced_pendulum(f, 0.5);
    const auto seg = build_pendulum_segment(f, 20.0, kTwoPi);
    for (int n : {100, 1000, 10000}) CHECK(scan_exit_components(sys, seg, 0.0, n) == 2);
    for (double t : {0.7, 2.0, 4.5}) CHECK(scan_exit_components(sys, seg, t, 4000) == 2);
}

TEST_CASE("barrier segment for the rotating curve") {
    const auto curve = circle_curve(0.0, 2.0, 1.0);
    const RotationLaw law{[](double t) { return 0.1 * std::sin(t); }, [](double t) { return 0.1 * std::cos(t); },
                          [](double t) { return -0.1 * std::sin(t); }};
    const auto sys = rotating_curve_system(curve, law, kTwoPi);
    const auto bar = rotating_curve_barriers(curve, law);
    const double p = 3.0;
    auto seg = build_barrier_segment({bar}, p, kTwoPi);
    const auto mod = modified_system(sys, CutoffProfile{p, 0.5, 1.0});
    const auto rep = check_exit_faces(mod, seg, 4000);
    CHECK(rep.all_verified);
    CHECK(rep.unresolved == 0);
    const auto idx = euler_characteristics(seg);
    CHECK(idx.index == -1);
    CHECK(idx.exit_components == 2);
}

TEST_CASE("barrier segment rejects a speed bound below the barrier slope") {
    const BarrierPair b{{[](double t) { return std::sin(t); }, [](double t) { return std::cos(t); },
                         [](double t) { return -std::sin(t); }},
                        Barrier::constant(5.0)};
    CHECK(kind_of([&] { (void)build_barrier_segment({b}, 1.0, kTwoPi); }) == ErrorKind::SpeedBoundTooSmall);
    CHECK_NOTHROW((void)build_barrier_segment({b}, 1.5, kTwoPi));
}

TEST_CASE("multi-DOF barrier segment: faces and product index") {
    // Uncoupled repelling oscillators ẍ_j = x_j - c_j on boxes around c_j.
    const auto sys = flat_system("repel", 3, kTwoPi, [](double t, const Vec& q, const Vec&) {
        Vec a(3);
        for (int j = 0; j < 3; ++j) a[j] = q[j] - 2.0 * (j + 1) + 0.1 * std::sin(t);
        return a;
    });
    std::vector<BarrierPair> bars;
    for (int j = 0; j < 3; ++j) bars.push_back(BarrierPair::constant(2.0 * (j + 1) - 0.5, 2.0 * (j + 1) + 0.5));
    auto seg = build_barrier_segment(bars, 4.0, kTwoPi);
    CHECK(seg.faces.size() == 18);
    int exits = 0;
    for (const auto& f : seg.faces) exits += f.expected == FaceClass::Exit;
    CHECK(exits == 6);
    CHECK(seg.faces[0].id.rfind("x1_", 0) == 0);
    const auto mod = modified_system(sys, CutoffProfile{4.0, 0.5, 1.0});
    const auto rep = check_exit_faces(mod, seg, 3000);
    CHECK(rep.all_verified);
    const auto idx = euler_characteristics(seg);
    CHECK(idx.index == -1);  // (1 - 2)^3
}

TEST_CASE("trapping box: exit faces are classified as entry and the check fails") {
    const auto sys = flat_system("attract", 1, kTwoPi, [](double, const Vec& q, const Vec&) { return Vec(-q); });
    auto seg = build_barrier_segment({BarrierPair::constant(-1.0, 1.0)}, 4.0, kTwoPi);
    const auto rep = check_exit_faces(modified_system(sys, CutoffProfile{4.0, 0.5, 1.0}), seg, 500);
    CHECK_FALSE(rep.all_verified);
}

TEST_CASE("metric-ball segments: cap on the sphere and a flat 3-ball") {
    SUBCASE("polar cap, index 1 - 0 = 1 in dimension 2") {
        const auto sys = spherical_pendulum_system(
            [](double t, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.2 * std::sin(t); },
            [](double t, const Eigen::Vector3d&, const Eigen::Vector3d&) { return 0.2 * std::cos(t); }, kTwoPi, 0.3);
        const auto region = polar_cap_region(0.1);
        const double p = 8.0;
        auto seg = build_metric_ball_segment(*sys.metric, region, 2, p, kTwoPi);
        const auto mod = modified_system(sys, CutoffProfile{p, 1.0, 1.0});
        const auto rep = check_exit_faces(mod, seg, 2000);
        CHECK(rep.unresolved == 0);
        CHECK(rep.all_verified);
        const auto idx = euler_characteristics(seg);
        CHECK(idx.chi_exit == 0);
        CHECK(idx.index == 1);
    }
    SUBCASE("flat ball in R^3, index -1") {
        const auto metric = flat_metric(3);
        const auto sys = metric_system("ball3", metric, 3, [](double, const Vec& q, const Vec&) { return Vec(q); },
                                       kTwoPi, GrowthBound{2.0, 0.0, 1.0});
        const Vec c = Vec::Zero(3);
        auto seg = build_metric_ball_segment(metric, ball_region(c, 1.0), 3, 6.0, kTwoPi);
        const auto rep = check_exit_faces(modified_system(sys, CutoffProfile{6.0, 1.0, 1.0}), seg, 1500);
        CHECK(rep.all_verified);
        CHECK(euler_characteristics(seg).index == -1);
    }
}

TEST_CASE("index stage errors") {
    const auto f = [](double) { return 0.0; };
    auto seg = build_pendulum_segment(f, 20.0, kTwoPi);
    CHECK(kind_of([&] { (void)euler_characteristics(seg); }) == ErrorKind::UnclassifiedFaces);
    for (auto& face : seg.faces) face.classification = face.expected;
    CHECK(euler_characteristics(seg).index == -1);
    seg.faces[0].classification = FaceClass::Unresolved;
    CHECK(kind_of([&] { (void)euler_characteristics(seg); }) == ErrorKind::UnclassifiedFaces);

    const BarrierPair drifting{{[](double t) { return 0.1 * t; }, [](double) { return 0.1; }, [](double) { return 0.0; }},
                               Barrier::constant(5.0)};
    auto seg2 = build_barrier_segment({drifting}, 2.0, kTwoPi);
    for (auto& face : seg2.faces) face.classification = face.expected;
    CHECK(kind_of([&] { (void)euler_characteristics(seg2); }) == ErrorKind::NonProductSegment);
}

TEST_CASE("segment margin") {
    const auto seg = build_pendulum_segment([](double) { return 0.0; }, 20.0, kTwoPi);
    CHECK(seg.margin(0.0, s1(1.0, 0.0)) == doctest::Approx(1.0));
    CHECK(seg.margin(0.0, s1(kPi / 2, 19.5)) == doctest::Approx(0.5));
    CHECK_FALSE(seg.contains(0.0, s1(-0.1, 0.0)));
    const auto ball = build_metric_ball_segment(flat_metric(2), ball_region(Vec::Zero(2), 1.0), 2, 2.0, kTwoPi);
    CHECK(ball.contains(0.0, State{v2(0.5, 0.0), v2(1.0, 0.0)}));
    CHECK_FALSE(ball.contains(0.0, State{v2(0.5, 0.0), v2(3.0, 0.0)}));
}
