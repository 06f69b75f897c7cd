#include "forced_osc/gallery.hpp"

#include "forced_osc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace forced_osc {

SystemSpec flat_system(std::string name, int dim, double T, AccelFn accel) {
    if (dim < 1) throw Error(ErrorKind::InvalidArgument, "system dimension must be positive");
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "period must be positive");
    SystemSpec s;
    s.name = std::move(name);
    s.dim = dim;
    s.period = T;
    s.accel = std::move(accel);
    s.angular.assign(static_cast<std::size_t>(dim), false);
    return s;
}

SystemSpec pendulum_system(ScalarForce f, double T, std::optional<double> bound) {
    if (!bound) throw Error(ErrorKind::UnboundedForce, "pendulum forcing needs a known bound C >= |f|");
    if (!(*bound >= 0.0)) throw Error(ErrorKind::InvalidArgument, "force bound must be non-negative");
    auto s = flat_system("pendulum", 1, T, [f](double t, const Vec& q, const Vec& qd) {
        return Vec::Constant(1, f(t, q[0], qd[0]) * std::sin(q[0]) - std::cos(q[0]));
    });
    s.growth = GrowthBound{1.0 + *bound, 0.0, 1.0};
    return s;
}

SystemSpec curve_pendulum_system(const CurveSpec& curve, TimeFunction f, double T, std::optional<double> bound) {
    auto s = flat_system("curve_pendulum", 1, T, [curve, f](double t, const Vec& q, const Vec&) {
        const auto p = curve.at(q[0]);
        return Vec::Constant(1, f(t) * p.dxi - p.deta);
    });
    if (bound) s.growth = GrowthBound{1.0 + *bound, 0.0, 1.0};
    return s;
}

namespace {

double rotating_accel(const CurvePoint& p, double phi, double dphi, double ddphi) {
    return -ddphi * (p.xi * p.deta - p.eta * p.dxi) + dphi * dphi * (p.xi * p.dxi + p.eta * p.deta) -
           (p.dxi * std::sin(phi) + p.deta * std::cos(phi));
}

}  // namespace

SystemSpec rotating_curve_system(const CurveSpec& curve, const RotationLaw& law, double T) {
    if (!curve.closed()) throw Error(ErrorKind::InvalidArgument, "rotating curve must be closed");
    auto s = flat_system("rotating_curve", 1, T, [curve, law](double t, const Vec& q, const Vec&) {
        return Vec::Constant(1, rotating_accel(curve.at(q[0]), law.phi(t), law.dphi(t), law.ddphi(t)));
    });
    // The field does not depend on ṡ; its bound is the sup over a (t, s) grid.
    double sup = 0.0;
    for (int i = 0; i < 64; ++i) {
        const double t = T * i / 64.0;
        const double phi = law.phi(t), dphi = law.dphi(t), ddphi = law.ddphi(t);
        for (int j = 0; j < 256; ++j)
            sup = std::max(sup, std::abs(rotating_accel(curve.at(curve.length() * j / 256.0), phi, dphi, ddphi)));
    }
    s.growth = GrowthBound{1.05 * sup, 0.0, 1.0};
    return s;
}

VerticalTangents s1_s2_of_t(const CurveSpec& curve, const RotationLaw& law, double t, int grid) {
    const double phi = law.phi(t);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double L = curve.length();
    auto value = [&](double s) {
        const auto p = curve.at(s);
        return p.dxi * sp + p.deta * cp;
    };
    auto slope = [&](double s) {
        const auto p = curve.at(s);
        return p.ddxi * sp + p.ddeta * cp;
    };
    std::vector<double> down, up;
    double a = 0.0, ga = slope(0.0);
    for (int k = 1; k <= grid; ++k) {
        const double b = L * k / grid;
        const double gb = slope(b);
        if ((ga < 0.0) != (gb < 0.0) || ga == 0.0) {
            double lo = a, hi = b, glo = ga;
            if (ga == 0.0) hi = lo;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * L; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = slope(mid);
                if ((gm < 0.0) == (glo < 0.0)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            double root = 0.5 * (lo + hi);
            if (root >= L) root -= L;
            const double v = value(root);
            if (std::abs(v + 1.0) < 1e-6) down.push_back(root);
            else if (std::abs(v - 1.0) < 1e-6) up.push_back(root);
        }
        a = b;
        ga = gb;
    }
    // A root sitting on the seam s = 0 ≡ L is found from both sides.
    auto dedup = [L](std::vector<double>& r) {
        std::sort(r.begin(), r.end());
        if (r.size() == 2 && (r.back() - r.front() < 1e-9 || L - (r.back() - r.front()) < 1e-9)) r.pop_back();
    };
    dedup(down);
    dedup(up);
    if (down.size() != 1 || up.size() != 1) {
        throw Error(ErrorKind::Discontinuity,
                    "expected one root of each kind at t = " + std::to_string(t) + ", found " +
                        std::to_string(down.size()) + " and " + std::to_string(up.size()));
    }
    VerticalTangents r{down[0], up[0]};
    while (r.s2 <= r.s1) r.s2 += L;
    return r;
}

BarrierPair rotating_curve_barriers(const CurveSpec& curve, const RotationLaw& law) {
    const double L = curve.length();
    const auto r0 = s1_s2_of_t(curve, law, 0.0);
    const double ref_upper = r0.s1;
    const double ref_lower = r0.s2 - L;
    auto lift = [L](double s, double ref) { return s + L * std::round((ref - s) / L); };
    auto upper_x = [=](double t) { return lift(s1_s2_of_t(curve, law, t).s1, ref_upper); };
    auto lower_x = [=](double t) { return lift(s1_s2_of_t(curve, law, t).s2, ref_lower); };
    auto upper_dx = [=](double t) { return -law.dphi(t) / curve.at(upper_x(t)).curvature(); };
    auto lower_dx = [=](double t) { return -law.dphi(t) / curve.at(lower_x(t)).curvature(); };
    constexpr double h = 1e-4;
    auto upper_ddx = [=](double t) { return (upper_dx(t + h) - upper_dx(t - h)) / (2 * h); };
    auto lower_ddx = [=](double t) { return (lower_dx(t + h) - lower_dx(t - h)) / (2 * h); };
    return {{lower_x, lower_dx, lower_ddx}, {upper_x, upper_dx, upper_ddx}};
}

double morse_V(double u) {
    const double w = 1.0 - std::exp(-(u - 1.0));
    return 0.5 * w * w;
}

double morse_dV(double u) {
    const double e = std::exp(-(u - 1.0));
    return (1.0 - e) * e;
}

double morse_ddV(double u) {
    const double e = std::exp(-(u - 1.0));
    return 2.0 * e * e - e;
}

SystemSpec morse_chain_system(const ChainSpec& chain, double T) {
    if (chain.n < 1) throw Error(ErrorKind::InvalidArgument, "chain needs at least one interior particle");
    if (!chain.F) throw Error(ErrorKind::InvalidArgument, "chain field F is missing");
    const int n = chain.n;
    const double right = chain.right_anchor();
    auto F = chain.F;
    auto s = flat_system("morse_chain", n, T, [n, right, F](double t, const Vec& x, const Vec&) {
        Vec a(n);
        for (int i = 0; i < n; ++i) {
            const double prev = i == 0 ? 0.0 : x[i - 1];
            const double next = i == n - 1 ? right : x[i + 1];
            a[i] = morse_dV(next - x[i]) - morse_dV(x[i] - prev) + F(t, x[i]);
        }
        return a;
    });
    if (chain.F_bound) s.growth = GrowthBound{*chain.F_bound + 0.5, 0.0, 1.0};
    return s;
}

double chain_potential(const ChainSpec& chain, const Vec& x) {
    double u = 0.0, prev = chain.left_anchor();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        u += morse_V(x[i] - prev);
        prev = x[i];
    }
    return u + morse_V(chain.right_anchor() - prev);
}

SignConditionReport chain_sign_conditions(const ChainSpec& chain, const std::vector<BarrierPair>& barriers,
                                          double T, int n_t) {
    if (static_cast<int>(barriers.size()) != chain.n)
        throw Error(ErrorKind::InvalidArgument, "one barrier pair per particle is required");
    SignConditionReport r;
    r.lower_margin.assign(barriers.size(), std::numeric_limits<double>::infinity());
    r.upper_margin.assign(barriers.size(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < n_t; ++k) {
        const double t = T * k / n_t;
        for (std::size_t i = 0; i < barriers.size(); ++i) {
            r.lower_margin[i] = std::min(r.lower_margin[i], chain.F(t, barriers[i].lower.x(t)));
            r.upper_margin[i] = std::min(r.upper_margin[i], -chain.F(t, barriers[i].upper.x(t)));
        }
    }
    r.worst_margin = std::min(*std::min_element(r.lower_margin.begin(), r.lower_margin.end()),
                              *std::min_element(r.upper_margin.begin(), r.upper_margin.end()));
    r.holds = r.worst_margin > 0.0;
    return r;
}

MetricSpec flat_metric(int dim) {
    MetricSpec m;
    m.A = [dim](const Vec&) { return Mat::Identity(dim, dim); };
    m.christoffel = [dim](const Vec&) { return Christoffel(static_cast<std::size_t>(dim), Mat::Zero(dim, dim)); };
    return m;
}

MetricSpec sphere_metric(double theta_min) {
    MetricSpec m;
    m.A = [](const Vec& q) {
        Mat a = Mat::Zero(2, 2);
        a(0, 0) = 1.0;
        a(1, 1) = std::sin(q[0]) * std::sin(q[0]);
        return a;
    };
    m.christoffel = [](const Vec& q) {
        Christoffel g(2, Mat::Zero(2, 2));
        const double s = std::sin(q[0]), c = std::cos(q[0]);
        g[0](1, 1) = -s * c;
        g[1](0, 1) = g[1](1, 0) = c / s;
        return g;
    };
    m.in_chart = [theta_min](const Vec& q) { return q[0] > theta_min && q[0] < kPi - theta_min; };
    return m;
}

Christoffel christoffel(const MetricSpec& metric, const Vec& q) {
    if (metric.christoffel) return metric.christoffel(q);
    const auto n = q.size();
    const double h = metric.fd_step;
    std::vector<Mat> dA(static_cast<std::size_t>(n));
    Vec qp = q, qm = q;
    for (Eigen::Index l = 0; l < n; ++l) {
        qp[l] = q[l] + h;
        qm[l] = q[l] - h;
        dA[l] = (metric.A(qp) - metric.A(qm)) / (2.0 * h);
        qp[l] = qm[l] = q[l];
    }
    const Mat A = metric.A(q);
    Eigen::LLT<Mat> llt(A);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularMetric, "metric is not positive definite");
    const Mat Ainv = llt.solve(Mat::Identity(n, n));
    Christoffel g(static_cast<std::size_t>(n), Mat::Zero(n, n));
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) {
                double acc = 0.0;
                for (Eigen::Index l = 0; l < n; ++l) acc += Ainv(k, l) * (dA[i](l, j) + dA[j](l, i) - dA[l](i, j));
                g[k](i, j) = g[k](j, i) = 0.5 * acc;
            }
    return g;
}

SystemSpec metric_system(std::string name, const MetricSpec& metric, int dim, AccelFn v, double T,
                         std::optional<GrowthBound> growth) {
    auto accel = [metric, v, dim](double t, const Vec& q, const Vec& qd) {
        const auto g = christoffel(metric, q);
        Vec a = v(t, q, qd);
        for (int k = 0; k < dim; ++k) a[k] -= qd.dot(g[k] * qd);
        return a;
    };
    auto s = flat_system(std::move(name), dim, T, accel);
    s.force = std::move(v);
    s.metric = metric;
    s.growth = growth;
    s.in_chart = metric.in_chart;
    return s;
}

SystemSpec geodesic_system(const MetricSpec& metric, int dim) {
    return metric_system("geodesic", metric, dim, [dim](double, const Vec&, const Vec&) { return Vec::Zero(dim); },
                         1.0, GrowthBound{0.0, 0.0, 1.0});
}

double validate_metric(const MetricSpec& metric, const SampleBox& box, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        Vec q(box.q_lo.size());
        for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = box.q_lo[i] + (box.q_hi[i] - box.q_lo[i]) * unit(rng);
        const Mat A = metric.A(q);
        worst = std::max(worst, (A - A.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > 0.0))
            throw Error(ErrorKind::SingularMetric, "metric is not positive definite at a sampled point");
    }
    return worst;
}

Eigen::Vector3d sphere_point(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Eigen::Vector3d sphere_velocity(double theta, double phi, double dtheta, double dphi) {
    const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cp = std::cos(phi);
    return Eigen::Vector3d(ct * cp, ct * sp, -st) * dtheta + Eigen::Vector3d(-st * sp, st * cp, 0.0) * dphi;
}

SystemSpec spherical_pendulum_system(SphereForce Fx, SphereForce Fy, double T, std::optional<double> bound,
                                     double gravity, double theta_min) {
    if (!bound) throw Error(ErrorKind::UnboundedForce, "spherical pendulum forcing needs a known bound");
    auto v = [Fx, Fy, gravity](double t, const Vec& q, const Vec& qd) {
        const double th = q[0], ph = q[1];
        const Eigen::Vector3d r = sphere_point(th, ph);
        const Eigen::Vector3d rd = sphere_velocity(th, ph, qd[0], qd[1]);
        const Eigen::Vector3d G(Fx(t, r, rd), Fy(t, r, rd), -gravity);
        const double st = std::sin(th), ct = std::cos(th), sp = std::sin(ph), cp = std::cos(ph);
        Vec out(2);
        out[0] = G.dot(Eigen::Vector3d(ct * cp, ct * sp, -st));
        out[1] = G.dot(Eigen::Vector3d(-sp, cp, 0.0)) / st;
        return out;
    };
    auto s = metric_system("spherical_pendulum", sphere_metric(theta_min), 2, v, T,
                           GrowthBound{gravity + *bound, 0.0, 1.0});
    s.angular = {false, true};
    return s;
}

namespace {

struct GridWalker {
    // Mixed-radix counter over the tensor grid.
    std::vector<int> radix, digit;
    bool next() {
        for (std::size_t i = 0; i < digit.size(); ++i) {
            if (++digit[i] < radix[i]) return true;
            digit[i] = 0;
        }
        return false;
    }
};

double node(double lo, double hi, int k, int n) { return n <= 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (n - 1); }

}  // namespace

GrowthReport growth_check(const SystemSpec& system, const GrowthGrid& grid) {
    if (!system.growth) throw Error(ErrorKind::InvalidArgument, "system '" + system.name + "' has no growth bound");
    const auto gb = *system.growth;
    const int n = system.dim;
    GrowthReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    auto eval = [&](double t, const Vec& q, const Vec& qd) {
        const Vec v = system.field(t, q, qd);
        double nv, nqd;
        if (system.metric) {
            const Mat A = system.metric->A(q);
            nv = std::sqrt(std::max(0.0, v.dot(A * v)));
            nqd = std::sqrt(std::max(0.0, qd.dot(A * qd)));
        } else {
            nv = v.cwiseAbs().maxCoeff();
            nqd = qd.norm();
        }
        const double margin = gb.a + gb.b * std::pow(nqd, 2.0 - gb.delta) - nv;
        rep.worst_margin = std::min(rep.worst_margin, margin);
        ++rep.samples;
    };
    const double total = grid.n_t * std::pow(static_cast<double>(grid.n_q) * grid.n_qd, n);
    Vec q(n), qd(n);
    if (total <= 2e5) {
        GridWalker w;
        w.radix.assign(static_cast<std::size_t>(2 * n), grid.n_q);
        for (int i = 0; i < n; ++i) w.radix[n + i] = grid.n_qd;
        w.digit.assign(w.radix.size(), 0);
        for (int k = 0; k < grid.n_t; ++k) {
            const double t = system.period * k / grid.n_t;
            std::fill(w.digit.begin(), w.digit.end(), 0);
            do {
                for (int i = 0; i < n; ++i) {
                    q[i] = node(grid.q_lo[i], grid.q_hi[i], w.digit[i], grid.n_q);
                    qd[i] = node(-grid.qd_cap, grid.qd_cap, w.digit[n + i], grid.n_qd);
                }
                eval(t, q, qd);
            } while (w.next());
        }
    } else {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int k = 0; k < 200000; ++k) {
            const double t = system.period * unit(rng);
            for (int i = 0; i < n; ++i) {
                q[i] = grid.q_lo[i] + (grid.q_hi[i] - grid.q_lo[i]) * unit(rng);
                qd[i] = grid.qd_cap * (2.0 * unit(rng) - 1.0);
            }
            eval(t, q, qd);
        }
    }
    rep.holds = rep.worst_margin >= 0.0;
    return rep;
}

BarrierConditionReport check_barrier_conditions(const SystemSpec& system, const std::vector<BarrierPair>& barriers,
                                                int n_t, double qd_cap, int samples, std::uint64_t seed) {
    const int n = system.dim;
    if (static_cast<int>(barriers.size()) != n)
        throw Error(ErrorKind::InvalidArgument, "one barrier pair per coordinate is required");
    BarrierConditionReport r;
    r.worst_order = r.worst_lower = r.worst_upper = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double T = system.period;
    Vec q(n), qd(n);
    for (int k = 0; k < n_t; ++k) {
        const double t = T * k / n_t;
        for (int j = 0; j < n; ++j) {
            const auto& b = barriers[j];
            r.worst_order = std::min(r.worst_order, b.upper.x(t) - b.lower.x(t));
            r.worst_periodicity = std::max({r.worst_periodicity, std::abs(b.lower.x(t + T) - b.lower.x(t)),
                                            std::abs(b.upper.x(t + T) - b.upper.x(t))});
        }
        const int draws = n == 1 ? 1 : samples;
        for (int d = 0; d < draws; ++d) {
            for (int i = 0; i < n; ++i) {
                const double lo = barriers[i].lower.x(t), hi = barriers[i].upper.x(t);
                q[i] = lo + (hi - lo) * unit(rng);
                qd[i] = qd_cap * (2.0 * unit(rng) - 1.0);
            }
            for (int j = 0; j < n; ++j) {
                Vec ql = q, qdl = qd;
                ql[j] = barriers[j].lower.x(t);
                qdl[j] = barriers[j].lower.dx(t);
                r.worst_lower = std::min(r.worst_lower, barriers[j].lower.ddx(t) - system.accel(t, ql, qdl)[j]);
                Vec qu = q, qdu = qd;
                qu[j] = barriers[j].upper.x(t);
                qdu[j] = barriers[j].upper.dx(t);
                r.worst_upper = std::min(r.worst_upper, system.accel(t, qu, qdu)[j] - barriers[j].upper.ddx(t));
            }
        }
    }
    if (!(r.worst_order > 0.0)) r.violations.push_back("condition 1: x1(t) < x2(t) fails");
    if (!(r.worst_lower > 0.0)) r.violations.push_back("condition 2: x1'' > v(t, x1, x1') fails");
    if (!(r.worst_upper > 0.0)) r.violations.push_back("condition 3: x2'' < v(t, x2, x2') fails");
    if (!(r.worst_periodicity < 1e-10)) r.violations.push_back("barriers are not T-periodic");
    r.holds = r.violations.empty();
    return r;
}

}  // namespace forced_osc
