#include "forced_osc/curve.hpp"

#include "forced_osc/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace forced_osc {

CurveSpec::CurveSpec(std::function<CurvePoint(double)> eval, double length, bool closed)
    : eval_(std::move(eval)), length_(length), closed_(closed) {
    if (!(length > 0.0) || !std::isfinite(length))
        throw Error(ErrorKind::InvalidArgument, "curve length must be positive and finite");
}

CurvePoint CurveSpec::at(double s) const {
    if (closed_) {
        s = std::fmod(s, length_);
        if (s < 0.0) s += length_;
    } else if (s < 0.0 || s > length_) {
        throw Error(ErrorKind::InvalidArgument, "arclength parameter outside the open curve");
    }
    return eval_(s);
}

double CurveSpec::speed_defect(int n) const {
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s = length_ * static_cast<double>(i) / static_cast<double>(closed_ ? n : n - 1);
        const auto p = at(s);
        worst = std::max(worst, std::abs(p.dxi * p.dxi + p.deta * p.deta - 1.0));
    }
    return worst;
}

CurveSpec circle_curve(double cx, double cy, double r) {
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "circle radius must be positive");
    auto eval = [cx, cy, r](double s) {
        const double a = s / r;
        const double c = std::cos(a), sn = std::sin(a);
        return CurvePoint{cx + r * c, cy + r * sn, -sn, c, -c / r, -sn / r};
    };
    return CurveSpec(eval, kTwoPi * r, true);
}

namespace {

// 8-point Gauss–Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kGlX = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlW = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};

struct ArclengthTable {
    ParametricCurve curve;
    std::vector<double> u;  // uniform nodes
    std::vector<double> s;  // cumulative arclength at nodes

    double speed(double x) const { return curve.dr(x).norm(); }

    double integral(double a, double b) const {
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        double acc = 0.0;
        for (std::size_t k = 0; k < kGlX.size(); ++k) acc += kGlW[k] * speed(mid + half * kGlX[k]);
        return half * acc;
    }

    double parameter_of(double target) const {
        auto it = std::upper_bound(s.begin(), s.end(), target);
        auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - s.begin() - 1, 0));
        k = std::min(k, u.size() - 2);
        const double ua = u[k], ub = u[k + 1], sa = s[k], sb = s[k + 1];
        const double h = sb - sa;
        const double w = (target - sa) / h;
        // Hermite interpolation of u(s) with du/ds = 1/|r'|.
        const double ma = h / speed(ua), mb = h / speed(ub);
        const double w2 = w * w, w3 = w2 * w;
        double x = (2 * w3 - 3 * w2 + 1) * ua + (w3 - 2 * w2 + w) * ma + (-2 * w3 + 3 * w2) * ub + (w3 - w2) * mb;
        x = std::clamp(x, ua, ub);
        for (int it2 = 0; it2 < 8; ++it2) {
            const double res = sa + integral(ua, x) - target;
            const double dx = res / speed(x);
            x = std::clamp(x - dx, ua, ub);
            if (std::abs(dx) < 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        return x;
    }
};

}  // namespace

CurveSpec natural_reparametrization(const ParametricCurve& curve, int intervals) {
    if (intervals < 2 || !(curve.u1 > curve.u0))
        throw Error(ErrorKind::InvalidArgument, "reparametrization needs a proper parameter interval");
    auto table = std::make_shared<ArclengthTable>();
    table->curve = curve;
    table->u.resize(static_cast<std::size_t>(intervals) + 1);
    table->s.resize(table->u.size());
    const double du = (curve.u1 - curve.u0) / intervals;
    for (int k = 0; k <= intervals; ++k) table->u[k] = curve.u0 + du * k;
    table->u.back() = curve.u1;
    table->s[0] = 0.0;
    for (int k = 0; k < intervals; ++k) {
        if (!(table->speed(table->u[k]) > 0.0))
            throw Error(ErrorKind::InvalidArgument, "parametric curve is not regular");
        table->s[k + 1] = table->s[k] + table->integral(table->u[k], table->u[k + 1]);
    }
    const double length = table->s.back();
    auto eval = [table](double s) {
        const double u = table->parameter_of(s);
        const Eigen::Vector2d r = table->curve.r(u);
        const Eigen::Vector2d d1 = table->curve.dr(u);
        const Eigen::Vector2d d2 = table->curve.ddr(u);
        const double sp2 = d1.squaredNorm();
        const double sp = std::sqrt(sp2);
        const Eigen::Vector2d tangent = d1 / sp;
        const Eigen::Vector2d bend = (d2 - (d1.dot(d2) / sp2) * d1) / sp2;
        return CurvePoint{r.x(), r.y(), tangent.x(), tangent.y(), bend.x(), bend.y()};
    };
    return CurveSpec(eval, length, curve.closed);
}

CurveSpec ellipse_curve(double a, double b, double cx, double cy) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "ellipse semi-axes must be positive");
    ParametricCurve pc;
    pc.r = [=](double u) { return Eigen::Vector2d(cx + a * std::cos(u), cy + b * std::sin(u)); };
    pc.dr = [=](double u) { return Eigen::Vector2d(-a * std::sin(u), b * std::cos(u)); };
    pc.ddr = [=](double u) { return Eigen::Vector2d(-a * std::cos(u), -b * std::sin(u)); };
    pc.u0 = 0.0;
    pc.u1 = kTwoPi;
    pc.closed = true;
    return natural_reparametrization(pc);
}

}  // namespace forced_osc
