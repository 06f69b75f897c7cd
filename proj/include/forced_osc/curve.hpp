#pragma once

#include "forced_osc/types.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace forced_osc {

/// Position and first two arclength derivatives of a plane curve.
struct CurvePoint {
    double xi = 0.0, eta = 0.0;
    double dxi = 0.0, deta = 0.0;
    double ddxi = 0.0, ddeta = 0.0;

    /// Signed curvature ξ′η″ − η′ξ″.
    double curvature() const { return dxi * ddeta - deta * ddxi; }
};

/// Naturally parametrized plane curve (ξ(s), η(s)), s ∈ [0, L).
class CurveSpec {
public:
    CurveSpec(std::function<CurvePoint(double)> eval, double length, bool closed);

    /// Closed curves wrap s into [0, L); open ones throw outside [0, L].
    CurvePoint at(double s) const;
    double length() const { return length_; }
    bool closed() const { return closed_; }

    /// max |(ξ′)² + (η′)² − 1| over n uniform samples.
    double speed_defect(int n) const;

private:
    std::function<CurvePoint(double)> eval_;
    double length_;
    bool closed_;
};

/// Counter-clockwise circle of radius r centred at (cx, cy), starting at the
/// rightmost point.
CurveSpec circle_curve(double cx, double cy, double r);

/// A plane curve in an arbitrary regular parameter u ∈ [u0, u1].
struct ParametricCurve {
    std::function<Eigen::Vector2d(double)> r;
    std::function<Eigen::Vector2d(double)> dr;
    std::function<Eigen::Vector2d(double)> ddr;
    double u0 = 0.0;
    double u1 = 1.0;
    bool closed = false;
};

/// Reparametrizes by arclength: cumulative Gauss–Legendre quadrature on
/// `intervals` equal pieces of [u0, u1], Hermite inversion of s(u) and a
/// Newton polish against the exact quadrature.
CurveSpec natural_reparametrization(const ParametricCurve& curve, int intervals = 1024);

/// Counter-clockwise ellipse with semi-axes a (along ξ) and b (along η),
/// centred at (cx, cy), starting at (cx + a, cy).
CurveSpec ellipse_curve(double a, double b, double cx = 0.0, double cy = 0.0);

}  // namespace forced_osc
