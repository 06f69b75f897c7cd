#pragma once

#include <functional>

namespace forced_osc {

/// A T-periodic function of time with its first two derivatives.
struct Barrier {
    std::function<double(double)> x;
    std::function<double(double)> dx;
    std::function<double(double)> ddx;

    static Barrier constant(double value) {
        return {[value](double) { return value; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
    }
};

/// Lower and upper solutions x1(t) < x2(t) for one coordinate.
struct BarrierPair {
    Barrier lower;
    Barrier upper;

    static BarrierPair constant(double lo, double hi) { return {Barrier::constant(lo), Barrier::constant(hi)}; }
};

}  // namespace forced_osc
