#include "forced_osc/system.hpp"

#include <cmath>
#include <random>

namespace forced_osc {

double wrap_angle(double x) {
    double r = std::remainder(x, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

Vec wrapped_difference(const SystemSpec& system, const Vec& a, const Vec& b) {
    Vec d = b - a;
    for (int i = 0; i < system.dim; ++i)
        if (system.is_angular(i)) d[i] = wrap_angle(d[i]);
    return d;
}

double periodicity_defect(const SystemSpec& system, const SampleBox& box, int samples,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = system.period * unit(rng);
        Vec q(system.dim), qd(system.dim);
        for (int i = 0; i < system.dim; ++i) {
            q[i] = box.q_lo[i] + (box.q_hi[i] - box.q_lo[i]) * unit(rng);
            qd[i] = box.qd_cap * (2.0 * unit(rng) - 1.0);
        }
        const Vec a0 = system.accel(t, q, qd);
        const Vec a1 = system.accel(t + system.period, q, qd);
        worst = std::max(worst, (a0 - a1).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace forced_osc
