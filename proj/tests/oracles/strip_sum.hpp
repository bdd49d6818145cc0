#pragma once

// Square-lattice strip of two rows: the 4x4 Bloch matrix from explicit 1D
// sums along x with Gaussian damping, extrapolated in eta^2.

#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::Matrix4cd two_row_strip(double kx, double a, double delta, double epsilon) {
    using cplx = std::complex<double>;
    const double kappa = 2.0 * M_PI;
    const std::array<double, 4> etas{0.02, 0.01, 0.005, 0.0025};
    // entries for row offset dy in {0, a}: A, B e^{-2i phi}, B e^{2i phi}
    auto sums = [&](double dy) {
        std::array<std::array<cplx, 3>, 4> acc{};
        const int cells = static_cast<int>(9.0 / etas[3] / a) + 1;
        for (int m = -cells; m <= cells; ++m) {
            const double x = m * a;
            const double d = std::hypot(x, dy);
            if (d == 0.0) continue;
            const double u = kappa * d, c = std::cos(u), s = std::sin(u);
            const double av = 0.375 * (-c / u - s / (u * u) - c / (u * u * u));
            const double bv = 0.375 * (c / u - 3.0 * s / (u * u) - 3.0 * c / (u * u * u));
            const cplx ph = std::polar(1.0, kx * x);
            const cplx e2 = cplx(x, dy) * cplx(x, dy) / (d * d);
            for (int l = 0; l < 4; ++l) {
                const double w = std::exp(-0.5 * std::pow(etas[l] * d, 2));
                acc[l][0] += w * ph * av;
                acc[l][1] += w * ph * bv * std::conj(e2);
                acc[l][2] += w * ph * bv * e2;
            }
        }
        std::array<cplx, 3> out{};
        for (int e = 0; e < 3; ++e) {
            std::array<cplx, 4> p;
            for (int l = 0; l < 4; ++l) p[l] = acc[l][e];
            for (int lvl = 1; lvl < 4; ++lvl)
                for (int i = 3; i >= lvl; --i) {
                    const double xa = etas[i - lvl] * etas[i - lvl], xb = etas[i] * etas[i];
                    p[i] = (xa * p[i] - xb * p[i - 1]) / (xa - xb);
                }
            out[e] = p[3];
        }
        return out;
    };
    const auto same = sums(0.0), up = sums(a), down = sums(-a);
    const double e2 = epsilon * epsilon;
    Eigen::Matrix4cd h;
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
            const auto& v = s == t ? same : (t > s ? up : down);
            const double d = s == t ? delta : 0.0;
            h(2 * s, 2 * t) = (v[0] + d) * (1.0 - e2);
            h(2 * s, 2 * t + 1) = v[1] * (1.0 - 0.5 * e2);
            h(2 * s + 1, 2 * t) = v[2] * (1.0 - 0.5 * e2);
            h(2 * s + 1, 2 * t + 1) = v[0] - d;
        }
    return h;
}

}  // namespace oracle
