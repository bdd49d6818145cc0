#pragma once

// Brute-force Bloch matrix: plain real-space sums of the pair couplings with
// Gaussian damping exp(-(eta r)^2 / 2) and polynomial extrapolation in eta^2.
// Shares no code with the Ewald route beyond the lattice description.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;

struct damped_settings {
    std::array<double, 4> etas{0.8, 0.4, 0.2, 0.1};  // 1/lambda, descending, each half the previous
    double depth = 9.0;                               // sum out to depth / eta_min
};

// Pair sums for one displacement set tau + T: returns {A, B e^{-2i phi}, B e^{2i phi}}
// in units of the single-atom rate, without on-site terms.
inline std::array<cplx, 3> pair_sums(const Eigen::Vector2d& k, const Eigen::Vector2d& tau, const Eigen::Vector2d& a1,
                                     const Eigen::Vector2d& a2, double kappa, const damped_settings& ds = {}) {
    const double eta = ds.etas.back();
    const double radius = ds.depth / eta;
    const double area = std::abs(a1.x() * a2.y() - a1.y() * a2.x());
    const int span = static_cast<int>(std::ceil(radius * std::max(a1.norm(), a2.norm()) / area)) + 2;
    // far field (1/r, 1/r^2 terms) per damping level, near field undamped
    std::array<std::array<cplx, 3>, 4> far{};
    std::array<cplx, 3> near{};
    for (int i = -span; i <= span; ++i)
        for (int j = -span; j <= span; ++j) {
            const Eigen::Vector2d r = tau + i * a1 + j * a2;
            const double d = r.norm();
            if (d > radius || d < 1e-9) continue;
            const double x = kappa * d;
            const double c = std::cos(x), s = std::sin(x);
            const double a_far = 0.375 * (-c / x - s / (x * x)), a_near = -0.375 * c / (x * x * x);
            const double b_far = 0.375 * (c / x - 3.0 * s / (x * x)), b_near = -1.125 * c / (x * x * x);
            const cplx ph = std::polar(1.0, k.dot(r));
            const cplx e2 = cplx(r.x(), r.y()) * cplx(r.x(), r.y()) / (d * d);
            const std::array<cplx, 3> f{ph * a_far, ph * b_far * std::conj(e2), ph * b_far * e2};
            near[0] += ph * a_near;
            near[1] += ph * b_near * std::conj(e2);
            near[2] += ph * b_near * e2;
            double w = std::exp(-0.5 * eta * eta * d * d);  // eta_min; doubling eta is w^4
            for (int l = 3; l >= 0; --l) {
                if (ds.etas[l] * d < 9.0)
                    for (int e = 0; e < 3; ++e) far[l][e] += w * f[e];
                w *= w;
                w *= w;
            }
        }
    std::array<cplx, 3> out{};
    for (int e = 0; e < 3; ++e) {
        std::array<cplx, 4> p;
        for (int l = 0; l < 4; ++l) p[l] = far[l][e];
        std::array<double, 4> x;
        for (int l = 0; l < 4; ++l) x[l] = ds.etas[l] * ds.etas[l];
        for (int lvl = 1; lvl < 4; ++lvl)
            for (int i = 3; i >= lvl; --i) p[i] = (x[i - lvl] * p[i] - x[i] * p[i - 1]) / (x[i - lvl] - x[i]);
        out[e] = p[3] + near[e];
    }
    return out;
}

// Distance of k from the nearest light circle around any reciprocal image,
// by scanning images in a generous box.
inline double circle_distance(const Eigen::Vector2d& k, const Eigen::Vector2d& a1, const Eigen::Vector2d& a2, double kappa = 2.0 * M_PI) {
    const double det = a1.x() * a2.y() - a1.y() * a2.x();
    const Eigen::Vector2d b1 = 2.0 * M_PI / det * Eigen::Vector2d(a2.y(), -a2.x());
    const Eigen::Vector2d b2 = 2.0 * M_PI / det * Eigen::Vector2d(-a1.y(), a1.x());
    double best = 1e300;
    for (int i = -12; i <= 12; ++i)
        for (int j = -12; j <= 12; ++j) best = std::min(best, std::abs((k + i * b1 + j * b2).norm() - kappa));
    return best;
}

// Coarsest damping scales with the circle distance so the smeared light
// circle stays far from k.
inline damped_settings settings_for(double distance) {
    damped_settings ds;
    const double e0 = std::min(0.8, distance / 2.5);
    ds.etas = {e0, e0 / 2, e0 / 4, e0 / 8};
    return ds;
}

// Full dressed Bloch matrix, rows 2 alpha + mu, same phase convention as the
// library (sum over r = tau_b - tau_a + T of e^{i k r}).
inline Eigen::MatrixXcd bloch_matrix(const Eigen::Vector2d& k, const std::vector<Eigen::Vector2d>& basis, const Eigen::Vector2d& a1,
                                     const Eigen::Vector2d& a2, double delta, double epsilon, const damped_settings& ds = {}) {
    const double kappa = 2.0 * M_PI;
    const int nb = static_cast<int>(basis.size());
    const double e2 = epsilon * epsilon;
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(2 * nb, 2 * nb);
    for (int a = 0; a < nb; ++a)
        for (int b = 0; b < nb; ++b) {
            const auto s = pair_sums(k, basis[b] - basis[a], a1, a2, kappa, ds);
            const double d = a == b ? delta : 0.0;
            v(2 * a, 2 * b) = (s[0] + d) * (1.0 - e2);
            v(2 * a, 2 * b + 1) = s[1] * (1.0 - 0.5 * e2);
            v(2 * a + 1, 2 * b) = s[2] * (1.0 - 0.5 * e2);
            v(2 * a + 1, 2 * b + 1) = s[0] - d;
        }
    return v;
}

}  // namespace oracle
