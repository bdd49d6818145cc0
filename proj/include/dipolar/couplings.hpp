#pragma once

#include <cmath>
#include <complex>
#include <ostream>

#include <Eigen/Dense>

#include "errors.hpp"
#include "geometry.hpp"

namespace dipolar {

using cplx = std::complex<double>;
using mat2c = Eigen::Matrix2cd;
using matc = Eigen::MatrixXcd;
using vecc = Eigen::VectorXcd;

struct coupling_params {
    double gamma = 1.0;
    double lambda = 1.0;
    double delta = 0.0;
    double epsilon = 0.0;

    double kappa() const { return two_pi / lambda; }
    void validate() const {
        if (!(gamma > 0.0)) throw invalid_parameter("gamma must be positive");
        if (!(lambda > 0.0)) throw invalid_parameter("lambda must be positive");
        if (!(epsilon >= 0.0 && epsilon < 1.0)) throw invalid_parameter("epsilon must lie in [0, 1)");
        if (!std::isfinite(delta)) throw invalid_parameter("delta must be finite");
    }
};

struct scalar_coefficients {
    double A, B, Ap, Bp, C, Cp;
};

// x = 2 pi r / lambda; results in units of the single-atom rate.
inline scalar_coefficients scalar_coefficients_at(double x, double gamma = 1.0) {
    if (!(x > 0.0)) throw domain_error("scalar coefficients need a positive separation");
    const double c = std::cos(x), s = std::sin(x);
    const double x2 = x * x, x3 = x2 * x;
    scalar_coefficients r;
    r.A = 0.375 * (-c / x - s / x2 - c / x3);
    r.B = 0.375 * (c / x - 3.0 * (s / x2 + c / x3));
    r.C = 1.5 * (-s / x2 - c / x3);
    if (x < 1e-2) {
        // the sine combinations cancel to O(1); use their series
        const double x4 = x2 * x2, x6 = x4 * x2;
        r.Ap = 1.0 - 3.0 * x2 / 20.0 + x4 / 140.0 - x6 / 6048.0;
        r.Bp = x2 / 40.0 - x4 / 560.0 + x6 / 20160.0;
        r.Cp = 1.0 - x2 / 10.0 + x4 / 280.0 - x6 / 15120.0;
    } else {
        r.Ap = 0.75 * (s / x - c / x2 + s / x3);
        r.Bp = 0.375 * (-s / x - 3.0 * (c / x2 - s / x3));
        r.Cp = 3.0 * (-c / x2 + s / x3);
    }
    r.A *= gamma;
    r.B *= gamma;
    r.Ap *= gamma;
    r.Bp *= gamma;
    r.C *= gamma;
    r.Cp *= gamma;
    return r;
}

enum class block_role { coherent, dissipative };

inline mat2c pair_block(const vec2& r, const coupling_params& p, block_role role) {
    const double d = r.norm();
    if (!(d > 0.0)) throw domain_error("pair block needs distinct sites");
    const auto c = scalar_coefficients_at(p.kappa() * d, p.gamma);
    const cplx ph = std::polar(1.0, 2.0 * std::atan2(r.y(), r.x()));
    mat2c m;
    if (role == block_role::coherent) {
        const double e2 = p.epsilon * p.epsilon;
        m << c.A * (1.0 - e2), c.B * std::conj(ph) * (1.0 - 0.5 * e2),
             c.B * ph * (1.0 - 0.5 * e2), c.A;
    } else {
        m << c.Ap, c.Bp * std::conj(ph),
             c.Bp * ph, c.Ap;
    }
    return m;
}

inline mat2c onsite_block(const coupling_params& p, block_role role) {
    mat2c m = mat2c::Zero();
    if (role == block_role::coherent) {
        m(0, 0) = p.delta * (1.0 - p.epsilon * p.epsilon);
        m(1, 1) = -p.delta;
    } else {
        m(0, 0) = m(1, 1) = p.gamma;
    }
    return m;
}

struct real_space_pair {
    matc H, G;
    std::vector<int> sites;  // lattice index of each active site, in matrix order
};

// Rows 2i, 2i+1 hold the (+, -) amplitudes of the i-th active site.
inline real_space_pair real_space_matrices(const finite_lattice& lat, const coupling_params& p) {
    p.validate();
    real_space_pair out;
    out.sites = lat.active_sites();
    const int n = static_cast<int>(out.sites.size());
    if (n == 0) throw invalid_parameter("lattice has no active sites");
    out.H = matc::Zero(2 * n, 2 * n);
    out.G = matc::Zero(2 * n, 2 * n);
    const mat2c h0 = onsite_block(p, block_role::coherent), g0 = onsite_block(p, block_role::dissipative);
    for (int i = 0; i < n; ++i) {
        out.H.block<2, 2>(2 * i, 2 * i) = h0;
        out.G.block<2, 2>(2 * i, 2 * i) = g0;
        for (int j = i + 1; j < n; ++j) {
            // element (i, j) couples the amplitude at j into i: displacement r_i - r_j
            const vec2 r = lat.positions[out.sites[i]] - lat.positions[out.sites[j]];
            const mat2c h = pair_block(r, p, block_role::coherent);
            const mat2c g = pair_block(r, p, block_role::dissipative);
            out.H.block<2, 2>(2 * i, 2 * j) = h;
            out.H.block<2, 2>(2 * j, 2 * i) = h.adjoint();
            out.G.block<2, 2>(2 * i, 2 * j) = g;
            out.G.block<2, 2>(2 * j, 2 * i) = g.adjoint();
        }
    }
    return out;
}

// Debug export: one line per non-zero element.
inline void write_matrix_csv(std::ostream& os, const matc& m) {
    os.precision(17);
    os << "row,col,re,im\n";
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            if (m(i, j) != cplx(0.0))
                os << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag() << '\n';
}

}  // namespace dipolar
