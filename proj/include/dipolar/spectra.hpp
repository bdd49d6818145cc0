#pragma once

#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "couplings.hpp"
#include "ewald.hpp"
#include "geometry.hpp"
#include "parallel.hpp"

namespace dipolar {

// Ascending eigenvalues, orthonormal eigenvectors with the largest-modulus
// entry of each column rotated to the positive real axis.
struct eigensystem {
    Eigen::VectorXd values;
    matc vectors;
};

inline eigensystem hermitian_eigen(const matc& h) {
    Eigen::SelfAdjointEigenSolver<matc> es(h);
    if (es.info() != Eigen::Success) throw numeric_error("Hermitian eigensolver failed");
    eigensystem out{es.eigenvalues(), es.eigenvectors()};
    for (int c = 0; c < out.vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        out.vectors.col(c).cwiseAbs().maxCoeff(&arg);
        const cplx v = out.vectors(arg, c);
        out.vectors.col(c) *= std::conj(v) / std::abs(v);
    }
    return out;
}

struct band_table {
    std::vector<path_point> path;
    std::vector<Eigen::VectorXd> energies;
    std::vector<double> divergence_distance;
    std::vector<bool> near_divergence;  // |distance| < 1e-2
    std::vector<bool> nudged;
};

inline band_table dispersion(const lattice_spec& s, const coupling_params& p, const ewald_config& cfg, const std::vector<path_point>& path,
                             const executor& ex = {}) {
    p.validate();
    cfg.validate();
    band_table t;
    t.path = path;
    const auto offsets = basis_offsets(s);
    auto rows = ex.map(static_cast<int>(path.size()), [&](int i) {
        const auto sums = ewald_kernel_sums(path[i].k, offsets, s, p.kappa(), cfg);
        const matc v = assemble_from_sums(sums, s, p);
        Eigen::SelfAdjointEigenSolver<matc> es(v, Eigen::EigenvaluesOnly);
        return std::make_tuple(Eigen::VectorXd(es.eigenvalues()), sums.divergence_distance, sums.nudged);
    });
    for (auto& [e, d, n] : rows) {
        t.energies.push_back(e);
        t.divergence_distance.push_back(d);
        t.near_divergence.push_back(std::abs(d) < 1e-2);
        t.nudged.push_back(n);
    }
    return t;
}

struct strip_config {
    std::vector<double> etas{4e-3 * two_pi, 2e-3 * two_pi, 1e-3 * two_pi};
    int min_cells = 5000;
    double damping_depth = 36.0;  // sum until eta_min * r exceeds this
};

// sum_m e^{i k m P} block(offset + m P x) for the (A, B e^{-2i phi}, B e^{2i phi})
// entries, damped by exp(-eta r) and extrapolated to eta -> 0.
inline std::array<cplx, 3> strip_pair_sum(const vec2& offset, bool skip_origin, double kx, double period, double kappa, double gamma,
                                          const strip_config& sc) {
    std::vector<double> etas = sc.etas;
    std::sort(etas.begin(), etas.end(), std::greater<>());
    const size_t levels = etas.size();
    const double eta_min = etas.back();
    const int cells = std::max(sc.min_cells, static_cast<int>(std::ceil(sc.damping_depth / (eta_min * period))) + 1);
    std::vector<std::array<cplx, 3>> acc(levels, {cplx{}, cplx{}, cplx{}});
    for (int m = -cells; m <= cells; ++m) {
        if (skip_origin && m == 0) continue;
        const vec2 r(offset.x() + m * period, offset.y());
        const double d = r.norm();
        const auto c = scalar_coefficients_at(kappa * d, gamma);
        const cplx ph = std::polar(1.0, kx * m * period);
        const cplx e2 = cplx(r.x(), r.y()) * cplx(r.x(), r.y()) / (d * d);
        const cplx va = ph * c.A, vpm = ph * c.B * std::conj(e2), vmp = ph * c.B * e2;
        for (size_t l = 0; l < levels; ++l) {
            const double w = std::exp(-etas[l] * d);
            acc[l][0] += w * va;
            acc[l][1] += w * vpm;
            acc[l][2] += w * vmp;
        }
    }
    std::array<cplx, 3> out{};
    for (int e = 0; e < 3; ++e) {
        std::vector<cplx> p(levels);
        for (size_t l = 0; l < levels; ++l) p[l] = acc[l][e];
        for (size_t lvl = 1; lvl < levels; ++lvl)
            for (size_t i = levels - 1; i >= lvl; --i) p[i] = (etas[i - lvl] * p[i] - etas[i] * p[i - 1]) / (etas[i - lvl] - etas[i]);
        out[e] = p.back();
    }
    return out;
}

inline bool strip_light_line(double kx, double period, double kappa) {
    const double g = two_pi / period;
    for (double sgn : {-1.0, 1.0}) {
        const double d = std::remainder(kx - sgn * kappa, g);
        if (std::abs(d) < 1e-3) return true;
    }
    return false;
}

struct strip_matrix {
    matc h;
    bool light_line = false;
};

// Rows 2 s + mu for super-cell site s.
inline strip_matrix strip_hamiltonian(const strip_spec& st, double kx, const coupling_params& p, const strip_config& sc = {}) {
    p.validate();
    const int n = static_cast<int>(st.sites.size());
    const double kappa = p.kappa(), e2 = p.epsilon * p.epsilon;
    std::map<std::pair<long, long>, std::array<cplx, 3>> cache;
    auto key = [&](const vec2& d) { return std::make_pair(std::lround(d.x() / st.lattice.a * 1e8), std::lround(d.y() / st.lattice.a * 1e8)); };
    strip_matrix out;
    out.h = matc::Zero(2 * n, 2 * n);
    out.light_line = strip_light_line(kx, st.period, kappa);
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) {
            const vec2 d = st.sites[t] - st.sites[s];
            auto it = cache.find(key(d));
            if (it == cache.end()) it = cache.emplace(key(d), strip_pair_sum(d, s == t, kx, st.period, kappa, p.gamma, sc)).first;
            const auto& v = it->second;
            const double diag = s == t ? p.delta : 0.0;
            out.h(2 * s, 2 * t) = (v[0] + diag) * (1.0 - e2);
            out.h(2 * s, 2 * t + 1) = v[1] * (1.0 - 0.5 * e2);
            out.h(2 * s + 1, 2 * t) = v[2] * (1.0 - 0.5 * e2);
            out.h(2 * s + 1, 2 * t + 1) = v[0] - diag;
        }
    return out;
}

struct strip_spectrum_result {
    std::vector<double> kx;
    std::vector<Eigen::VectorXd> energies;
    std::vector<Eigen::VectorXd> w_top, w_bottom;
    std::vector<bool> light_line;
};

inline strip_spectrum_result strip_spectrum(const strip_spec& st, const coupling_params& p, const std::vector<double>& kx_grid,
                                            const strip_config& sc = {}, const executor& ex = {}) {
    strip_spectrum_result r;
    r.kx = kx_grid;
    auto rows = ex.map(static_cast<int>(kx_grid.size()), [&](int i) {
        const auto m = strip_hamiltonian(st, kx_grid[i], p, sc);
        const auto es = hermitian_eigen(m.h);
        const int dim = static_cast<int>(es.values.size());
        Eigen::VectorXd top = Eigen::VectorXd::Zero(dim), bottom = Eigen::VectorXd::Zero(dim);
        for (int c = 0; c < dim; ++c) {
            for (int s : st.top) top[c] += es.vectors.block(2 * s, c, 2, 1).squaredNorm();
            for (int s : st.bottom) bottom[c] += es.vectors.block(2 * s, c, 2, 1).squaredNorm();
        }
        return std::make_tuple(es.values, top, bottom, m.light_line);
    });
    for (auto& [e, t, b, l] : rows) {
        r.energies.push_back(e);
        r.w_top.push_back(t);
        r.w_bottom.push_back(b);
        r.light_line.push_back(l);
    }
    return r;
}

inline std::vector<double> uniform_kx_grid(const strip_spec& st, int n) {
    std::vector<double> g(n);
    const double half = std::numbers::pi / st.period;
    for (int i = 0; i < n; ++i) g[i] = -half + 2.0 * half * (i + 0.5) / n;
    return g;
}

}  // namespace dipolar
