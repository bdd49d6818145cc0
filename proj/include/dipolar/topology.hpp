#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "couplings.hpp"
#include "ewald.hpp"
#include "parallel.hpp"

namespace dipolar {

struct chern_result {
    std::vector<int> chern;
    std::vector<double> raw;
    int n1 = 0, n2 = 0;
    Eigen::Vector2d offset{0.5, 0.5};  // in units of one grid step
    double min_gap = 0.0;
    int nudged = 0;
};

// Eigenvectors of a k-grid; the Hamiltonian must be periodic on the torus.
struct band_grid {
    int n1 = 0, n2 = 0;
    std::vector<matc> vectors;            // index i * n2 + j
    std::vector<Eigen::VectorXd> values;
    int nudged = 0;
};

template <class H>
band_grid solve_grid(H&& hamiltonian, int n1, int n2, const executor& ex = {}) {
    band_grid g;
    g.n1 = n1;
    g.n2 = n2;
    auto rows = ex.map(n1 * n2, [&](int idx) {
        Eigen::SelfAdjointEigenSolver<matc> es(hamiltonian(idx / n2, idx % n2));
        if (es.info() != Eigen::Success) throw numeric_error("eigensolver failed on Chern grid");
        return std::make_pair(matc(es.eigenvectors()), Eigen::VectorXd(es.eigenvalues()));
    });
    for (auto& [v, e] : rows) {
        g.vectors.push_back(std::move(v));
        g.values.push_back(std::move(e));
    }
    return g;
}

// Link-variable lattice field strength, one integer per band.
inline chern_result chern_from_grid(const band_grid& g, double gap_tol) {
    const int n1 = g.n1, n2 = g.n2;
    const int bands = static_cast<int>(g.values.front().size());
    chern_result r;
    r.n1 = n1;
    r.n2 = n2;
    r.nudged = g.nudged;
    r.min_gap = std::numeric_limits<double>::infinity();
    for (int idx = 0; idx < n1 * n2; ++idx)
        for (int b = 0; b + 1 < bands; ++b) {
            const double gap = g.values[idx][b + 1] - g.values[idx][b];
            if (gap < r.min_gap) r.min_gap = gap;
            if (gap < gap_tol) {
                const Eigen::Vector2d at((idx / n2 + 0.5) / n1, (idx % n2 + 0.5) / n2);
                throw degenerate_band_error("bands " + std::to_string(b) + " and " + std::to_string(b + 1) + " touch on the grid", b, at, gap);
            }
        }
    auto at = [&](int i, int j) -> const matc& { return g.vectors[((i % n1 + n1) % n1) * n2 + (j % n2 + n2) % n2]; };
    for (int b = 0; b < bands; ++b) {
        auto link = [&](int i, int j, int di, int dj) {
            const cplx o = at(i, j).col(b).dot(at(i + di, j + dj).col(b));
            const double m = std::abs(o);
            if (m < 1e-14) throw numeric_error("vanishing overlap between neighbouring grid points");
            return o / m;
        };
        double total = 0.0;
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) {
                const cplx plaquette = link(i, j, 1, 0) * link(i + 1, j, 0, 1) * std::conj(link(i, j + 1, 1, 0)) * std::conj(link(i, j, 0, 1));
                total += std::arg(plaquette);
            }
        const double c = total / two_pi;
        r.raw.push_back(c);
        r.chern.push_back(static_cast<int>(std::lround(c)));
        if (std::abs(c - std::lround(c)) > 1e-6) throw numeric_error("Chern number not quantised: " + std::to_string(c));
    }
    return r;
}

// Grid point k(i, j) = ((i + o1) / n1) b1 + ((j + o2) / n2) b2, pushed off light circles.
inline std::vector<vec2> chern_k_grid(const lattice_spec& s, int n1, int n2, const Eigen::Vector2d& offset, double kappa, int* nudged = nullptr) {
    std::vector<vec2> ks;
    int moved = 0;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            vec2 k = (i + offset.x()) / n1 * s.b1 + (j + offset.y()) / n2 * s.b2;
            const auto hit = nearest_circle(k, s, kappa);
            if (std::abs(hit.distance) < 1e-6) {
                const vec2 q = k + hit.image;
                k += (1e-6 - hit.distance) * q / q.norm();
                ++moved;
            }
            ks.push_back(k);
        }
    if (nudged) *nudged = moved;
    return ks;
}

// Kernel sums on a Chern grid, reusable across (delta, epsilon).
struct grid_sums {
    int n1 = 0, n2 = 0;
    Eigen::Vector2d offset;
    std::vector<kernel_sums> sums;
    std::vector<kernel_sums> symmetry_sums;  // high-symmetry points the shifted grid never samples
    int nudged = 0;
};

// Distinct high-symmetry points, with K' on the honeycomb lattice.
inline std::vector<vec2> symmetry_points(const lattice_spec& s) {
    std::vector<vec2> pts;
    for (const auto& [label, k] : high_symmetry_loop(s))
        if (std::none_of(pts.begin(), pts.end(), [&](const vec2& q) { return (q - k).norm() < 1e-12; })) pts.push_back(k);
    if (s.kind == lattice_kind::honeycomb) pts.push_back(vec2(-pts[1].x(), pts[1].y()));
    return pts;
}

inline grid_sums compute_grid_sums(const lattice_spec& s, const ewald_config& cfg, int n1, int n2, const Eigen::Vector2d& offset,
                                   double kappa = two_pi, const executor& ex = {}) {
    if (n1 < 8 || n2 < 8) throw invalid_parameter("Chern grid needs at least 8 x 8 points");
    grid_sums g;
    g.n1 = n1;
    g.n2 = n2;
    g.offset = offset;
    const auto ks = chern_k_grid(s, n1, n2, offset, kappa, &g.nudged);
    const auto offsets = basis_offsets(s);
    g.sums = ex.map(n1 * n2, [&](int i) { return ewald_kernel_sums(ks[i], offsets, s, kappa, cfg); });
    for (const auto& k : symmetry_points(s)) g.symmetry_sums.push_back(ewald_kernel_sums(k, offsets, s, kappa, cfg));
    return g;
}

// Smallest adjacent-band gap over the high-symmetry points; throws when
// below gap_tol since a touching there is invisible to the shifted grid.
inline double check_symmetry_gaps(const grid_sums& g, const lattice_spec& s, const coupling_params& p, double gap_tol) {
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& t : g.symmetry_sums) {
        Eigen::SelfAdjointEigenSolver<matc> es(assemble_from_sums(t, s, p), Eigen::EigenvaluesOnly);
        const auto& e = es.eigenvalues();
        for (int b = 0; b + 1 < e.size(); ++b) {
            const double gap = e[b + 1] - e[b];
            smallest = std::min(smallest, gap);
            if (gap < gap_tol) {
                const Eigen::Vector2d at(s.a1.dot(t.k) / two_pi, s.a2.dot(t.k) / two_pi);
                throw degenerate_band_error("bands " + std::to_string(b) + " and " + std::to_string(b + 1) + " touch at a high-symmetry point", b, at, gap);
            }
        }
    }
    return smallest;
}

inline chern_result chern_from_sums(const grid_sums& g, const lattice_spec& s, const coupling_params& p, double gap_tol, const executor& ex = {}) {
    const double symmetric_gap = check_symmetry_gaps(g, s, p, gap_tol);
    auto grid = solve_grid([&](int i, int j) { return assemble_from_sums(g.sums[i * g.n2 + j], s, p, true); }, g.n1, g.n2, ex);
    grid.nudged = g.nudged;
    auto r = chern_from_grid(grid, gap_tol);
    r.offset = g.offset;
    r.min_gap = std::min(r.min_gap, symmetric_gap);
    return r;
}

inline chern_result chern_numbers(const lattice_spec& s, const coupling_params& p, const ewald_config& cfg, int n1, int n2,
                                  double gap_tol = 1e-3, Eigen::Vector2d offset = {0.5, 0.5}, const executor& ex = {}) {
    p.validate();
    cfg.validate();
    return chern_from_sums(compute_grid_sums(s, cfg, n1, n2, offset, p.kappa(), ex), s, p, gap_tol, ex);
}

// Two-band lattice Dirac model sin kx sx + sin ky sy + (m + cos kx + cos ky) sz
// on the unit torus.
inline matc dirac_model(double kx, double ky, double mass) {
    matc h(2, 2);
    const double dz = mass + std::cos(kx) + std::cos(ky);
    h << dz, cplx(std::sin(kx), -std::sin(ky)), cplx(std::sin(kx), std::sin(ky)), -dz;
    return h;
}

inline chern_result dirac_chern(int n1, int n2, double mass = -1.0, Eigen::Vector2d offset = {0.5, 0.5}) {
    auto grid = solve_grid(
        [&](int i, int j) { return dirac_model(two_pi * (i + offset.x()) / n1, two_pi * (j + offset.y()) / n2, mass); }, n1, n2);
    auto r = chern_from_grid(grid, 1e-9);
    r.offset = offset;
    return r;
}

struct phase_cell {
    double delta = 0.0, epsilon = 0.0;
    std::vector<int> chern;  // empty when the cell is a boundary
    double min_gap = 0.0;
    bool boundary = false;
};

struct phase_diagram_result {
    std::vector<double> deltas, epsilons;
    std::vector<phase_cell> cells;  // delta-major
    int n1 = 0, n2 = 0;
    Eigen::Vector2d offset;
    int nudged = 0;
};

// Smallest adjacent-band gap on the grid and at the high-symmetry points,
// without the Chern evaluation.
inline double grid_min_gap(const grid_sums& g, const lattice_spec& s, const coupling_params& p) {
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& t : g.sums) {
        Eigen::SelfAdjointEigenSolver<matc> es(assemble_from_sums(t, s, p, true), Eigen::EigenvaluesOnly);
        const auto& e = es.eigenvalues();
        for (int b = 0; b + 1 < e.size(); ++b) gap = std::min(gap, e[b + 1] - e[b]);
    }
    return std::min(gap, check_symmetry_gaps(g, s, p, 0.0));
}

inline phase_diagram_result phase_diagram(const lattice_spec& s, const ewald_config& cfg, const std::vector<double>& deltas,
                                          const std::vector<double>& epsilons, int n, double gap_tol = 1e-3, const executor& ex = {}) {
    if (deltas.empty() || epsilons.empty()) throw invalid_parameter("phase diagram grids must be non-empty");
    phase_diagram_result out;
    out.deltas = deltas;
    out.epsilons = epsilons;
    out.n1 = out.n2 = n;
    out.offset = {0.5, 0.5};
    const auto g = compute_grid_sums(s, cfg, n, n, out.offset, two_pi, ex);
    out.nudged = g.nudged;
    const int ne = static_cast<int>(epsilons.size());
    out.cells = ex.map(static_cast<int>(deltas.size()) * ne, [&](int idx) {
        phase_cell c;
        c.delta = deltas[idx / ne];
        c.epsilon = epsilons[idx % ne];
        coupling_params p;
        p.delta = c.delta;
        p.epsilon = c.epsilon;
        try {
            const auto r = chern_from_sums(g, s, p, gap_tol);
            c.chern = r.chern;
            c.min_gap = r.min_gap;
        } catch (const degenerate_band_error& e) {
            c.boundary = true;
            c.min_gap = e.gap;
        } catch (const numeric_error&) {
            c.boundary = true;
            c.min_gap = grid_min_gap(g, s, p);
        }
        return c;
    });
    return out;
}

inline double gap_at(const vec2& k, const lattice_spec& s, const coupling_params& p, const ewald_config& cfg) {
    const auto sums = ewald_kernel_sums(k, basis_offsets(s), s, p.kappa(), cfg);
    Eigen::SelfAdjointEigenSolver<matc> es(assemble_from_sums(sums, s, p), Eigen::EigenvaluesOnly);
    const auto& e = es.eigenvalues();
    double gap = std::numeric_limits<double>::infinity();
    for (int b = 0; b + 1 < e.size(); ++b) gap = std::min(gap, e[b + 1] - e[b]);
    return gap;
}

// Off-grid minimum of the adjacent-band gap: compass search started from the
// smallest grid gap and from the high-symmetry points.
inline double bulk_min_gap(const grid_sums& g, const lattice_spec& s, const coupling_params& p, const ewald_config& cfg) {
    const auto ks = chern_k_grid(s, g.n1, g.n2, g.offset, p.kappa());
    int best = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(g.sums.size()); ++i) {
        Eigen::SelfAdjointEigenSolver<matc> es(assemble_from_sums(g.sums[i], s, p, true), Eigen::EigenvaluesOnly);
        const auto& e = es.eigenvalues();
        for (int b = 0; b + 1 < e.size(); ++b)
            if (e[b + 1] - e[b] < best_gap) {
                best_gap = e[b + 1] - e[b];
                best = i;
            }
    }
    std::vector<vec2> seeds{ks[best]};
    for (const auto& [label, k] : high_symmetry_loop(s)) seeds.push_back(k);
    if (s.kind == lattice_kind::honeycomb) seeds.push_back(vec2(-seeds[2].x(), seeds[2].y()));  // K prime
    const double step0 = 0.5 * std::min(s.b1.norm() / g.n1, s.b2.norm() / g.n2);
    double result = best_gap;
    for (vec2 k : seeds) {
        auto f = [&](const vec2& q) {
            try {
                return gap_at(q, s, p, cfg);
            } catch (const divergence_error&) {
                return std::numeric_limits<double>::infinity();
            }
        };
        double fk = f(k);
        for (double step = step0; step > 1e-4 * step0;) {
            bool moved = false;
            for (const vec2 d : {vec2(1, 0), vec2(-1, 0), vec2(0, 1), vec2(0, -1)}) {
                const double ft = f(k + step * d);
                if (ft < fk) {
                    fk = ft;
                    k += step * d;
                    moved = true;
                    break;
                }
            }
            if (!moved) step *= 0.5;
        }
        result = std::min(result, fk);
    }
    return result;
}

struct transition_point {
    double lo = 0.0, hi = 0.0;  // bracket whose ends carry different Chern vectors
    std::vector<int> chern_lo, chern_hi;
    double min_gap = 0.0;       // grid minimum gap at the bracket midpoint
    bool degenerate = false;
};

// Bisect on the Chern vector in delta between two cells; stops on a grid
// degeneracy or when the bracket is below tol.
inline transition_point locate_transition(const grid_sums& g, const lattice_spec& s, coupling_params p, double lo, double hi,
                                          double tol = 1e-3, double gap_tol = 1e-3) {
    auto chern_at = [&](double d) {
        p.delta = d;
        return chern_from_sums(g, s, p, gap_tol).chern;
    };
    transition_point t;
    t.chern_lo = chern_at(lo);
    t.chern_hi = chern_at(hi);
    if (t.chern_lo == t.chern_hi) throw invalid_parameter("bracket ends share a Chern vector");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        std::vector<int> c;
        try {
            c = chern_at(mid);
        } catch (const degenerate_band_error&) {
            t.degenerate = true;
            lo = hi = mid;
            break;
        }
        (c == t.chern_lo ? lo : hi) = mid;
    }
    t.lo = lo;
    t.hi = hi;
    p.delta = 0.5 * (lo + hi);
    t.min_gap = grid_min_gap(g, s, p);
    return t;
}

}  // namespace dipolar
