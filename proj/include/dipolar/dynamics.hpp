#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "couplings.hpp"
#include "geometry.hpp"
#include "spectra.hpp"

namespace dipolar {

struct mode_analysis {
    double energy = 0.0;
    vecc amplitudes;  // rows 2i, 2i+1 for the i-th active site
    double q = 0.0;
    double w = 0.0;
    bool is_edge = false;
    bool q_defined = true;
};

// Matrix row of every lattice site, -1 for inactive ones.
inline std::vector<int> site_rows(const finite_lattice& lat) {
    std::vector<int> row(lat.size(), -1);
    int r = 0;
    for (int i = 0; i < lat.size(); ++i)
        if (lat.active[i]) row[i] = r++;
    return row;
}

// Average inter-site phase winding around the ring: the phase of the mean
// normalised link d_l^+ d_{l+1}. Inactive ring entries are skipped.
inline double quasi_momentum(const vecc& amplitudes, const std::vector<int>& edge_ring, const std::vector<int>& rows) {
    std::vector<int> ring;
    for (int s : edge_ring)
        if (rows[s] >= 0) ring.push_back(rows[s]);
    if (ring.size() < 2) throw domain_error("quasi-momentum needs at least two edge sites");
    cplx total = 0.0;
    const size_t n = ring.size();
    for (size_t l = 0; l < n; ++l) {
        const auto d0 = amplitudes.segment<2>(2 * ring[l]);
        const auto d1 = amplitudes.segment<2>(2 * ring[(l + 1) % n]);
        const cplx link = d0.dot(d1);
        if (link == cplx(0.0)) throw domain_error("quasi-momentum undefined: vanishing link on the edge ring");
        total += link / std::abs(link);
    }
    total /= static_cast<double>(n);
    if (total == cplx(0.0)) throw domain_error("quasi-momentum undefined: links cancel");
    return std::arg(total);
}

inline double edge_weight(const vecc& amplitudes, const std::vector<int>& edge_ring, const std::vector<int>& rows) {
    double w = 0.0;
    for (int s : edge_ring)
        if (rows[s] >= 0) w += amplitudes.segment<2>(2 * rows[s]).squaredNorm();
    return w;
}

inline std::vector<mode_analysis> eigenmodes(const finite_lattice& lat, const coupling_params& p, double w_threshold = 0.95) {
    const auto m = real_space_matrices(lat, p);
    const auto es = hermitian_eigen(m.H);
    const auto rows = site_rows(lat);
    std::vector<mode_analysis> out;
    for (int c = 0; c < es.values.size(); ++c) {
        mode_analysis a;
        a.energy = es.values[c];
        a.amplitudes = es.vectors.col(c);
        a.w = edge_weight(a.amplitudes, lat.edge_ring, rows);
        a.is_edge = a.w > w_threshold;
        try {
            a.q = quasi_momentum(a.amplitudes, lat.edge_ring, rows);
        } catch (const domain_error&) {
            a.q_defined = false;
            a.q = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(std::move(a));
    }
    return out;
}

enum class polarization { plus, minus, both_equal };

inline polarization parse_polarization(const std::string& s) {
    if (s == "plus") return polarization::plus;
    if (s == "minus") return polarization::minus;
    if (s == "both-equal" || s == "both_equal") return polarization::both_equal;
    throw invalid_parameter("unknown polarization: " + s);
}

inline std::string to_string(polarization p) {
    return p == polarization::plus ? "plus" : p == polarization::minus ? "minus" : "both-equal";
}

struct drive_spec {
    int site = -1;  // lattice index; -1 selects the leftmost active site
    double detuning = 0.0;
    double eta = 1e-3;
    polarization pol = polarization::both_equal;

    void validate() const {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw invalid_parameter("drive amplitude must be positive");
        if (!std::isfinite(detuning)) throw invalid_parameter("drive detuning must be finite");
    }
};

// Leftmost active site, lowest y on ties.
inline int leftmost_site(const finite_lattice& lat) {
    int best = -1;
    for (int i = 0; i < lat.size(); ++i) {
        if (!lat.active[i]) continue;
        if (best < 0) {
            best = i;
            continue;
        }
        const vec2 &p = lat.positions[i], &b = lat.positions[best];
        if (p.x() < b.x() - 1e-12 || (std::abs(p.x() - b.x()) <= 1e-12 && p.y() < b.y() - 1e-12)) best = i;
    }
    if (best < 0) throw invalid_parameter("lattice has no active sites");
    return best;
}

inline int resolve_drive_site(const finite_lattice& lat, const drive_spec& d) {
    if (d.site < 0) return leftmost_site(lat);
    if (d.site >= lat.size()) throw invalid_parameter("drive site out of range");
    if (!lat.active[d.site]) throw invalid_parameter("drive site is a defect");
    return d.site;
}

// (eta / 2) e_drive in matrix-row space.
inline vecc drive_vector(const finite_lattice& lat, const drive_spec& d) {
    const auto rows = site_rows(lat);
    const int r = rows[resolve_drive_site(lat, d)];
    vecc e = vecc::Zero(2 * lat.active_count());
    const double amp = 0.5 * d.eta;
    switch (d.pol) {
        case polarization::plus: e[2 * r] = amp; break;
        case polarization::minus: e[2 * r + 1] = amp; break;
        case polarization::both_equal:
            e[2 * r] = e[2 * r + 1] = amp / std::sqrt(2.0);
            break;
    }
    return e;
}

// Drive on for on <= t < off.
struct drive_schedule {
    double on = 0.0;
    double off = std::numeric_limits<double>::infinity();
    bool active(double t0, double t1) const { return t0 >= on - 1e-12 && t1 <= off + 1e-12; }
};

struct trajectory {
    std::vector<double> t;
    std::vector<vecc> amplitudes;
    std::vector<Eigen::VectorXd> populations;  // per active site, both components
    std::vector<double> total;
    std::vector<bool> driven;  // drive on during the step ending at t
    std::vector<int> sites;    // lattice index of each population entry
};

inline vecc steady_state(const finite_lattice& lat, const coupling_params& p, const drive_spec& d) {
    d.validate();
    const auto m = real_space_matrices(lat, p);
    const int dim = static_cast<int>(m.H.rows());
    const matc mm = m.H - d.detuning * matc::Identity(dim, dim) - cplx(0.0, 0.5) * m.G;
    const vecc rhs = drive_vector(lat, d);
    Eigen::PartialPivLU<matc> lu(mm);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) throw numeric_error("steady-state matrix is singular (undamped resonance)");
    vecc c = lu.solve(rhs);
    const double res = (mm * c - rhs).norm();
    if (res > 1e-10 * rhs.norm()) {
        c += lu.solve(rhs - mm * c);  // one refinement step
        if ((mm * c - rhs).norm() > 1e-10 * rhs.norm()) throw numeric_error("steady-state residual above tolerance");
    }
    return c;
}

// Exact affine propagator over dt for c' = L c + b, from the exponential of
// the bordered generator [[L, b], [0, 0]].
struct affine_step {
    matc phi;
    vecc shift;
};

inline affine_step make_step(const matc& generator, const vecc& source, double dt) {
    const int n = static_cast<int>(generator.rows());
    matc big = matc::Zero(n + 1, n + 1);
    big.topLeftCorner(n, n) = generator * dt;
    big.topRightCorner(n, 1) = source * dt;
    const matc e = big.exp();
    if (!e.allFinite()) throw numeric_error("propagator overflow");
    return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

inline trajectory evolve(const finite_lattice& lat, const coupling_params& p, const drive_spec& d, bool dissipative, double t_max, double dt,
                         const drive_schedule& schedule = {}, std::optional<vecc> initial = std::nullopt) {
    d.validate();
    if (!(dt > 0.0) || !(t_max >= 0.0)) throw invalid_parameter("time grid needs dt > 0 and t_max >= 0");
    const int steps = static_cast<int>(std::llround(t_max / dt));
    if (std::abs(steps * dt - t_max) > 1e-9 * std::max(1.0, t_max)) throw invalid_parameter("t_max must be a multiple of dt");
    const auto m = real_space_matrices(lat, p);
    const int dim = static_cast<int>(m.H.rows());
    matc gen = cplx(0.0, -1.0) * (m.H - d.detuning * matc::Identity(dim, dim));
    if (dissipative) gen -= 0.5 * m.G;
    const vecc src = cplx(0.0, 1.0) * drive_vector(lat, d);

    std::optional<affine_step> on, off;
    trajectory tr;
    tr.sites = m.sites;
    vecc c = initial ? *initial : vecc::Zero(dim);
    if (c.size() != dim) throw invalid_parameter("initial state has the wrong dimension");
    auto record = [&](double t, bool driven) {
        Eigen::VectorXd pop(dim / 2);
        for (int i = 0; i < dim / 2; ++i) pop[i] = c.segment<2>(2 * i).squaredNorm();
        tr.t.push_back(t);
        tr.amplitudes.push_back(c);
        tr.total.push_back(pop.sum());
        tr.populations.push_back(std::move(pop));
        tr.driven.push_back(driven);
    };
    record(0.0, false);
    for (int s = 0; s < steps; ++s) {
        const double t0 = s * dt, t1 = (s + 1) * dt;
        const bool drive = schedule.active(t0, t1);
        if (!drive && t0 < schedule.off - 1e-12 && t1 > schedule.off + 1e-12) throw invalid_parameter("drive switch-off must lie on the time grid");
        if (!drive && t0 < schedule.on - 1e-12 && t1 > schedule.on + 1e-12) throw invalid_parameter("drive switch-on must lie on the time grid");
        auto& step = drive ? on : off;
        if (!step) step = make_step(gen, drive ? src : vecc::Zero(dim), dt);
        c = step->phi * c + step->shift;
        if (!c.allFinite()) throw numeric_error("non-finite amplitudes during evolution");
        record(t1, drive);
    }
    return tr;
}

struct decay_fit {
    double rate = 0.0;
    double rms_residual = 0.0;
    std::vector<std::string> warnings;
};

// Least-squares slope of ln P over samples with t in [t0, t1]; positive rate = decay.
inline decay_fit decay_rate_fit(const std::vector<double>& t, const std::vector<double>& pop, double t0, double t1) {
    std::vector<double> x, y;
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] >= t0 - 1e-12 && t[i] <= t1 + 1e-12) {
            if (!(pop[i] > 0.0)) throw domain_error("population must be positive inside the fit window");
            x.push_back(t[i]);
            y.push_back(std::log(pop[i]));
        }
    if (x.size() < 2) throw invalid_parameter("fit window needs at least two samples");
    Eigen::MatrixXd a(x.size(), 2);
    Eigen::VectorXd b(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = x[i];
        b[i] = y[i];
    }
    const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
    decay_fit f;
    f.rate = -coef[1];
    f.rms_residual = std::sqrt((a * coef - b).squaredNorm() / static_cast<double>(x.size()));
    double rise = 0.0;
    for (size_t i = 1; i < y.size(); ++i) rise = std::max(rise, y[i] - y[i - 1]);
    if (rise > f.rms_residual && rise > 1e-12) f.warnings.push_back("ill-conditioned fit: population oscillates more than the fit residual");
    return f;
}

inline decay_fit decay_rate_fit(const trajectory& tr, double t0, double t1) {
    for (size_t i = 1; i < tr.t.size(); ++i)
        if (tr.t[i] > t0 + 1e-12 && tr.t[i] <= t1 + 1e-12 && tr.driven[i]) throw invalid_parameter("drive is on inside the fit window");
    return decay_rate_fit(tr.t, tr.total, t0, t1);
}

// Population-weighted signed ring offset from the drive site; negative means
// clockwise (the ring runs counter-clockwise).
inline double ring_displacement(const Eigen::VectorXd& populations, const finite_lattice& lat, int drive_site) {
    const auto rows = site_rows(lat);
    const auto& ring = lat.edge_ring;
    const int n = static_cast<int>(ring.size());
    const auto it = std::find(ring.begin(), ring.end(), drive_site);
    if (it == ring.end()) throw invalid_parameter("drive site is not on the edge ring");
    const int origin = static_cast<int>(it - ring.begin());
    double num = 0.0, den = 0.0;
    for (int l = 0; l < n; ++l) {
        int off = ((l - origin) % n + n) % n;
        if (off > n / 2) off -= n;
        const double pl = populations[rows[ring[l]]];
        num += pl * off;
        den += pl;
    }
    return den > 0.0 ? num / den : 0.0;
}

// Fraction of the edge ring whose population exceeds rel times the largest site population.
inline double ring_coverage(const Eigen::VectorXd& populations, const finite_lattice& lat, double rel = 1e-3) {
    const auto rows = site_rows(lat);
    const double peak = populations.maxCoeff();
    int lit = 0;
    for (int s : lat.edge_ring)
        if (populations[rows[s]] > rel * peak) ++lit;
    return lat.edge_ring.empty() ? 0.0 : static_cast<double>(lit) / lat.edge_ring.size();
}

inline Eigen::VectorXd site_populations(const vecc& c) {
    Eigen::VectorXd pop(c.size() / 2);
    for (int i = 0; i < pop.size(); ++i) pop[i] = c.segment<2>(2 * i).squaredNorm();
    return pop;
}

}  // namespace dipolar
