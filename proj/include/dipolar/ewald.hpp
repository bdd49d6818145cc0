#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "couplings.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "special.hpp"

namespace dipolar {

struct ewald_config {
    double gamma_reg = 0.0;     // 0 selects (2 pi / (8 a))^2
    double split_radius = 0.0;  // 0 selects 3 a
    double g_shells = 40.0;     // reciprocal radius cap in units of kappa
    double r_shells = 60.0;     // real-space radius floor for direct sums, in lambda
    std::vector<double> damp_etas{0.4, 0.2, 0.1, 0.05};
    double tol = 1e-4;
    double real_cut = 45.0;     // gamma r^2 beyond which the short-range part is dropped
    double recip_cut = 40.0;    // (q - kappa)^2 / (4 gamma) beyond which images are dropped

    ewald_config resolved(const lattice_spec& s) const {
        ewald_config c = *this;
        if (c.gamma_reg <= 0.0) c.gamma_reg = std::pow(two_pi / (8.0 * s.a), 2);
        if (c.split_radius <= 0.0) c.split_radius = 3.0 * s.a;
        return c;
    }
    void validate() const {
        if (!(gamma_reg >= 0.0) || !(split_radius >= 0.0)) throw invalid_parameter("regulator and split radius must be positive");
        if (!(tol > 0.0)) throw invalid_parameter("tol must be positive");
        if (!(g_shells >= 1.0) || !(r_shells >= 1.0)) throw invalid_parameter("shell cutoffs must be at least 1");
        if (damp_etas.empty()) throw invalid_parameter("damping schedule is empty");
        for (double e : damp_etas)
            if (!(e > 0.0)) throw invalid_parameter("damping strengths must be positive");
    }
};

// v_{m,n}(r) = f_m(kappa r) e^{i n phi}; f_1 = cos x / x, f_2 = sin x / x^2, f_3 = cos x / x^3
struct kernel_id {
    int m = 1;
    int n = 0;  // -2, 0 or 2
};

inline void check_kernel(kernel_id k) {
    if (k.m < 1 || k.m > 3 || (k.n != 0 && k.n != 2 && k.n != -2)) throw invalid_parameter("unsupported kernel");
}

struct ksum {
    cplx value{};
    double divergence_distance = 0.0;
    bool converged = true;
    int real_terms = 0;
    int recip_terms = 0;
    bool nudged = false;
};

inline double radial_kernel(int m, double x) {
    switch (m) {
        case 1: return std::cos(x) / x;
        case 2: return std::sin(x) / (x * x);
        default: return std::cos(x) / (x * x * x);
    }
}

// Index into 9-slot kernel tables: m-major, n in (-2, 0, 2).
inline constexpr int kslot(int m, int n) { return 3 * (m - 1) + (n / 2 + 1); }

inline int regulator_twice_s(int m) { return m == 3 ? 5 : 3; }

namespace detail {

inline vec2 reciprocal_image(const lattice_spec& s, int i, int j) { return double(i) * s.b1 + double(j) * s.b2; }

// Index ranges covering all lattice vectors within radius r of -centre.
inline std::array<int, 4> index_box(const vec2& centre, double r, const vec2& d1, const vec2& d2, const vec2& dual1, const vec2& dual2) {
    (void)d1;
    (void)d2;
    const double c1 = -centre.dot(dual1) / two_pi, c2 = -centre.dot(dual2) / two_pi;
    const double w1 = r * dual1.norm() / two_pi, w2 = r * dual2.norm() / two_pi;
    return {int(std::floor(c1 - w1)) - 1, int(std::ceil(c1 + w1)) + 1, int(std::floor(c2 - w2)) - 1, int(std::ceil(c2 + w2)) + 1};
}

}  // namespace detail

struct circle_hit {
    double distance;  // |k+G| - kappa for the image closest to the circle
    vec2 image;
};

inline circle_hit nearest_circle(const vec2& k, const lattice_spec& s, double kappa) {
    const double reach = kappa + 2.0 * std::max(s.b1.norm(), s.b2.norm());
    const auto box = detail::index_box(k, reach, s.b1, s.b2, s.a1, s.a2);
    circle_hit best{std::numeric_limits<double>::infinity(), vec2::Zero()};
    for (int i = box[0]; i <= box[1]; ++i)
        for (int j = box[2]; j <= box[3]; ++j) {
            const vec2 g = detail::reciprocal_image(s, i, j);
            const double d = (k + g).norm() - kappa;
            if (std::abs(d) < std::abs(best.distance)) best = {d, g};
        }
    return best;
}

inline double divergence_distance(const vec2& k, const lattice_spec& s, double kappa = two_pi) {
    return nearest_circle(k, s, kappa).distance;
}

// Push k radially outward from the nearest light circle when it sits within
// 1e-9 of it. Returns true when moved.
inline bool nudge_off_circle(vec2& k, const lattice_spec& s, double kappa) {
    const auto hit = nearest_circle(k, s, kappa);
    if (std::abs(hit.distance) >= 1e-9) return false;
    const vec2 q = k + hit.image;
    k += (1e-8 - hit.distance) * q / q.norm();
    return true;
}

// Unregulated radial transforms U_{m,n}(q) = int_0^inf f_m(kappa r) J_n(q r) r dr
// (finite part for m = 3, n = 0).
inline double closed_form_transform(int m, int n, double q, double kappa) {
    const double k2 = kappa * kappa, k3 = k2 * kappa;
    if (q == kappa) throw divergence_error("transform evaluated on the light circle", vec2::Zero());
    if (q > kappa) {
        const double s = std::sqrt(q * q - k2), t = std::asin(kappa / q);
        switch (m * 10 + n) {
            case 10: return 1.0 / (kappa * s);
            case 12: return (1.0 - 2.0 * k2 / (q * q)) / (kappa * s);
            case 20: return t / k2;
            case 22: return (kappa / q) * std::sqrt(1.0 - k2 / (q * q)) / k2;
            case 30: return (-s - kappa * t) / k3;
            default: return (q / 3.0) * std::pow(1.0 - k2 / (q * q), 1.5) / k3;
        }
    }
    switch (m * 10 + n) {
        case 20: return 0.5 * special::pi / k2;
        case 30: return -0.5 * special::pi * kappa / k3;
        default: return 0.0;
    }
}

struct radial_context {
    double kappa, gamma, split;
    double r_max() const { return std::sqrt(45.0 / gamma); }
};

// T_{m,n}(q) = int_0^inf Q(s_m, gamma r^2) f_m(kappa r) J_n(q r) r dr for all six kernels,
// ordered (1,0) (1,2) (2,0) (2,2) (3,0) (3,2).
inline std::array<double, 6> short_range_transforms(double q, const radial_context& c) {
    const double kappa = c.kappa, g = c.gamma, rmax = c.r_max();
    const double k2 = kappa * kappa, k3 = k2 * kappa;
    const int panels = static_cast<int>(std::ceil((q + kappa) * rmax)) + 16;
    using arr = Eigen::Array<double, 6, 1>;
    arr sum = special::integrate(
        [&](double r) {
            const double x = g * r * r;
            const double q3 = special::gamma_q_half(3, x), q5 = special::gamma_q_half(5, x);
            const double cs = std::cos(kappa * r), sn = std::sin(kappa * r);
            const auto j = special::bessel_j012(q * r);
            arr v;
            v[0] = q3 * cs / kappa * j.j0;
            v[1] = q3 * cs / kappa * j.j2;
            v[2] = q3 * sn / (k2 * r) * j.j0;
            v[3] = q3 * sn / (k2 * r) * j.j2;
            v[4] = (q5 * cs * j.j0 - std::exp(-x)) / (k3 * r * r);
            v[5] = q5 * cs * j.j2 / (k3 * r * r);
            return v;
        },
        0.0, rmax, panels);
    sum[4] -= std::sqrt(special::pi * g) / k3;
    return {sum[0], sum[1], sum[2], sum[3], sum[4], sum[5]};
}

// Pieces of the long-range radial integral of the 1/r kernel,
// (1/kappa) int_0^inf xi_L cos(kappa r) J_n(q r) dr, split at r = c.
struct one_over_r_parts {
    double head = 0.0;       // int_0^c xi_L cos J_n
    double head_asym = 0.0;  // int_0^c xi_L cos A_n (large-argument Bessel form)
    double tail = 0.0;       // int_0^inf xi_L cos A_n (analytic tail)
    double remainder = 0.0;  // int_c^inf xi_L cos (J_n - A_n)
    double total() const { return head - head_asym + tail + remainder; }
};

struct tail_parts {
    double divergent = 0.0;  // theta(q - kappa) / sqrt(q - kappa) branch
    double bounded = 0.0;
    double total() const { return divergent + bounded; }
};

inline double bessel_phase(int n) { return special::pi * (2.0 * n + 1.0) / 4.0; }

// int_0^inf r^{-1/2} cos(g r - phase_n) dr; vanishes for g < 0
inline double theta_integral(int n, double g) {
    if (g <= 0.0) return 0.0;
    return (n == 2 ? -1.0 : 1.0) * std::sqrt(special::pi / g);
}

// int_0^inf Q(3/2, gamma r^2) r^{-1/2} cos(g r - phase_n) dr via r = u^2
inline double regulated_fresnel(int n, double g, const radial_context& c) {
    const double umax = std::sqrt(c.r_max()), ph = bessel_phase(n);
    const int panels = static_cast<int>(std::ceil(std::abs(g) * c.r_max())) + 8;
    return 2.0 * special::integrate(
                     [&](double u) {
                         const double r = u * u;
                         return special::gamma_q_half(3, c.gamma * r * r) * std::cos(g * r - ph);
                     },
                     0.0, umax, panels);
}

inline tail_parts analytic_tail(int n, double q, double kappa, double gamma) {
    if (n != 0 && n != 2) throw invalid_parameter("analytic tail needs n = 0 or 2");
    if (!(q > 0.0)) throw domain_error("analytic tail needs a positive image radius");
    if (q == kappa) throw divergence_error("analytic tail on the light circle", vec2::Zero());
    const radial_context c{kappa, gamma, 0.0};
    const double pre = std::sqrt(2.0 / (special::pi * q)) / kappa;
    tail_parts t;
    t.divergent = pre * 0.5 * theta_integral(n, q - kappa);
    t.bounded = pre * 0.5 * (theta_integral(n, q + kappa) - regulated_fresnel(n, q + kappa, c) - regulated_fresnel(n, q - kappa, c));
    return t;
}

inline one_over_r_parts one_over_r_radial(int n, double q, const radial_context& c) {
    const double kappa = c.kappa, split = c.split, ph = bessel_phase(n);
    const double amp = std::sqrt(2.0 / (special::pi * q));
    auto jn = [n](double x) {
        const auto j = special::bessel_j012(x);
        return n == 0 ? j.j0 : j.j2;
    };
    const int head_panels = static_cast<int>(std::ceil((q + kappa) * split)) + 4;
    one_over_r_parts p;
    double plain_head = 0.0;  // int_0^c cos J_n, unregulated
    {
        const auto both = special::integrate(
            [&](double r) {
                const double cs = std::cos(kappa * r);
                const double j = jn(q * r);
                return Eigen::Array2d(special::gamma_p_half(3, c.gamma * r * r) * cs * j, cs * j);
            },
            0.0, split, head_panels);
        p.head = both[0] / kappa;
        plain_head = both[1];
    }
    double plain_head_asym = 0.0;  // int_0^c cos A_n, unregulated
    {
        const double umax = std::sqrt(split);
        const auto both = special::integrate(
            [&](double u) {
                const double r = u * u;
                const double w = 2.0 * std::cos(kappa * r) * std::cos(q * r - ph);
                return Eigen::Array2d(special::gamma_p_half(3, c.gamma * r * r) * w, w);
            },
            0.0, umax, head_panels);
        p.head_asym = amp * both[0] / kappa;
        plain_head_asym = amp * both[1];
    }
    const auto t = analytic_tail(n, q, kappa, c.gamma);
    p.tail = t.total();
    // int_c^inf cos (J_n - A_n) from the exact unregulated transform, minus its short-range share
    const double full_diff = kappa * closed_form_transform(1, n, q, kappa) - amp * 0.5 * (theta_integral(n, q + kappa) + theta_integral(n, q - kappa));
    double short_tail = 0.0;
    if (c.r_max() > split) {
        const int panels = static_cast<int>(std::ceil((q + kappa) * (c.r_max() - split))) + 8;
        short_tail = special::integrate(
            [&](double r) {
                const double d = jn(q * r) - amp / std::sqrt(r) * std::cos(q * r - ph);
                return special::gamma_q_half(3, c.gamma * r * r) * std::cos(kappa * r) * d;
            },
            split, c.r_max(), panels);
    }
    p.remainder = (full_diff - (plain_head - plain_head_asym) - short_tail) / kappa;
    return p;
}

// Long-range radial integrals R_{m,|n|}(q) for the six kernels, same order as short_range_transforms.
inline std::array<double, 6> long_range_transforms(double q, const radial_context& c, bool split_one_over_r = true) {
    const auto t = short_range_transforms(q, c);
    std::array<double, 6> out{};
    const int ms[6] = {1, 1, 2, 2, 3, 3}, ns[6] = {0, 2, 0, 2, 0, 2};
    for (int i = 0; i < 6; ++i) {
        if (ns[i] == 2 && q == 0.0) continue;
        out[i] = closed_form_transform(ms[i], ns[i], q, c.kappa) - t[i];
    }
    if (split_one_over_r && q * c.split >= 1.0) {
        out[0] = one_over_r_radial(0, q, c).total();
        out[1] = one_over_r_radial(2, q, c).total();
    }
    return out;
}

// Sums S_{m,n}(k; tau) for all nine kernels and a set of offsets.
struct kernel_sums {
    vec2 k;
    std::vector<vec2> offsets;
    std::vector<std::array<cplx, 9>> values;  // per offset, slot kslot(m, n)
    double divergence_distance = 0.0;
    bool nudged = false;
    int real_terms = 0;
    int recip_terms = 0;
};

inline kernel_sums ewald_kernel_sums(vec2 k, const std::vector<vec2>& offsets, const lattice_spec& s, double kappa, const ewald_config& cfg_in,
                                     bool allow_nudge = true, bool split_one_over_r = true) {
    const ewald_config cfg = cfg_in.resolved(s);
    kernel_sums out;
    out.offsets = offsets;
    out.values.assign(offsets.size(), {});
    if (allow_nudge) out.nudged = nudge_off_circle(k, s, kappa);
    out.k = k;
    const auto hit = nearest_circle(k, s, kappa);
    out.divergence_distance = hit.distance;
    if (std::abs(hit.distance) < 1e-13 * kappa) throw divergence_error("k lies on a light circle", hit.image);

    const double g = cfg.gamma_reg;
    const radial_context ctx{kappa, g, cfg.split_radius};

    // short-range real-space part
    const double rcut = std::sqrt(cfg.real_cut / g);
    for (size_t o = 0; o < offsets.size(); ++o) {
        const vec2& tau = offsets[o];
        const auto box = detail::index_box(tau, rcut, s.a1, s.a2, s.b1, s.b2);
        auto& acc = out.values[o];
        for (int i = box[0]; i <= box[1]; ++i)
            for (int j = box[2]; j <= box[3]; ++j) {
                const vec2 r = tau + double(i) * s.a1 + double(j) * s.a2;
                const double d = r.norm();
                if (d > rcut || d < 1e-12 * s.a) continue;
                const double x = g * d * d;
                const double q3 = special::gamma_q_half(3, x), q5 = special::gamma_q_half(5, x);
                const double kr = kappa * d;
                const cplx ph = std::polar(1.0, k.dot(r));
                const cplx e2 = cplx(r.x(), r.y()) * cplx(r.x(), r.y()) / (d * d);
                const double f[3] = {q3 * std::cos(kr) / kr, q3 * std::sin(kr) / (kr * kr), q5 * std::cos(kr) / (kr * kr * kr)};
                for (int m = 0; m < 3; ++m) {
                    acc[3 * m + 0] += ph * f[m] * std::conj(e2);
                    acc[3 * m + 1] += ph * f[m];
                    acc[3 * m + 2] += ph * f[m] * e2;
                }
                ++out.real_terms;
            }
    }

    // long-range reciprocal part
    const double qcut = std::min(kappa + 2.0 * std::sqrt(g * cfg.recip_cut), cfg.g_shells * kappa);
    const auto box = detail::index_box(k, qcut, s.b1, s.b2, s.a1, s.a2);
    const double norm = two_pi / s.cell_area();
    for (int i = box[0]; i <= box[1]; ++i)
        for (int j = box[2]; j <= box[3]; ++j) {
            const vec2 G = detail::reciprocal_image(s, i, j);
            const vec2 kg = k + G;
            const double q = kg.norm();
            if (q > qcut) continue;
            const auto R = long_range_transforms(q, ctx, split_one_over_r);
            const cplx e2 = q > 0.0 ? cplx(kg.x(), kg.y()) * cplx(kg.x(), kg.y()) / (q * q) : cplx(1.0);
            for (size_t o = 0; o < offsets.size(); ++o) {
                const cplx ph = norm * std::polar(1.0, -G.dot(offsets[o]));
                auto& acc = out.values[o];
                for (int m = 0; m < 3; ++m) {
                    // i^{|n|} = -1 for n = +-2
                    acc[3 * m + 0] += -ph * R[2 * m + 1] * std::conj(e2);
                    acc[3 * m + 1] += ph * R[2 * m];
                    acc[3 * m + 2] += -ph * R[2 * m + 1] * e2;
                }
            }
            ++out.recip_terms;
        }
    return out;
}

inline ksum lattice_sum(kernel_id kern, const vec2& k, const vec2& tau, const lattice_spec& s, const ewald_config& cfg, double kappa = two_pi) {
    check_kernel(kern);
    cfg.validate();
    const auto t = ewald_kernel_sums(k, {tau}, s, kappa, cfg, false);
    ksum r;
    r.value = t.values[0][kslot(kern.m, kern.n)];
    r.divergence_distance = t.divergence_distance;
    r.real_terms = t.real_terms;
    r.recip_terms = t.recip_terms;
    return r;
}

// 1/r kernel through the split-radius decomposition of the reciprocal integrals.
inline ksum ewald_1r(int n, const vec2& k, const vec2& tau, const lattice_spec& s, const ewald_config& cfg, double kappa = two_pi) {
    return lattice_sum({1, n}, k, tau, s, cfg, kappa);
}

// Shell-ordered real-space summation with damping exp(-eta r) and polynomial
// extrapolation eta -> 0 (m = 1, 2), or plain truncation (m = 3).
inline ksum direct_sum(kernel_id kern, const vec2& k, const vec2& tau, const lattice_spec& s, const ewald_config& cfg, double kappa = two_pi) {
    check_kernel(kern);
    cfg.validate();
    ksum out;
    const auto hit = nearest_circle(k, s, kappa);
    out.divergence_distance = hit.distance;
    if (std::abs(hit.distance) < 1e-13 * kappa) throw divergence_error("k lies on a light circle", hit.image);
    const bool damped = kern.m != 3;
    std::vector<double> etas = cfg.damp_etas;
    std::sort(etas.begin(), etas.end(), std::greater<>());
    const double radius = damped ? std::max(cfg.r_shells, 28.0 / etas.back()) : cfg.r_shells;
    std::vector<cplx> sums(damped ? etas.size() : 2);
    double scale = 0.0;
    const auto box = detail::index_box(tau, radius, s.a1, s.a2, s.b1, s.b2);
    for (int i = box[0]; i <= box[1]; ++i)
        for (int j = box[2]; j <= box[3]; ++j) {
            const vec2 r = tau + double(i) * s.a1 + double(j) * s.a2;
            const double d = r.norm();
            if (d > radius || d < 1e-12 * s.a) continue;
            cplx v = std::polar(radial_kernel(kern.m, kappa * d), k.dot(r));
            if (kern.n != 0) {
                const cplx e = cplx(r.x(), r.y()) / d;
                v *= kern.n > 0 ? e * e : std::conj(e * e);
            }
            scale = std::max(scale, std::abs(v));
            ++out.real_terms;
            if (damped) {
                for (size_t e = 0; e < etas.size(); ++e)
                    if (etas[e] * d < 40.0) sums[e] += v * std::exp(-etas[e] * d);
            } else {
                sums[0] += v;
                if (d <= 0.5 * radius) sums[1] += v;
            }
        }
    if (!damped) {
        out.value = sums[0];
        out.converged = std::abs(sums[0] - sums[1]) < cfg.tol * std::max(std::abs(sums[0]), scale);
        return out;
    }
    // Neville extrapolation to eta = 0, with and without the coarsest level
    auto extrapolate = [&](size_t first) {
        std::vector<cplx> p(sums.begin() + first, sums.end());
        std::vector<double> x(etas.begin() + first, etas.end());
        for (size_t lvl = 1; lvl < p.size(); ++lvl)
            for (size_t i = p.size() - 1; i >= lvl; --i) p[i] = (x[i - lvl] * p[i] - x[i] * p[i - 1]) / (x[i - lvl] - x[i]);
        return p.back();
    };
    out.value = extrapolate(0);
    if (etas.size() > 1) {
        const cplx coarse = extrapolate(1);
        const double change = std::abs(out.value - coarse);
        out.converged = change < cfg.tol * std::max(std::abs(out.value), scale);
        if (!std::isfinite(out.value.real()) || change > 1e3 * std::max(std::abs(out.value), scale))
            throw numeric_error("damped-sum extrapolation unstable");
    }
    return out;
}

// Matrix-element coefficient combinations (units of the single-atom rate):
// A = 3/8 (-f1 - f2 - f3), B = 3/8 (f1 - 3 f2 - 3 f3)
struct bloch_blocks {
    cplx a, b_pm, b_mp;
};

inline bloch_blocks combine_kernels(const std::array<cplx, 9>& v, double gamma) {
    const double c = 0.375 * gamma;
    return {c * (-v[kslot(1, 0)] - v[kslot(2, 0)] - v[kslot(3, 0)]),
            c * (v[kslot(1, -2)] - 3.0 * v[kslot(2, -2)] - 3.0 * v[kslot(3, -2)]),
            c * (v[kslot(1, 2)] - 3.0 * v[kslot(2, 2)] - 3.0 * v[kslot(3, 2)])};
}

inline std::vector<vec2> basis_offsets(const lattice_spec& s) {
    std::vector<vec2> out;
    for (int a = 0; a < s.n_basis(); ++a)
        for (int b = 0; b < s.n_basis(); ++b) out.push_back(s.basis[b] - s.basis[a]);
    return out;
}

// Bloch matrix from precomputed kernel sums; row/column 2 alpha + mu.
// periodic = true applies the cell-periodic gauge H(k + G) = H(k).
inline matc assemble_from_sums(const kernel_sums& t, const lattice_spec& s, const coupling_params& p, bool periodic = false) {
    const int nb = s.n_basis();
    matc V = matc::Zero(2 * nb, 2 * nb);
    const double e2 = p.epsilon * p.epsilon;
    for (int a = 0; a < nb; ++a)
        for (int b = 0; b < nb; ++b) {
            const auto blk = combine_kernels(t.values[a * nb + b], p.gamma);
            const cplx gauge = periodic ? std::polar(1.0, -t.k.dot(s.basis[b] - s.basis[a])) : cplx(1.0);
            const double d = a == b ? p.delta : 0.0;
            V(2 * a, 2 * b) = gauge * (blk.a + d) * (1.0 - e2);
            V(2 * a, 2 * b + 1) = gauge * blk.b_pm * (1.0 - 0.5 * e2);
            V(2 * a + 1, 2 * b) = gauge * blk.b_mp * (1.0 - 0.5 * e2);
            V(2 * a + 1, 2 * b + 1) = gauge * (blk.a - d);
        }
    return V;
}

inline matc assemble_Vk(const vec2& k, const lattice_spec& s, const coupling_params& p, const ewald_config& cfg) {
    p.validate();
    cfg.validate();
    return assemble_from_sums(ewald_kernel_sums(k, basis_offsets(s), s, p.kappa(), cfg), s, p);
}

}  // namespace dipolar
