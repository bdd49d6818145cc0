// One PASS/FAIL line per acceptance criterion.
// usage: acceptance <path-to-dipolar-cli> <work-dir> [criterion ...]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <dipolar/dynamics.hpp>
#include <dipolar/spectra.hpp>
#include <dipolar/topology.hpp>

#include "oracles/damped_lattice_sum.hpp"

using namespace dipolar;
namespace fs = std::filesystem;

namespace {

struct verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

std::string vec_str(const std::vector<int>& c) {
    std::string s = "(";
    for (size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
    return s + ")";
}

double lowest_eigenvalue(const matc& v) {
    Eigen::SelfAdjointEigenSolver<matc> es(v, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

// ---------------------------------------------------------------- 1
verdict coefficient_limits() {
    const double pi = std::numbers::pi;
    const auto z = scalar_coefficients_at(1e-3);
    const auto h = scalar_coefficients_at(pi);
    const double lim = std::max({std::abs(z.Ap - 1.0), std::abs(z.Bp), std::abs(z.Cp - 1.0)});
    const double closed = std::max({std::abs(h.A - 0.375 * (1 / pi + 1 / (pi * pi * pi))), std::abs(h.B - 0.375 * (-1 / pi + 3 / (pi * pi * pi))),
                                    std::abs(h.Ap - 0.75 / (pi * pi)), std::abs(h.Bp - 1.125 / (pi * pi)), std::abs(h.C - 1.5 / (pi * pi * pi)),
                                    std::abs(h.Cp - 3.0 / (pi * pi))});
    return {lim <= 1e-5 && closed <= 1e-12, "small-x error " + fmt(lim) + ", closed-form error at pi " + fmt(closed)};
}

// ---------------------------------------------------------------- 2
verdict ewald_correctness() {
    double worst = 0.0, worst_invariance = 0.0;
    int samples = 0;
    for (auto kind : {lattice_kind::square, lattice_kind::honeycomb}) {
        const auto s = build_lattice(kind, 0.1);
        std::mt19937_64 rng(kind == lattice_kind::square ? 101 : 202);
        std::uniform_real_distribution<double> u(-std::numbers::pi / s.a, std::numbers::pi / s.a), d(-2.0, 2.0), e(0.0, 0.5);
        ewald_config base;
        base.gamma_reg = std::pow(two_pi / (8.0 * s.a), 2);
        base.split_radius = 3.0 * s.a;
        ewald_config twice = base;
        twice.gamma_reg *= 2.0;
        twice.split_radius *= 2.0;
        int n = 0;
        while (n < 20) {
            const vec2 k(u(rng), u(rng));
            const double dist = divergence_distance(k, s);
            if (std::abs(dist) <= 0.5) continue;
            coupling_params p;
            p.delta = d(rng);
            p.epsilon = e(rng);
            const matc v = assemble_Vk(k, s, p, base);
            const matc o = oracle::bloch_matrix(k, s.basis, s.a1, s.a2, p.delta, p.epsilon,
                                                oracle::settings_for(oracle::circle_distance(k, s.a1, s.a2)));
            worst = std::max(worst, (v - o).norm() / o.norm());
            worst_invariance = std::max(worst_invariance, (assemble_Vk(k, s, p, twice) - v).norm() / v.norm());
            ++n;
            ++samples;
        }
    }
    const double tol = ewald_config{}.tol;
    return {worst < 1e-3 && worst_invariance < tol,
            std::to_string(samples) + " k-points; worst relative error vs damped direct sum " + fmt(worst) +
                "; worst change under (gamma,c)->(2gamma,2c) " + fmt(worst_invariance) + " (tol " + fmt(tol) + ")"};
}

// ---------------------------------------------------------------- 3
verdict one_sided_divergence() {
    bool ok = true;
    std::string detail;
    for (auto kind : {lattice_kind::square, lattice_kind::honeycomb}) {
        const auto s = build_lattice(kind, 0.1);
        const coupling_params p;
        const vec2 dir = vec2(1.0, 0.37).normalized();
        auto at = [&](double delta) { return lowest_eigenvalue(assemble_Vk((two_pi + delta) * dir, s, p, {})); };
        const double out = at(1e-4), in = at(-1e-4);
        // slope of log|E| against log(delta) over four decades outside
        std::vector<double> x, y;
        for (double delta : {1e-3, 1e-4, 1e-5, 1e-6}) {
            x.push_back(std::log(delta));
            y.push_back(std::log(std::abs(at(delta))));
        }
        const double mx = std::accumulate(x.begin(), x.end(), 0.0) / 4, my = std::accumulate(y.begin(), y.end(), 0.0) / 4;
        double sxy = 0, sxx = 0;
        for (int i = 0; i < 4; ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
        }
        const double slope = sxy / sxx;
        const bool pass = std::abs(out) > 10.0 * std::abs(in) && std::abs(slope + 0.5) <= 0.05;
        ok = ok && pass;
        detail += (detail.empty() ? "" : "; ") + to_string(kind) + ": E(+1e-4)=" + fmt(out, 5) + ", E(-1e-4)=" + fmt(in, 4) + ", exponent " + fmt(slope, 4);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------- 4
verdict chern_validation() {
    bool ok = true;
    std::string detail;
    for (int n : {24, 48}) {
        const auto r = dirac_chern(n, n);
        ok = ok && r.chern == std::vector<int>{-1, 1};
        detail += "Dirac " + std::to_string(n) + "^2 " + vec_str(r.chern) + "; ";
    }
    const auto s = build_lattice(lattice_kind::square, 0.1);
    const auto g = compute_grid_sums(s, {}, 24, 24, {0.5, 0.5});
    int trivial = 0, touching = 0, other = 0;
    double residual = 0.0;
    for (int i = 0; i <= 10; ++i) {
        coupling_params p;
        p.delta = -1.0 + 0.2 * i;
        if (i == 5) p.delta = 0.0;
        try {
            const auto r = chern_from_sums(g, s, p, 1e-3);
            for (size_t b = 0; b < r.chern.size(); ++b) residual = std::max(residual, std::abs(r.raw[b] - r.chern[b]));
            if (r.chern == std::vector<int>{0, 0})
                ++trivial;
            else
                ++other;
        } catch (const degenerate_band_error& e) {
            // a band touching (delta = 0 is time-reversal symmetric) has no Chern number
            ++touching;
            if (std::abs(p.delta) > 1e-12) ++other;
        }
    }
    ok = ok && other == 0 && residual < 1e-6;
    detail += "square lattice eps=0, 11 deltas in [-1,1]: " + std::to_string(trivial) + " trivial, " + std::to_string(touching) +
              " band touching (delta=0), " + std::to_string(other) + " other; integer residual " + fmt(residual);
    return {ok, detail};
}

// ---------------------------------------------------------------- 5
verdict phase_structure() {
    const auto s = build_lattice(lattice_kind::honeycomb, 0.1);
    const ewald_config cfg;
    const auto g = compute_grid_sums(s, cfg, 24, 24, {0.5, 0.5});
    struct cell {
        double delta;
        std::vector<int> chern;
    };
    std::vector<cell> cells;
    std::set<std::vector<int>> distinct;
    bool sums_ok = true;
    for (int i = 0; i <= 40; ++i) {
        coupling_params p;
        p.delta = -10.0 + 0.5 * i;
        try {
            const auto r = chern_from_sums(g, s, p, 1e-3);
            sums_ok = sums_ok && std::accumulate(r.chern.begin(), r.chern.end(), 0) == 0;
            for (size_t b = 0; b < r.chern.size(); ++b) sums_ok = sums_ok && std::abs(r.raw[b] - r.chern[b]) < 1e-6;
            cells.push_back({p.delta, r.chern});
            if (std::any_of(r.chern.begin(), r.chern.end(), [](int c) { return c != 0; })) distinct.insert(r.chern);
        } catch (const degenerate_band_error&) {
            // boundary cell
        }
    }
    bool colocated = true;
    int transitions = 0;
    std::string detail = std::to_string(distinct.size()) + " distinct nonzero Chern vectors;";
    for (size_t i = 0; i + 1 < cells.size(); ++i) {
        if (cells[i].chern == cells[i + 1].chern) continue;
        ++transitions;
        coupling_params p;
        const auto t = locate_transition(g, s, p, cells[i].delta, cells[i + 1].delta, 1e-3);
        const double mid = 0.5 * (t.lo + t.hi);
        p.delta = mid;
        const double gap_mid = bulk_min_gap(g, s, p, cfg);
        // reference scale: the bulk gap one sweep step (0.5) either side
        p.delta = mid - 0.5;
        const double gap_lo = bulk_min_gap(g, s, p, cfg);
        p.delta = mid + 0.5;
        const double gap_hi = bulk_min_gap(g, s, p, cfg);
        const double away = std::min(gap_lo, gap_hi);
        const bool closes = gap_mid < 0.05 * away;
        colocated = colocated && closes;
        detail += " " + vec_str(cells[i].chern) + "->" + vec_str(cells[i + 1].chern) + " at delta=" + fmt(mid, 4) + " (bulk gap " + fmt(gap_mid) +
                  " vs " + fmt(away) + " at delta +-0.5);";
    }
    return {distinct.size() >= 2 && transitions >= 1 && colocated && sums_ok, detail + (sums_ok ? " all sums zero" : " nonzero Chern sum")};
}

// ---------------------------------------------------------------- 6
struct edge_point {
    double kx, energy;
    bool top;
};

// bulk band extrema of bands b and b+1 on an n x n grid
std::pair<double, double> bulk_gap_edges(const lattice_spec& s, const coupling_params& p, int band, int n) {
    const auto ks = chern_k_grid(s, n, n, {0.5, 0.5}, two_pi);
    const auto offsets = basis_offsets(s);
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    for (const auto& k : ks) {
        Eigen::SelfAdjointEigenSolver<matc> es(assemble_from_sums(ewald_kernel_sums(k, offsets, s, two_pi, {}), s, p), Eigen::EigenvaluesOnly);
        lo = std::max(lo, es.eigenvalues()[band]);
        hi = std::min(hi, es.eigenvalues()[band + 1]);
    }
    return {lo, hi};
}

std::vector<edge_point> honeycomb_edge_states(const strip_spectrum_result& r, double lo, double hi) {
    std::vector<edge_point> pts;
    for (size_t k = 0; k < r.kx.size(); ++k)
        for (int i = 0; i < r.energies[k].size(); ++i) {
            const double e = r.energies[k][i];
            if (e <= lo || e >= hi) continue;
            if (r.w_top[k][i] > 0.95) pts.push_back({r.kx[k], e, true});
            if (r.w_bottom[k][i] > 0.95) pts.push_back({r.kx[k], e, false});
        }
    return pts;
}

double slope(const std::vector<edge_point>& pts, bool top) {
    double mx = 0, my = 0;
    int n = 0;
    for (const auto& p : pts)
        if (p.top == top) {
            mx += p.kx;
            my += p.energy;
            ++n;
        }
    if (n < 2) return 0.0;
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (const auto& p : pts)
        if (p.top == top) {
            sxy += (p.kx - mx) * (p.energy - my);
            sxx += (p.kx - mx) * (p.kx - mx);
        }
    return sxx > 0 ? sxy / sxx : 0.0;
}

struct honeycomb_strip_data {
    strip_spec strip;
    strip_spectrum_result spectrum;
    double gap_lo = 0, gap_hi = 0;
};

const honeycomb_strip_data& honeycomb_strip() {
    static const honeycomb_strip_data data = [] {
        honeycomb_strip_data d;
        const auto s = build_lattice(lattice_kind::honeycomb, 0.1);
        coupling_params p;
        p.delta = -5.0;
        std::tie(d.gap_lo, d.gap_hi) = bulk_gap_edges(s, p, 0, 48);
        d.strip = build_strip(s, 20, strip_boundary::bearded_zigzag);
        d.spectrum = strip_spectrum(d.strip, p, uniform_kx_grid(d.strip, 96));
        return d;
    }();
    return data;
}

verdict edge_states() {
    const auto& hc = honeycomb_strip();
    const auto pts = honeycomb_edge_states(hc.spectrum, hc.gap_lo, hc.gap_hi);
    int top = 0, bottom = 0;
    for (const auto& p : pts) (p.top ? top : bottom)++;
    const double st = slope(pts, true), sb = slope(pts, false);
    const bool honeycomb_ok = top > 0 && bottom > 0 && st * sb < 0.0;
    std::string detail = "honeycomb: bulk gap (" + fmt(hc.gap_lo, 4) + ", " + fmt(hc.gap_hi, 4) + "), " + std::to_string(top) + " top / " +
                         std::to_string(bottom) + " bottom states with weight > 0.95, dE/dkx " + fmt(st) + " vs " + fmt(sb) + "; ";

    // square strip: gap resolved in kx by projecting the bulk bands over ky
    const auto s = build_lattice(lattice_kind::square, 0.1);
    coupling_params p;
    p.delta = -0.05;
    p.epsilon = 0.17;
    const auto st_sq = build_strip(s, 15, strip_boundary::straight);
    const auto kxs = uniform_kx_grid(st_sq, 96);
    const auto r = strip_spectrum(st_sq, p, kxs);
    const auto offsets = basis_offsets(s);
    int near_degenerate = 0, in_gap = 0;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < kxs.size(); ++k) {
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 64; ++j) {
            const vec2 q(kxs[k], -std::numbers::pi / s.a + two_pi / s.a * (j + 0.5) / 64);
            Eigen::SelfAdjointEigenSolver<matc> es(assemble_from_sums(ewald_kernel_sums(q, offsets, s, two_pi, {}), s, p), Eigen::EigenvaluesOnly);
            lo = std::max(lo, es.eigenvalues()[0]);
            hi = std::min(hi, es.eigenvalues()[1]);
        }
        if (hi <= lo) continue;
        std::vector<double> tops, bottoms;
        for (int i = 0; i < r.energies[k].size(); ++i) {
            const double e = r.energies[k][i];
            if (e <= lo || e >= hi) continue;
            ++in_gap;
            if (r.w_top[k][i] > 0.5) tops.push_back(e);
            if (r.w_bottom[k][i] > 0.5) bottoms.push_back(e);
        }
        bool found = false;
        for (double a : tops)
            for (double b : bottoms) {
                const double ratio = std::abs(a - b) / (hi - lo);
                best_ratio = std::min(best_ratio, ratio);
                found = found || ratio < 0.05;
            }
        near_degenerate += found;
    }
    const bool square_ok = near_degenerate > 0;
    detail += "square: " + std::to_string(in_gap) + " in-gap strip states, " + std::to_string(near_degenerate) +
              " kx samples with a top/bottom pair split by < 5% of the local gap (best " + fmt(best_ratio) + ")";
    return {honeycomb_ok && square_ok, detail};
}

// ---------------------------------------------------------------- 7
verdict finite_flake() {
    const auto& hc = honeycomb_strip();
    const auto pts = honeycomb_edge_states(hc.spectrum, hc.gap_lo, hc.gap_hi);
    const auto f = build_hex_flake(9, 0.1);
    coupling_params p;
    p.delta = -5.0;
    const auto modes = eigenmodes(f, p);
    const double period = hc.strip.period, zone = two_pi / period, spacing = zone / 96.0;
    int edge = 0, tracked = 0;
    double worst = 0.0;
    for (const auto& m : modes) {
        if (!m.is_edge || !m.q_defined || m.energy <= hc.gap_lo || m.energy >= hc.gap_hi) continue;
        ++edge;
        // two ring sites per strip period
        const double kx = std::remainder(2.0 * m.q / period, zone);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : pts)
            if (std::abs(std::remainder(e.kx - kx, zone)) <= spacing) best = std::min(best, std::abs(e.energy - m.energy));
        worst = std::max(worst, best);
        tracked += best < 0.5;
    }
    return {edge >= 5 && tracked == edge, std::to_string(f.size()) + " sites; " + std::to_string(edge) +
                                              " in-gap modes with w > 0.95; " + std::to_string(tracked) +
                                              " within 0.5 of the strip edge dispersion (worst " + fmt(worst) + ")"};
}

// ---------------------------------------------------------------- 8
verdict dynamics() {
    std::string detail;
    // single atom
    finite_lattice one;
    one.positions = {vec2::Zero()};
    one.sublattice = {0};
    one.active = {true};
    one.boundary = {true};
    one.edge_ring = {0};
    vecc c0(2);
    c0 << 1.0, 0.0;
    drive_schedule dark;
    dark.on = dark.off = std::numeric_limits<double>::infinity();
    const auto single = evolve(one, coupling_params{}, drive_spec{}, true, 10.0, 0.5, dark, c0);
    double decay_err = 0.0;
    for (size_t i = 0; i < single.t.size(); ++i) decay_err = std::max(decay_err, std::abs(single.total[i] - std::exp(-single.t[i])));
    bool ok = decay_err <= 1e-8;
    detail += "single-atom decay error " + fmt(decay_err) + ";";

    coupling_params p;
    p.delta = -5.0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto f = apply_defects(build_hex_flake(9, 0.1), 0.05, seed);
        drive_spec far, near;
        far.detuning = -10.0;
        near.detuning = -2.0;
        const double cov_far = ring_coverage(site_populations(steady_state(f, p, far)), f);
        const double cov_near = ring_coverage(site_populations(steady_state(f, p, near)), f);
        drive_schedule sched;
        sched.off = 20.0;
        const auto tr = evolve(f, p, far, true, 40.0, 0.5, sched);
        const int site = resolve_drive_site(f, far);
        const auto& t2 = tr.populations[4];  // t = 2
        const double shift = ring_displacement(t2, f, site);
        const auto fit = decay_rate_fit(tr, 20.0, 40.0);
        // ring order is counter-clockwise, so clockwise transport means a negative shift
        std::string failed;
        if (!(cov_far > 0.5)) failed += " coverage@-10";
        if (!(cov_near < 0.5)) failed += " coverage@-2";
        if (!(shift < 0.0)) failed += " clockwise";
        if (!(fit.rate < 0.5)) failed += " subradiance";
        ok = ok && failed.empty();
        detail += " seed " + std::to_string(seed) + ": coverage " + fmt(cov_far) + " at -10 vs " + fmt(cov_near) + " at -2, ring shift at t=2 " +
                  fmt(shift) + ", post-drive rate " + fmt(fit.rate) + (failed.empty() ? ";" : " (failed:" + failed + ");");
    }
    return {ok, detail};
}

// ---------------------------------------------------------------- 9
std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

verdict determinism(const std::string& cli, const fs::path& work) {
    std::vector<std::string> bodies;
    for (const char* run : {"selftest_a", "selftest_b"}) {
        const fs::path dir = work / run;
        fs::remove_all(dir);
        const std::string cmd = "\"" + cli + "\" selftest -o \"" + dir.string() + "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) return {false, std::string("selftest exited with status ") + std::to_string(rc)};
        bodies.push_back(read_file(dir / "selftest.csv"));
    }
    const bool same = !bodies[0].empty() && bodies[0] == bodies[1];
    return {same, std::to_string(bodies[0].size()) + " bytes, " + (same ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <dipolar-cli> <work-dir> [criterion ...]\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path work = argv[2];
    fs::create_directories(work);
    std::set<int> only;
    for (int i = 3; i < argc; ++i) only.insert(std::stoi(argv[i]));

    const std::vector<std::pair<int, std::function<verdict()>>> criteria{
        {1, coefficient_limits},
        {2, ewald_correctness},
        {3, one_sided_divergence},
        {4, chern_validation},
        {5, phase_structure},
        {6, edge_states},
        {7, finite_flake},
        {8, dynamics},
        {9, [&] { return determinism(cli, work); }},
    };
    bool all = true;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all = all && v.pass;
        std::printf("criterion %d %s [%.1f s] %s\n", id, v.pass ? "PASS" : "FAIL", secs, v.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
