// Command-line front end: bands, strip, chern, phase-diagram, modes,
// dynamics, ewald-probe and selftest.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <dipolar/config.hpp>
#include <dipolar/dynamics.hpp>
#include <dipolar/io.hpp>
#include <dipolar/spectra.hpp>
#include <dipolar/topology.hpp>

#include "oracles/berry_curvature.hpp"
#include "oracles/damped_lattice_sum.hpp"
#include "oracles/strip_sum.hpp"

namespace fs = std::filesystem;
using namespace dipolar;

namespace {

struct run_context {
    run_config cfg;
    fs::path dir;
    run_manifest manifest;
    executor ex;

    csv_writer open(const std::string& name, const std::vector<std::string>& header) {
        manifest.outputs.push_back(name);
        return csv_writer(dir / name, header);
    }
};

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

void cmd_bands(run_context& rc) {
    const auto& c = rc.cfg;
    const auto lat = build_lattice(c.kind, c.a);
    const auto path = bz_path(lat, c.band_points);
    const auto t = dispersion(lat, c.params, c.ewald, path, rc.ex);
    auto out = rc.open("bands.csv", {"arc_length", "k_x", "k_y", "band_index", "energy", "flag"});
    int flagged = 0, nudged = 0;
    for (size_t i = 0; i < path.size(); ++i) {
        flagged += t.near_divergence[i];
        nudged += t.nudged[i];
        for (int b = 0; b < t.energies[i].size(); ++b)
            out.row(path[i].arc, path[i].k.x(), path[i].k.y(), b, t.energies[i][b], t.near_divergence[i]);
    }
    auto& labels = rc.manifest.results["vertices"] = nlohmann::json::array();
    for (const auto& p : path)
        if (!p.label.empty()) labels.push_back({{"label", p.label}, {"arc_length", p.arc}});
    rc.manifest.results["near_divergence_points"] = flagged;
    if (nudged) rc.manifest.warnings.push_back(std::to_string(nudged) + " path points nudged off a light circle");
}

void cmd_strip(run_context& rc) {
    const auto& c = rc.cfg;
    const auto st = build_strip(build_lattice(c.kind, c.a), c.strip_n_y, c.boundary);
    const auto ks = uniform_kx_grid(st, c.kx_points);
    const auto r = strip_spectrum(st, c.params, ks, {}, rc.ex);
    auto out = rc.open("strip.csv", {"k_x", "index", "energy", "w_top", "w_bottom"});
    int light = 0;
    for (size_t k = 0; k < ks.size(); ++k) {
        light += r.light_line[k];
        for (int i = 0; i < r.energies[k].size(); ++i) out.row(ks[k], i, r.energies[k][i], r.w_top[k][i], r.w_bottom[k][i]);
    }
    rc.manifest.results["period"] = st.period;
    rc.manifest.results["top_sites"] = st.top;
    rc.manifest.results["bottom_sites"] = st.bottom;
    if (light) rc.manifest.warnings.push_back(std::to_string(light) + " k_x samples within 1e-3 of a light line");
}

void cmd_chern(run_context& rc) {
    const auto& c = rc.cfg;
    const auto lat = build_lattice(c.kind, c.a);
    const auto r = chern_numbers(lat, c.params, c.ewald, c.grid, c.grid, c.gap_tol, {0.5, 0.5}, rc.ex);
    auto out = rc.open("chern.csv", {"band", "chern", "raw"});
    for (size_t b = 0; b < r.chern.size(); ++b) out.row(static_cast<int>(b), r.chern[b], r.raw[b]);
    rc.manifest.results["min_gap"] = r.min_gap;
    rc.manifest.results["grid"] = {r.n1, r.n2};
    rc.manifest.results["offset"] = {r.offset.x(), r.offset.y()};
    rc.manifest.results["nudged"] = r.nudged;
}

void cmd_phase(run_context& rc) {
    const auto& c = rc.cfg;
    const auto lat = build_lattice(c.kind, c.a);
    const auto pd = phase_diagram(lat, c.ewald, linspace(c.delta_min, c.delta_max, c.delta_steps),
                                  linspace(c.epsilon_min, c.epsilon_max, c.epsilon_steps), c.grid, c.gap_tol, rc.ex);
    std::vector<std::string> header{"delta", "epsilon"};
    const int bands = 2 * lat.n_basis();
    for (int b = 1; b <= bands; ++b) header.push_back("C" + std::to_string(b));
    header.insert(header.end(), {"min_gap", "boundary"});
    auto out = rc.open("phase.csv", header);
    for (const auto& cell : pd.cells) {
        std::ostringstream row;
        row.imbue(std::locale::classic());
        row << std::setprecision(17) << cell.delta << ',' << cell.epsilon;
        for (int b = 0; b < bands; ++b) row << ',' << (cell.boundary ? std::string("") : std::to_string(cell.chern[b]));
        row << ',' << cell.min_gap << ',' << (cell.boundary ? 1 : 0);
        out.row(row.str());
    }
    rc.manifest.results["grid"] = {pd.n1, pd.n2};
    rc.manifest.results["offset"] = {pd.offset.x(), pd.offset.y()};
    rc.manifest.results["nudged"] = pd.nudged;
}

finite_lattice flake_from(const run_config& c) {
    if (c.kind != lattice_kind::honeycomb) throw config_error("finite flakes need lattice.kind = honeycomb");
    return apply_defects(build_hex_flake(c.flake_rings, c.a), c.defect_fraction, c.seed);
}

void cmd_modes(run_context& rc) {
    const auto f = flake_from(rc.cfg);
    const auto modes = eigenmodes(f, rc.cfg.params);
    auto out = rc.open("modes.csv", {"index", "energy", "q", "w", "is_edge"});
    int edge = 0, undefined = 0;
    for (size_t i = 0; i < modes.size(); ++i) {
        out.row(static_cast<int>(i), modes[i].energy, modes[i].q, modes[i].w, modes[i].is_edge);
        edge += modes[i].is_edge;
        undefined += !modes[i].q_defined;
    }
    rc.manifest.outputs.push_back("flake.json");
    std::ofstream(rc.dir / "flake.json") << to_json(f).dump(1) << '\n';
    rc.manifest.results["edge_modes"] = edge;
    rc.manifest.results["sites"] = f.active_count();
    if (undefined) rc.manifest.warnings.push_back(std::to_string(undefined) + " modes with undefined quasi-momentum");
}

void cmd_dynamics(run_context& rc) {
    const auto& c = rc.cfg;
    const auto f = flake_from(c);
    drive_schedule sched;
    sched.off = c.drive_off;
    const auto tr = evolve(f, c.params, c.drive, c.dissipative, c.t_max, c.dt_out, sched);
    auto out = rc.open("trajectory.csv", {"t", "site", "p_plus", "p_minus"});
    for (size_t s = 0; s < tr.t.size(); ++s)
        for (size_t i = 0; i < tr.sites.size(); ++i)
            out.row(tr.t[s], tr.sites[i], std::norm(tr.amplitudes[s][2 * i]), std::norm(tr.amplitudes[s][2 * i + 1]));
    const int site = resolve_drive_site(f, c.drive);
    rc.manifest.results["drive_site"] = site;
    rc.manifest.results["schedule"] = {{"on", 0.0}, {"off", c.drive_off}};
    rc.manifest.results["seed"] = c.seed;
    if (c.dissipative) {
        const auto ss = steady_state(f, c.params, c.drive);
        auto st = rc.open("steady_state.csv", {"site", "x", "y", "p_plus", "p_minus"});
        for (size_t i = 0; i < tr.sites.size(); ++i)
            st.row(tr.sites[i], f.positions[tr.sites[i]].x(), f.positions[tr.sites[i]].y(), std::norm(ss[2 * i]), std::norm(ss[2 * i + 1]));
        rc.manifest.results["steady_edge_coverage"] = ring_coverage(site_populations(ss), f);
        if (c.drive_off + 2.0 * c.dt_out <= c.t_max) {
            const auto fit = decay_rate_fit(tr, c.drive_off, c.t_max);
            rc.manifest.results["decay_rate"] = fit.rate;
            rc.manifest.results["decay_fit_rms"] = fit.rms_residual;
            for (const auto& w : fit.warnings) rc.manifest.warnings.push_back(w);
        }
    }
}

void cmd_probe(run_context& rc) {
    const auto& c = rc.cfg;
    const auto lat = build_lattice(c.kind, c.a);
    const auto offsets = basis_offsets(lat);
    const auto sums = ewald_kernel_sums(c.probe_k, offsets, lat, c.params.kappa(), c.ewald);
    auto out = rc.open("probe.csv", {"m", "n", "offset", "re", "im", "direct_re", "direct_im", "direct_converged"});
    for (size_t o = 0; o < offsets.size(); ++o)
        for (int m = 1; m <= 3; ++m)
            for (int n : {-2, 0, 2}) {
                const cplx v = sums.values[o][kslot(m, n)];
                if (c.probe_direct) {
                    const auto d = direct_sum({m, n}, sums.k, offsets[o], lat, c.ewald, c.params.kappa());
                    out.row(m, n, static_cast<int>(o), v.real(), v.imag(), d.value.real(), d.value.imag(), d.converged);
                } else {
                    out.row(m, n, static_cast<int>(o), v.real(), v.imag(), "", "", "");
                }
            }
    rc.manifest.results["divergence_distance"] = sums.divergence_distance;
    rc.manifest.results["real_terms"] = sums.real_terms;
    rc.manifest.results["recip_terms"] = sums.recip_terms;
    if (sums.nudged) rc.manifest.warnings.push_back("probe wavevector nudged off a light circle");
}

// Oracle suites; returns false when any check fails.
bool cmd_selftest(run_context& rc) {
    auto out = rc.open("selftest.csv", {"check", "value", "reference", "abs_error", "tolerance", "pass"});
    bool all = true;
    auto check = [&](const std::string& name, double value, double ref, double tol) {
        const double err = std::abs(value - ref);
        const bool ok = err <= tol;
        all = all && ok;
        out.row(name, value, ref, err, tol, ok);
    };
    // small-separation limits and closed forms at x = pi
    const auto z = scalar_coefficients_at(1e-3);
    check("A_prime_limit", z.Ap, 1.0, 1e-5);
    check("B_prime_limit", z.Bp, 0.0, 1e-5);
    check("C_prime_limit", z.Cp, 1.0, 1e-5);
    const double pi = std::numbers::pi;
    const auto h = scalar_coefficients_at(pi);
    check("A_at_pi", h.A, 0.375 * (1.0 / pi + 1.0 / (pi * pi * pi)), 1e-12);
    check("B_at_pi", h.B, 0.375 * (-1.0 / pi + 3.0 / (pi * pi * pi)), 1e-12);
    check("A_prime_at_pi", h.Ap, 0.75 / (pi * pi), 1e-12);
    check("B_prime_at_pi", h.Bp, 1.125 / (pi * pi), 1e-12);
    check("C_at_pi", h.C, 1.5 / (pi * pi * pi), 1e-12);
    check("C_prime_at_pi", h.Cp, 3.0 / (pi * pi), 1e-12);
    // Ewald against brute-force damped sums
    for (auto kind : {lattice_kind::square, lattice_kind::honeycomb}) {
        const auto lat = build_lattice(kind, 0.1);
        coupling_params p;
        p.delta = 0.3;
        p.epsilon = 0.1;
        const vec2 k(3.1, 17.2);
        const matc v = assemble_Vk(k, lat, p, {});
        const auto o = oracle::bloch_matrix(k, lat.basis, lat.a1, lat.a2, p.delta, p.epsilon,
                                            oracle::settings_for(oracle::circle_distance(k, lat.a1, lat.a2)));
        check("ewald_vs_direct_" + to_string(kind), (v - o).norm() / o.norm(), 0.0, 1e-3);
    }
    // two-row strip against explicit 1D sums
    {
        const auto st = build_strip(build_lattice(lattice_kind::square, 0.1), 2, strip_boundary::straight);
        coupling_params p;
        p.delta = -0.05;
        p.epsilon = 0.17;
        const matc hs = strip_hamiltonian(st, 11.0, p).h;
        const matc ho = oracle::two_row_strip(11.0, 0.1, p.delta, p.epsilon);
        check("strip_two_rows", (hs - ho).norm() / ho.norm(), 0.0, 1e-6);
    }
    // reference Dirac model
    const auto dc = dirac_chern(24, 24);
    check("dirac_chern_lower", dc.chern[0], -1.0, 0.0);
    check("dirac_chern_upper", dc.chern[1], 1.0, 0.0);
    const auto kubo = oracle::dirac_chern_kubo(400, -1.0);
    check("dirac_kubo_lower", kubo[0], -1.0, 1e-3);
    rc.manifest.results["all_passed"] = all;
    return all;
}

int run(const std::string& command, const std::string& config_path, const std::vector<std::string>& overrides) {
    run_context rc;
    rc.cfg = load_config(config_path, overrides);
    rc.ex.threads = rc.cfg.threads;
    rc.dir = rc.cfg.output_dir;
    rc.manifest.command = command;
    rc.manifest.config = rc.cfg.document;
    rc.cfg.params.validate();
    rc.cfg.ewald.validate();
    rc.cfg.drive.validate();

    static const std::map<std::string, std::function<bool(run_context&)>> commands{
        {"bands", [](run_context& r) { return cmd_bands(r), true; }},
        {"strip", [](run_context& r) { return cmd_strip(r), true; }},
        {"chern", [](run_context& r) { return cmd_chern(r), true; }},
        {"phase-diagram", [](run_context& r) { return cmd_phase(r), true; }},
        {"modes", [](run_context& r) { return cmd_modes(r), true; }},
        {"dynamics", [](run_context& r) { return cmd_dynamics(r), true; }},
        {"ewald-probe", [](run_context& r) { return cmd_probe(r), true; }},
        {"selftest", cmd_selftest},
    };
    const auto it = commands.find(command);
    if (it == commands.end()) throw config_error("unknown command: " + command);
    if (command == "modes" || command == "dynamics") flake_from(rc.cfg);  // fail before anything is written
    fs::create_directories(rc.dir);
    const bool ok = it->second(rc);
    rc.manifest.write(rc.dir);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dipolar lattice gas: bands, topology and driven dynamics"};
    std::string command, config_path;
    int threads = 0;
    std::string out_dir;
    app.add_option("command", command, "bands | strip | chern | phase-diagram | modes | dynamics | ewald-probe | selftest")->required();
    app.add_option("-c,--config", config_path, "JSON run configuration");
    app.add_option("-j,--threads", threads, "worker threads (overrides run.threads)");
    app.add_option("-o,--out", out_dir, "output directory (overrides output.dir)");
    app.allow_extras();
    app.footer("Any config key can be overridden with --section.key=value.");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    std::vector<std::string> overrides = app.remaining();
    if (threads > 0) overrides.push_back("--run.threads=" + std::to_string(threads));
    if (!out_dir.empty()) overrides.push_back("--output.dir=\"" + out_dir + "\"");
    try {
        return run(command, config_path, overrides);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const invalid_parameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return 2;
    } catch (const divergence_error& e) {
        std::cerr << "numeric error: " << e.what() << " (image " << e.image.transpose() << ")\n";
        return 3;
    } catch (const degenerate_band_error& e) {
        std::cerr << "numeric error: " << e.what() << " (band " << e.band << ", gap " << e.gap << ")\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    }
}
