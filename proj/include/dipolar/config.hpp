#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "errors.hpp"
#include "ewald.hpp"
#include "geometry.hpp"

namespace dipolar {

using nlohmann::json;

// Every accepted key with its default; the type of the default fixes the type
// a user value must have.
inline json default_config_document() {
    return json::parse(R"({
      "lattice": {
        "kind": "honeycomb",
        "a_over_lambda": 0.1,
        "flake_rings": 9,
        "strip": {"N_y": 20, "boundary": "auto", "kx_points": 96}
      },
      "params": {"delta": -5.0, "epsilon": 0.0},
      "ewald": {"gamma": 0.0, "split_radius": 0.0, "g_shells": 40.0, "r_shells": 60.0, "tol": 1e-4},
      "bands": {"points": 301},
      "topology": {"grid": 24, "gap_tol": 1e-3},
      "phase": {"delta_min": -10.0, "delta_max": 10.0, "delta_steps": 41,
                "epsilon_min": 0.0, "epsilon_max": 0.0, "epsilon_steps": 1},
      "dynamics": {"drive_site": -1, "detuning": -10.0, "polarization": "both-equal", "eta": 1e-3,
                   "t_max": 40.0, "dt_out": 0.1, "drive_off": 20.0, "dissipative": true,
                   "defect_fraction": 0.0, "seed": 1},
      "probe": {"kx": 3.0, "ky": 1.0, "direct": false},
      "output": {"dir": ""},
      "run": {"threads": 1}
    })");
}

struct run_config {
    json document;  // resolved key-value tree

    lattice_kind kind = lattice_kind::honeycomb;
    double a = 0.1;
    int flake_rings = 9;
    int strip_n_y = 20;
    strip_boundary boundary = strip_boundary::bearded_zigzag;
    int kx_points = 96;
    coupling_params params;
    ewald_config ewald;
    int band_points = 301;
    int grid = 24;
    double gap_tol = 1e-3;
    double delta_min = -10, delta_max = 10, epsilon_min = 0, epsilon_max = 0;
    int delta_steps = 41, epsilon_steps = 1;
    drive_spec drive;
    double t_max = 40.0, dt_out = 0.1, drive_off = 20.0;
    bool dissipative = true;
    double defect_fraction = 0.0;
    std::uint64_t seed = 1;
    vec2 probe_k{3.0, 1.0};
    bool probe_direct = false;
    std::string output_dir;
    int threads = 1;
};

namespace detail {

inline void merge_checked(json& base, const json& user, const std::string& path) {
    if (!user.is_object()) throw config_error("config section " + (path.empty() ? std::string("<root>") : path) + " must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) throw config_error("unknown config key: " + where);
        json& slot = base[key];
        if (slot.is_object()) {
            merge_checked(slot, value, where);
        } else if (slot.is_number()) {
            if (!value.is_number()) throw config_error("config key " + where + " must be numeric");
            if (slot.is_number_integer() && !value.is_number_integer()) {
                const double v = value.get<double>();
                if (v != std::floor(v)) throw config_error("config key " + where + " must be an integer");
                slot = static_cast<std::int64_t>(v);
            } else {
                slot = value;
            }
        } else if (slot.is_boolean()) {
            if (!value.is_boolean()) throw config_error("config key " + where + " must be true or false");
            slot = value;
        } else {
            if (!value.is_string()) throw config_error("config key " + where + " must be a string");
            slot = value;
        }
    }
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw config_error(msg);
}

}  // namespace detail

// Turns "--section.key=value" into a nested single-key document.
inline json parse_override(const std::string& arg) {
    std::string body = arg;
    if (body.rfind("--", 0) == 0) body = body.substr(2);
    const auto eq = body.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("override must look like --section.key=value: " + arg);
    const std::string path = body.substr(0, eq), text = body.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
        if (value.is_object() || value.is_array() || value.is_null()) value = text;
    } catch (const json::parse_error&) {
        value = text;
    }
    json doc = value;
    std::vector<std::string> parts;
    for (size_t start = 0;;) {
        const auto dot = path.find('.', start);
        parts.push_back(path.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (it->empty()) throw config_error("empty key in override: " + arg);
        doc = json{{*it, doc}};
    }
    return doc;
}

inline run_config resolve_config(const json& document) {
    using detail::require;
    run_config c;
    c.document = document;
    const json& d = document;
    try {
        c.kind = parse_lattice_kind(d["lattice"]["kind"].get<std::string>());
        const std::string b = d["lattice"]["strip"]["boundary"];
        c.boundary = b != "auto" ? parse_strip_boundary(b)
                     : c.kind == lattice_kind::square ? strip_boundary::straight : strip_boundary::bearded_zigzag;
        c.drive.pol = parse_polarization(d["dynamics"]["polarization"].get<std::string>());
    } catch (const invalid_parameter& e) {
        throw config_error(e.what());
    }
    c.a = d["lattice"]["a_over_lambda"];
    c.flake_rings = d["lattice"]["flake_rings"];
    c.strip_n_y = d["lattice"]["strip"]["N_y"];
    c.kx_points = d["lattice"]["strip"]["kx_points"];
    c.params.delta = d["params"]["delta"];
    c.params.epsilon = d["params"]["epsilon"];
    c.ewald.gamma_reg = d["ewald"]["gamma"];
    c.ewald.split_radius = d["ewald"]["split_radius"];
    c.ewald.g_shells = d["ewald"]["g_shells"];
    c.ewald.r_shells = d["ewald"]["r_shells"];
    c.ewald.tol = d["ewald"]["tol"];
    c.band_points = d["bands"]["points"];
    c.grid = d["topology"]["grid"];
    c.gap_tol = d["topology"]["gap_tol"];
    c.delta_min = d["phase"]["delta_min"];
    c.delta_max = d["phase"]["delta_max"];
    c.delta_steps = d["phase"]["delta_steps"];
    c.epsilon_min = d["phase"]["epsilon_min"];
    c.epsilon_max = d["phase"]["epsilon_max"];
    c.epsilon_steps = d["phase"]["epsilon_steps"];
    c.drive.site = d["dynamics"]["drive_site"];
    c.drive.detuning = d["dynamics"]["detuning"];
    c.drive.eta = d["dynamics"]["eta"];
    c.t_max = d["dynamics"]["t_max"];
    c.dt_out = d["dynamics"]["dt_out"];
    c.drive_off = d["dynamics"]["drive_off"];
    c.dissipative = d["dynamics"]["dissipative"];
    c.defect_fraction = d["dynamics"]["defect_fraction"];
    const std::int64_t seed = d["dynamics"]["seed"];
    c.probe_k = {d["probe"]["kx"].get<double>(), d["probe"]["ky"].get<double>()};
    c.probe_direct = d["probe"]["direct"];
    c.output_dir = d["output"]["dir"];
    c.threads = d["run"]["threads"];

    auto finite = [](double x) { return std::isfinite(x); };
    require(c.a > 0.0 && finite(c.a), "lattice.a_over_lambda must be positive");
    require(c.flake_rings >= 1, "lattice.flake_rings must be at least 1");
    require(c.strip_n_y >= 2, "lattice.strip.N_y must be at least 2");
    require((c.kind == lattice_kind::square) == (c.boundary == strip_boundary::straight), "lattice.strip.boundary does not match lattice.kind");
    require(c.kx_points >= 1, "lattice.strip.kx_points must be positive");
    require(finite(c.params.delta), "params.delta must be finite");
    require(c.params.epsilon >= 0.0 && c.params.epsilon < 1.0, "params.epsilon must lie in [0, 1)");
    require(c.ewald.gamma_reg >= 0.0 && c.ewald.split_radius >= 0.0, "ewald.gamma and ewald.split_radius must be non-negative (0 = automatic)");
    require(c.ewald.g_shells >= 1.0 && c.ewald.r_shells >= 1.0, "ewald shell cutoffs must be at least 1");
    require(c.ewald.tol > 0.0 && c.ewald.tol < 1.0, "ewald.tol must lie in (0, 1)");
    require(c.band_points >= 2, "bands.points must be at least 2");
    require(c.grid >= 8, "topology.grid must be at least 8");
    require(c.gap_tol > 0.0, "topology.gap_tol must be positive");
    require(c.delta_steps >= 1 && c.epsilon_steps >= 1, "phase step counts must be positive");
    require(finite(c.delta_min) && finite(c.delta_max) && c.delta_min <= c.delta_max, "phase delta range is invalid");
    require(c.epsilon_min >= 0.0 && c.epsilon_max < 1.0 && c.epsilon_min <= c.epsilon_max, "phase epsilon range must lie in [0, 1)");
    require(finite(c.drive.detuning), "dynamics.detuning must be finite");
    require(c.drive.eta > 0.0 && finite(c.drive.eta), "dynamics.eta must be positive");
    require(c.drive.site >= -1, "dynamics.drive_site must be -1 (leftmost) or a site index");
    require(c.dt_out > 0.0 && c.t_max >= 0.0, "dynamics.dt_out must be positive and t_max non-negative");
    require(c.drive_off >= 0.0, "dynamics.drive_off must be non-negative");
    require(c.defect_fraction >= 0.0 && c.defect_fraction < 1.0, "dynamics.defect_fraction must lie in [0, 1)");
    require(seed >= 0, "dynamics.seed must be non-negative");
    require(finite(c.probe_k.x()) && finite(c.probe_k.y()), "probe wavevector must be finite");
    require(c.threads >= 1, "run.threads must be at least 1");
    c.seed = static_cast<std::uint64_t>(seed);
    if (c.output_dir.empty()) {
        const char* env = std::getenv("DIPOLAR_OUTPUT_DIR");
        c.output_dir = env && *env ? env : "out";
        c.document["output"]["dir"] = c.output_dir;
    }
    return c;
}

// Defaults, then the config file (if any), then the overrides in order.
inline run_config load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json doc = default_config_document();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config file: " + path);
        json user;
        try {
            user = json::parse(in);
        } catch (const json::parse_error& e) {
            throw config_error("config file " + path + " is not valid JSON: " + e.what());
        }
        detail::merge_checked(doc, user, "");
    }
    for (const auto& o : overrides) detail::merge_checked(doc, parse_override(o), "");
    return resolve_config(doc);
}

}  // namespace dipolar
