#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "errors.hpp"

namespace dipolar {

using vec2 = Eigen::Vector2d;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

enum class lattice_kind { square, honeycomb };

inline std::string to_string(lattice_kind k) { return k == lattice_kind::square ? "square" : "honeycomb"; }

inline lattice_kind parse_lattice_kind(const std::string& s) {
    if (s == "square") return lattice_kind::square;
    if (s == "honeycomb") return lattice_kind::honeycomb;
    throw invalid_parameter("unknown lattice kind: " + s);
}

struct lattice_spec {
    lattice_kind kind = lattice_kind::square;
    double a = 0.1;  // nearest-neighbour spacing in units of lambda
    vec2 a1, a2;
    std::vector<vec2> basis;
    vec2 b1, b2;

    double cell_area() const { return std::abs(a1.x() * a2.y() - a1.y() * a2.x()); }
    int n_basis() const { return static_cast<int>(basis.size()); }
};

inline lattice_spec build_lattice(lattice_kind kind, double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw invalid_parameter("lattice spacing must be positive");
    lattice_spec s;
    s.kind = kind;
    s.a = a;
    if (kind == lattice_kind::square) {
        s.a1 = {a, 0.0};
        s.a2 = {0.0, a};
        s.basis = {vec2::Zero()};
    } else {
        // zigzag direction along x, nearest-neighbour bonds along y
        const double l = std::sqrt(3.0) * a;
        s.a1 = {l, 0.0};
        s.a2 = {0.5 * l, 1.5 * a};
        s.basis = {vec2(0.0, -0.5 * a), vec2(0.0, 0.5 * a)};
    }
    const double det = s.a1.x() * s.a2.y() - s.a1.y() * s.a2.x();
    s.b1 = two_pi / det * vec2(s.a2.y(), -s.a2.x());
    s.b2 = two_pi / det * vec2(-s.a1.y(), s.a1.x());
    return s;
}

struct path_point {
    vec2 k;
    double arc = 0.0;
    std::string label;  // non-empty at high-symmetry vertices
};

inline std::vector<std::pair<std::string, vec2>> high_symmetry_loop(const lattice_spec& s) {
    if (s.kind == lattice_kind::square) {
        const double p = std::numbers::pi / s.a;
        return {{"G", {0, 0}}, {"X", {p, 0}}, {"M", {p, p}}, {"G", {0, 0}}};
    }
    const double a = s.a;
    const vec2 k(two_pi / (3.0 * std::sqrt(3.0) * a), two_pi / (3.0 * a));
    const vec2 m(0.0, two_pi / (3.0 * a));
    return {{"G", {0, 0}}, {"K", k}, {"M", m}, {"G", {0, 0}}};
}

// Piecewise-linear closed path through the high-symmetry points; points are
// spread proportionally to segment length and every vertex is included.
inline std::vector<path_point> bz_path(const lattice_spec& s, int n_pts) {
    if (n_pts < 2) throw invalid_parameter("bz_path needs at least 2 points");
    const auto verts = high_symmetry_loop(s);
    std::vector<double> seg;
    double total = 0.0;
    for (size_t i = 0; i + 1 < verts.size(); ++i) {
        seg.push_back((verts[i + 1].second - verts[i].second).norm());
        total += seg.back();
    }
    std::vector<path_point> out;
    for (int i = 0; i < n_pts; ++i) {
        const double t = total * i / (n_pts - 1);
        double acc = 0.0;
        size_t j = 0;
        while (j + 1 < seg.size() && t > acc + seg[j]) acc += seg[j++];
        const double f = std::clamp((t - acc) / seg[j], 0.0, 1.0);
        out.push_back({verts[j].second + f * (verts[j + 1].second - verts[j].second), t, ""});
    }
    // snap the nearest sample onto each vertex so labels are exact
    double acc = 0.0;
    for (size_t v = 0; v < verts.size(); ++v) {
        if (v > 0) acc += seg[v - 1];
        int best = static_cast<int>(std::lround(acc / total * (n_pts - 1)));
        best = std::clamp(best, 0, n_pts - 1);
        out[best].k = verts[v].second;
        out[best].arc = acc;
        out[best].label = verts[v].first;
    }
    return out;
}

// bearded_zigzag ends each side on a zigzag chain; bearded keeps one dangling
// site per cell outside it.
enum class strip_boundary { straight, bearded_zigzag, bearded };

inline strip_boundary parse_strip_boundary(const std::string& s) {
    if (s == "straight") return strip_boundary::straight;
    if (s == "bearded_zigzag") return strip_boundary::bearded_zigzag;
    if (s == "bearded") return strip_boundary::bearded;
    throw invalid_parameter("unknown strip boundary: " + s);
}

inline std::string to_string(strip_boundary b) {
    return b == strip_boundary::straight ? "straight" : b == strip_boundary::bearded_zigzag ? "bearded_zigzag" : "bearded";
}

struct strip_spec {
    lattice_spec lattice;
    int n_y = 0;
    strip_boundary boundary = strip_boundary::straight;
    double period = 0.0;        // super-cell period along x
    std::vector<vec2> sites;    // super-cell sites, ordered bottom to top
    std::vector<int> top, bottom;
};

inline strip_spec build_strip(const lattice_spec& lat, int n_y, strip_boundary boundary) {
    if (n_y < 2) throw invalid_parameter("strip needs at least 2 sites across");
    const bool sq = lat.kind == lattice_kind::square;
    if (sq != (boundary == strip_boundary::straight))
        throw invalid_parameter("strip boundary incompatible with lattice kind");
    strip_spec s;
    s.lattice = lat;
    s.n_y = n_y;
    s.boundary = boundary;
    const double a = lat.a;
    int edge_rows = 1;
    if (sq) {
        s.period = a;
        for (int j = 0; j < n_y; ++j) s.sites.emplace_back(0.0, j * a);
    } else {
        // bonds alternate vertical / zigzag upward; the first bond is zigzag for
        // zigzag-chain edges and vertical for dangling ones
        const double l = std::sqrt(3.0) * a;
        const int vertical = boundary == strip_boundary::bearded ? 1 : 0;
        s.period = l;
        vec2 p(0.0, 0.0);
        s.sites.push_back(p);
        for (int j = 1; j < n_y; ++j) {
            if (j % 2 == vertical) {
                p += vec2(0.0, a);
            } else {
                p += vec2(0.5 * l, 0.5 * a);
                if (p.x() >= l - 1e-12) p.x() -= l;
            }
            s.sites.push_back(p);
        }
        edge_rows = 2;
    }
    edge_rows = std::min(edge_rows, n_y / 2);
    for (int j = 0; j < edge_rows; ++j) {
        s.bottom.push_back(j);
        s.top.push_back(n_y - 1 - j);
    }
    return s;
}

struct finite_lattice {
    std::vector<vec2> positions;
    std::vector<int> sublattice;
    std::vector<bool> active;
    std::vector<bool> boundary;  // geometric boundary of the defect-free shape
    std::vector<int> edge_ring;
    int rings = 0;
    double defect_fraction = 0.0;
    std::uint64_t seed = 0;
    double a = 0.0;

    int size() const { return static_cast<int>(positions.size()); }
    int active_count() const { return static_cast<int>(std::count(active.begin(), active.end(), true)); }
    std::vector<int> active_sites() const {
        std::vector<int> idx;
        for (int i = 0; i < size(); ++i)
            if (active[i]) idx.push_back(i);
        return idx;
    }
};

inline std::vector<int> order_edge_ring(const finite_lattice& f) {
    vec2 c = vec2::Zero();
    int n = 0;
    for (int i = 0; i < f.size(); ++i)
        if (f.active[i]) {
            c += f.positions[i];
            ++n;
        }
    if (n > 0) c /= n;
    std::vector<int> ring;
    for (int i = 0; i < f.size(); ++i)
        if (f.active[i] && f.boundary[i]) ring.push_back(i);
    auto key = [&](int i) {
        const vec2 d = f.positions[i] - c;
        double ang = std::atan2(d.y(), d.x());
        if (ang < 0) ang += two_pi;
        return std::make_tuple(std::round(ang * 1e9) / 1e9, d.norm(), i);
    };
    std::sort(ring.begin(), ring.end(), [&](int x, int y) { return key(x) < key(y); });
    return ring;
}

// Zigzag-terminated hexagonal flake: hexagonal plaquettes whose centres lie
// within hex distance n-1 of the origin; 6 n^2 sites.
inline finite_lattice build_hex_flake(int n, double a = 0.1) {
    if (n < 1) throw invalid_parameter("flake needs at least one ring");
    if (!(a > 0.0)) throw invalid_parameter("lattice spacing must be positive");
    const double l = std::sqrt(3.0) * a;
    const vec2 t1(l, 0.0), t2(0.5 * l, 1.5 * a);
    std::map<std::pair<long, long>, int> index;
    std::vector<int> plaquettes;
    finite_lattice f;
    f.rings = n;
    f.a = a;
    auto key = [&](const vec2& p) { return std::make_pair(std::lround(p.x() / a * 1e6), std::lround(p.y() / a * 1e6)); };
    for (int i = -(n - 1); i <= n - 1; ++i)
        for (int j = -(n - 1); j <= n - 1; ++j) {
            if (std::abs(i + j) > n - 1) continue;
            const vec2 c = i * t1 + j * t2;
            for (int v = 0; v < 6; ++v) {
                const double ang = std::numbers::pi / 2 - v * std::numbers::pi / 3;
                const vec2 p = c + a * vec2(std::cos(ang), std::sin(ang));
                auto [it, fresh] = index.try_emplace(key(p), f.size());
                if (fresh) {
                    f.positions.push_back(p);
                    f.sublattice.push_back(v % 2 == 0 ? 0 : 1);
                    plaquettes.push_back(0);
                }
                ++plaquettes[it->second];
            }
        }
    f.active.assign(f.size(), true);
    f.boundary.resize(f.size());
    for (int i = 0; i < f.size(); ++i) f.boundary[i] = plaquettes[i] < 3;
    f.edge_ring = order_edge_ring(f);
    return f;
}

// Unbiased index in [0, bound) from a 64-bit engine, independent of the
// standard library's distribution implementation.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do v = rng();
    while (v >= limit);
    return v % bound;
}

inline finite_lattice apply_defects(const finite_lattice& lat, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw invalid_parameter("defect fraction must lie in [0, 1)");
    finite_lattice out = lat;
    out.defect_fraction = fraction;
    out.seed = seed;
    const int n = lat.size();
    const int remove = static_cast<int>(std::lround(fraction * n));
    if (remove == 0) return out;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (int i = 0; i < remove; ++i) {
        const int j = i + static_cast<int>(bounded_draw(rng, n - i));
        std::swap(order[i], order[j]);
        out.active[order[i]] = false;
    }
    out.edge_ring = order_edge_ring(out);
    return out;
}

inline nlohmann::json to_json(const finite_lattice& f) {
    nlohmann::json j;
    j["kind"] = "honeycomb";
    j["a"] = f.a;
    j["rings"] = f.rings;
    j["defect_fraction"] = f.defect_fraction;
    j["seed"] = f.seed;
    auto& sites = j["sites"] = nlohmann::json::array();
    for (int i = 0; i < f.size(); ++i)
        sites.push_back({{"x", f.positions[i].x()}, {"y", f.positions[i].y()}, {"sublattice", f.sublattice[i]}, {"active", bool(f.active[i])}});
    j["edge_ring"] = f.edge_ring;
    return j;
}

inline nlohmann::json to_json(const lattice_spec& s) {
    return {{"kind", to_string(s.kind)},
            {"a", s.a},
            {"a1", {s.a1.x(), s.a1.y()}},
            {"a2", {s.a2.x(), s.a2.y()}},
            {"b1", {s.b1.x(), s.b1.y()}},
            {"b2", {s.b2.x(), s.b2.y()}}};
}

}  // namespace dipolar
