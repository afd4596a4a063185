// Scenario configuration: a single JSON file drives every study. Parsing
// validates eagerly and reports the offending field by its path; the fully
// resolved configuration can be echoed back out and re-run bit-identically.
#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutoff.hpp"
#include "dynamics.hpp"
#include "mode_space.hpp"
#include "spin_algebra.hpp"

namespace spinphoton {

using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

inline const Json* find(const Json& j, const std::string& key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline const Json& need(const Json& j, const std::string& key, const std::string& path) {
    const Json* p = find(j, key);
    if (!p) throw ConfigError("config: missing field '" + path + "'");
    return *p;
}

inline double num(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError("config: field '" + path + "' must be a number");
    return j.get<double>();
}

inline int integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError("config: field '" + path + "' must be an integer");
    return j.get<int>();
}

inline std::string text(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError("config: field '" + path + "' must be a string");
    return j.get<std::string>();
}

inline Vec3 vec3(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("config: field '" + path + "' must be an array of 3 numbers");
    return {num(j[0], path), num(j[1], path), num(j[2], path)};
}

}  // namespace cfgdetail

struct GridParams {
    int radial_order = 24;
    int angular_order = 8;
    double r_min = 0.0;
    double r_max = 0.0;  // 0: derive from the cutoff support
};

struct FieldInit {
    enum class Kind { zero, gaussian_shell, modes };
    Kind kind = Kind::zero;
    // gaussian_shell: transverse projections of constant vectors with a
    // radial Gaussian shell envelope
    Vec3 amplitude_q, amplitude_p;
    double radius = 1.0, width = 0.6;
    // modes: explicit per-node excitations
    struct ModeAmp {
        std::size_t node;
        int pol;
        double q, p;
    };
    std::vector<ModeAmp> modes;
};

struct SpinInit {
    bool use_subset = true;
    std::uint32_t subset = 0;                 // bitmask over particles
    std::vector<Complex> amplitudes;          // alternative: explicit state
};

struct IsingParams {
    std::vector<double> eps_list{0.2, 0.1, 0.05};
    int radial_order = 96;
    int min_angular = 16;
};

struct QuasimodeParams {
    int max_modes = 40;  // <= 0 keeps all grid modes
    int max_sector = 3;
    int p_max = 1;
    std::vector<double> h_list{1e-1, 1e-2, 1e-3};
    bool oracle = false;  // dense lowest-eigenvalue cross-check (guarded)
};

struct FieldMapParams {
    std::string source = "quasimode";  // quasimode | state
    Vec3 box_min{-1, -1, -1}, box_max{1, 1, 1};
    int nx = 5, ny = 5, nz = 5;
};

struct ScenarioConfig {
    GridParams grid;
    CutoffProfile cutoff = CutoffProfile::ring();
    SpinConfig particles;
    std::vector<double> h_values{0.1};
    FieldInit field_init;
    SpinInit spin_init;
    IntegratorSpec integrator;
    double max_energy_drift = 1e-4;
    std::vector<Vec3> probes;  // empty: default probe set
    std::string output_dir = "out";
    std::uint32_t seed = 20260810u;
    IsingParams ising;
    QuasimodeParams quasimode;
    FieldMapParams field_map;

    double resolved_r_max() const {
        return grid.r_max > 0.0 ? grid.r_max : cutoff.support_radius(1e-12);
    }

    static ScenarioConfig parse(const Json& j);
    Json echo() const;
};

inline ScenarioConfig ScenarioConfig::parse(const Json& j) {
    using namespace cfgdetail;
    ScenarioConfig c;

    if (const Json* g = find(j, "grid")) {
        if (const Json* v = find(*g, "radial_order")) c.grid.radial_order = integer(*v, "grid.radial_order");
        if (const Json* v = find(*g, "angular_order")) c.grid.angular_order = integer(*v, "grid.angular_order");
        if (const Json* v = find(*g, "r_min")) c.grid.r_min = num(*v, "grid.r_min");
        if (const Json* v = find(*g, "r_max")) c.grid.r_max = num(*v, "grid.r_max");
        if (c.grid.radial_order < 2) throw ConfigError("config: grid.radial_order must be >= 2");
        if (c.grid.angular_order < 3) throw ConfigError("config: grid.angular_order must be >= 3");
        if (c.grid.r_min < 0.0) throw ConfigError("config: grid.r_min must be >= 0");
    }

    if (const Json* cut = find(j, "cutoff")) {
        const std::string kind = text(need(*cut, "kind", "cutoff.kind"), "cutoff.kind");
        if (kind == "ring") {
            double rho = 0.1, s = 1.0;
            if (const Json* v = find(*cut, "rho_cut")) rho = num(*v, "cutoff.rho_cut");
            if (const Json* v = find(*cut, "decay")) s = num(*v, "cutoff.decay");
            if (rho <= 0.0) throw ConfigError("config: cutoff.rho_cut must be > 0");
            if (s <= 0.0) throw ConfigError("config: cutoff.decay must be > 0");
            c.cutoff = CutoffProfile::ring(rho, s);
        } else if (kind == "plateau") {
            const double eps = num(need(*cut, "eps", "cutoff.eps"), "cutoff.eps");
            if (eps <= 0.0) throw ConfigError("config: cutoff.eps must be > 0");
            c.cutoff = CutoffProfile::plateau_family(eps);
        } else if (kind == "zero") {
            c.cutoff = CutoffProfile::zero();
        } else {
            throw ConfigError("config: cutoff.kind must be one of ring|plateau|zero");
        }
    }

    if (const Json* p = find(j, "particles")) {
        c.particles.beta = vec3(need(*p, "beta", "particles.beta"), "particles.beta");
        const Json& pos = need(*p, "positions", "particles.positions");
        if (!pos.is_array()) throw ConfigError("config: particles.positions must be an array");
        for (std::size_t i = 0; i < pos.size(); ++i)
            c.particles.positions.push_back(vec3(pos[i], "particles.positions[" + std::to_string(i) + "]"));
        c.particles.n = static_cast<int>(c.particles.positions.size());
        if (c.particles.n > 12) throw ConfigError("config: particles.positions capped at 12 spins");
    }

    if (const Json* v = find(j, "h")) {
        c.h_values = {num(*v, "h")};
    } else if (const Json* v2 = find(j, "h_list")) {
        if (!v2->is_array() || v2->empty()) throw ConfigError("config: h_list must be a nonempty array");
        c.h_values.clear();
        for (const Json& e : *v2) c.h_values.push_back(num(e, "h_list[]"));
    }
    for (const double h : c.h_values)
        if (h <= 0.0) throw ConfigError("config: h must be > 0");

    if (const Json* init = find(j, "initial")) {
        if (const Json* f = find(*init, "field")) {
            const std::string prof = text(need(*f, "profile", "initial.field.profile"), "initial.field.profile");
            if (prof == "zero") {
                c.field_init.kind = FieldInit::Kind::zero;
            } else if (prof == "gaussian_shell") {
                c.field_init.kind = FieldInit::Kind::gaussian_shell;
                c.field_init.amplitude_q = vec3(need(*f, "amplitude_q", "initial.field.amplitude_q"),
                                                "initial.field.amplitude_q");
                c.field_init.amplitude_p = vec3(need(*f, "amplitude_p", "initial.field.amplitude_p"),
                                                "initial.field.amplitude_p");
                if (const Json* v = find(*f, "radius")) c.field_init.radius = num(*v, "initial.field.radius");
                if (const Json* v = find(*f, "width")) c.field_init.width = num(*v, "initial.field.width");
                if (c.field_init.width <= 0.0)
                    throw ConfigError("config: initial.field.width must be > 0");
            } else if (prof == "modes") {
                c.field_init.kind = FieldInit::Kind::modes;
                const Json& arr = need(*f, "modes", "initial.field.modes");
                if (!arr.is_array()) throw ConfigError("config: initial.field.modes must be an array");
                for (const Json& e : arr) {
                    FieldInit::ModeAmp m;
                    m.node = static_cast<std::size_t>(integer(need(e, "node", "initial.field.modes[].node"),
                                                              "initial.field.modes[].node"));
                    m.pol = integer(need(e, "pol", "initial.field.modes[].pol"), "initial.field.modes[].pol");
                    if (m.pol != 0 && m.pol != 1)
                        throw ConfigError("config: initial.field.modes[].pol must be 0 or 1");
                    m.q = e.contains("q") ? num(e["q"], "initial.field.modes[].q") : 0.0;
                    m.p = e.contains("p") ? num(e["p"], "initial.field.modes[].p") : 0.0;
                    c.field_init.modes.push_back(m);
                }
            } else {
                throw ConfigError("config: initial.field.profile must be zero|gaussian_shell|modes");
            }
        }
        if (const Json* s = find(*init, "spin")) {
            if (const Json* sub = find(*s, "subset")) {
                if (!sub->is_array()) throw ConfigError("config: initial.spin.subset must be an array");
                c.spin_init.use_subset = true;
                c.spin_init.subset = 0;
                for (const Json& e : *sub) {
                    const int lam = integer(e, "initial.spin.subset[]");
                    if (lam < 1 || lam > c.particles.n)
                        throw ConfigError("config: initial.spin.subset[] particle index out of range");
                    c.spin_init.subset |= 1u << (lam - 1);
                }
            } else if (const Json* amp = find(*s, "amplitudes")) {
                if (!amp->is_array()) throw ConfigError("config: initial.spin.amplitudes must be an array");
                c.spin_init.use_subset = false;
                for (const Json& e : *amp) {
                    if (!e.is_array() || e.size() != 2)
                        throw ConfigError("config: initial.spin.amplitudes[] must be [re, im] pairs");
                    c.spin_init.amplitudes.emplace_back(num(e[0], "initial.spin.amplitudes[]"),
                                                        num(e[1], "initial.spin.amplitudes[]"));
                }
            }
        }
    }

    if (const Json* in = find(j, "integrator")) {
        if (const Json* v = find(*in, "method")) {
            const std::string m = text(*v, "integrator.method");
            if (m == "rk4-interaction-picture")
                c.integrator.method = Method::rk4_interaction_picture;
            else if (m == "strang-splitting")
                c.integrator.method = Method::strang_splitting;
            else
                throw ConfigError(
                    "config: integrator.method must be rk4-interaction-picture|strang-splitting");
        }
        if (const Json* v = find(*in, "dt")) c.integrator.dt = num(*v, "integrator.dt");
        if (const Json* v = find(*in, "t_final")) c.integrator.t_final = num(*v, "integrator.t_final");
        if (const Json* v = find(*in, "record_every"))
            c.integrator.record_every = integer(*v, "integrator.record_every");
        if (const Json* v = find(*in, "max_energy_drift"))
            c.max_energy_drift = num(*v, "integrator.max_energy_drift");
        if (c.integrator.dt <= 0.0) throw ConfigError("config: integrator.dt must be > 0");
        if (c.integrator.t_final <= 0.0) throw ConfigError("config: integrator.t_final must be > 0");
        if (c.integrator.record_every < 1)
            throw ConfigError("config: integrator.record_every must be >= 1");
    }

    if (const Json* pr = find(j, "probes")) {
        if (!pr->is_array()) throw ConfigError("config: probes must be an array of 3-vectors");
        for (std::size_t i = 0; i < pr->size(); ++i)
            c.probes.push_back(cfgdetail::vec3((*pr)[i], "probes[" + std::to_string(i) + "]"));
    }

    if (const Json* v = find(j, "output_dir")) c.output_dir = text(*v, "output_dir");
    if (const Json* v = find(j, "seed")) c.seed = static_cast<std::uint32_t>(integer(*v, "seed"));

    if (const Json* is = find(j, "ising")) {
        if (const Json* v = find(*is, "eps_list")) {
            if (!v->is_array() || v->empty()) throw ConfigError("config: ising.eps_list must be a nonempty array");
            c.ising.eps_list.clear();
            for (const Json& e : *v) {
                const double eps = num(e, "ising.eps_list[]");
                if (eps <= 0.0) throw ConfigError("config: ising.eps_list[] must be > 0");
                c.ising.eps_list.push_back(eps);
            }
        }
        if (const Json* v = find(*is, "radial_order")) c.ising.radial_order = integer(*v, "ising.radial_order");
        if (const Json* v = find(*is, "min_angular")) c.ising.min_angular = integer(*v, "ising.min_angular");
        if (c.ising.radial_order < 64)
            throw ConfigError("config: ising.radial_order must be >= 64 to resolve the cutoff support");
    }

    if (const Json* qp = find(j, "quasimode")) {
        if (const Json* v = find(*qp, "max_modes")) c.quasimode.max_modes = integer(*v, "quasimode.max_modes");
        if (const Json* v = find(*qp, "max_sector")) c.quasimode.max_sector = integer(*v, "quasimode.max_sector");
        if (const Json* v = find(*qp, "p_max")) c.quasimode.p_max = integer(*v, "quasimode.p_max");
        if (const Json* v = find(*qp, "oracle")) {
            if (!v->is_boolean()) throw ConfigError("config: quasimode.oracle must be a boolean");
            c.quasimode.oracle = v->get<bool>();
        }
        if (const Json* v = find(*qp, "h_list")) {
            if (!v->is_array() || v->empty())
                throw ConfigError("config: quasimode.h_list must be a nonempty array");
            c.quasimode.h_list.clear();
            for (const Json& e : *v) c.quasimode.h_list.push_back(num(e, "quasimode.h_list[]"));
        }
        if (c.quasimode.max_sector < 1 || c.quasimode.max_sector > 4)
            throw ConfigError("config: quasimode.max_sector must be in [1, 4]");
        if (c.quasimode.p_max < 0) throw ConfigError("config: quasimode.p_max must be >= 0");
    }

    if (const Json* fm = find(j, "field_map")) {
        if (const Json* v = find(*fm, "source")) {
            c.field_map.source = text(*v, "field_map.source");
            if (c.field_map.source != "quasimode" && c.field_map.source != "state")
                throw ConfigError("config: field_map.source must be quasimode|state");
        }
        if (const Json* v = find(*fm, "box_min")) c.field_map.box_min = vec3(*v, "field_map.box_min");
        if (const Json* v = find(*fm, "box_max")) c.field_map.box_max = vec3(*v, "field_map.box_max");
        if (const Json* v = find(*fm, "npts")) {
            if (!v->is_array() || v->size() != 3)
                throw ConfigError("config: field_map.npts must be an array of 3 integers");
            c.field_map.nx = integer((*v)[0], "field_map.npts[0]");
            c.field_map.ny = integer((*v)[1], "field_map.npts[1]");
            c.field_map.nz = integer((*v)[2], "field_map.npts[2]");
            if (c.field_map.nx < 1 || c.field_map.ny < 1 || c.field_map.nz < 1)
                throw ConfigError("config: field_map.npts entries must be >= 1");
        }
    }

    return c;
}

inline Json ScenarioConfig::echo() const {
    Json j;
    j["grid"] = {{"radial_order", grid.radial_order},
                 {"angular_order", grid.angular_order},
                 {"r_min", grid.r_min},
                 {"r_max", resolved_r_max()}};
    switch (cutoff.kind) {
        case CutoffKind::ring_gaussian:
            j["cutoff"] = {{"kind", "ring"}, {"rho_cut", cutoff.rho_cut}, {"decay", cutoff.decay}};
            break;
        case CutoffKind::plateau:
            j["cutoff"] = {{"kind", "plateau"}, {"eps", cutoff.eps}};
            break;
        case CutoffKind::zero:
            j["cutoff"] = {{"kind", "zero"}};
            break;
    }
    Json pos = Json::array();
    for (const Vec3& x : particles.positions) pos.push_back({x.x, x.y, x.z});
    j["particles"] = {{"beta", {particles.beta.x, particles.beta.y, particles.beta.z}},
                      {"positions", pos}};
    if (h_values.size() == 1)
        j["h"] = h_values[0];
    else
        j["h_list"] = h_values;

    Json field;
    switch (field_init.kind) {
        case FieldInit::Kind::zero:
            field["profile"] = "zero";
            break;
        case FieldInit::Kind::gaussian_shell:
            field["profile"] = "gaussian_shell";
            field["amplitude_q"] = {field_init.amplitude_q.x, field_init.amplitude_q.y,
                                    field_init.amplitude_q.z};
            field["amplitude_p"] = {field_init.amplitude_p.x, field_init.amplitude_p.y,
                                    field_init.amplitude_p.z};
            field["radius"] = field_init.radius;
            field["width"] = field_init.width;
            break;
        case FieldInit::Kind::modes: {
            field["profile"] = "modes";
            Json arr = Json::array();
            for (const FieldInit::ModeAmp& m : field_init.modes)
                arr.push_back({{"node", m.node}, {"pol", m.pol}, {"q", m.q}, {"p", m.p}});
            field["modes"] = arr;
            break;
        }
    }
    Json spin;
    if (spin_init.use_subset) {
        Json arr = Json::array();
        for (int lam = 1; lam <= particles.n; ++lam)
            if ((spin_init.subset >> (lam - 1)) & 1) arr.push_back(lam);
        spin["subset"] = arr;
    } else {
        Json arr = Json::array();
        for (const Complex& a : spin_init.amplitudes) arr.push_back({a.real(), a.imag()});
        spin["amplitudes"] = arr;
    }
    j["initial"] = {{"field", field}, {"spin", spin}};

    j["integrator"] = {{"method", integrator.method == Method::rk4_interaction_picture
                                      ? "rk4-interaction-picture"
                                      : "strang-splitting"},
                       {"dt", integrator.dt},
                       {"t_final", integrator.t_final},
                       {"record_every", integrator.record_every},
                       {"max_energy_drift", max_energy_drift}};
    if (!probes.empty()) {
        Json arr = Json::array();
        for (const Vec3& x : probes) arr.push_back({x.x, x.y, x.z});
        j["probes"] = arr;
    }
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    j["ising"] = {{"eps_list", ising.eps_list},
                  {"radial_order", ising.radial_order},
                  {"min_angular", ising.min_angular}};
    j["quasimode"] = {{"max_modes", quasimode.max_modes},
                      {"max_sector", quasimode.max_sector},
                      {"p_max", quasimode.p_max},
                      {"h_list", quasimode.h_list},
                      {"oracle", quasimode.oracle}};
    j["field_map"] = {{"source", field_map.source},
                      {"box_min", {field_map.box_min.x, field_map.box_min.y, field_map.box_min.z}},
                      {"box_max", {field_map.box_max.x, field_map.box_max.y, field_map.box_max.z}},
                      {"npts", {field_map.nx, field_map.ny, field_map.nz}}};
    return j;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return ScenarioConfig::parse(j);
}

// Initial field data realized on a grid.
inline PhaseSpacePoint make_initial_field(const KGrid& g, const FieldInit& fi) {
    PhaseSpacePoint X(g);
    switch (fi.kind) {
        case FieldInit::Kind::zero:
            break;
        case FieldInit::Kind::gaussian_shell:
            for (std::size_t i = 0; i < g.size(); ++i) {
                const KGrid::Node& n = g.node(i);
                const double env = std::exp(-(n.omega - fi.radius) * (n.omega - fi.radius) /
                                            (fi.width * fi.width));
                X.q.c1(i) = env * dot(fi.amplitude_q, n.e1);
                X.q.c2(i) = env * dot(fi.amplitude_q, n.e2);
                X.p.c1(i) = env * dot(fi.amplitude_p, n.e1);
                X.p.c2(i) = env * dot(fi.amplitude_p, n.e2);
            }
            break;
        case FieldInit::Kind::modes:
            for (const FieldInit::ModeAmp& m : fi.modes) {
                if (m.node >= g.size())
                    throw ConfigError("config: initial.field.modes[].node exceeds grid size " +
                                      std::to_string(g.size()));
                if (m.pol == 0) {
                    X.q.c1(m.node) += m.q;
                    X.p.c1(m.node) += m.p;
                } else {
                    X.q.c2(m.node) += m.q;
                    X.p.c2(m.node) += m.p;
                }
            }
            break;
    }
    return X;
}

inline SpinState make_initial_spin(const SpinInit& si, const SpinConfig& cfg) {
    if (cfg.n == 0) {
        SpinState a(0);
        a[0] = 1.0;
        return a;
    }
    if (si.use_subset) return basis_state(si.subset, cfg.beta, cfg.n);
    if (si.amplitudes.size() != (std::size_t{1} << cfg.n))
        throw ConfigError("config: initial.spin.amplitudes must have 2^N entries");
    SpinState a(cfg.n);
    for (std::size_t i = 0; i < a.dim(); ++i) a[i] = si.amplitudes[i];
    const double n = a.norm();
    if (std::abs(n - 1.0) > 1e-6)
        throw ConfigError("config: initial.spin.amplitudes must be normalized within 1e-6");
    a.normalize();
    return a;
}

}  // namespace spinphoton
