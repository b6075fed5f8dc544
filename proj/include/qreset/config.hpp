#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "qreset/bath.hpp"
#include "qreset/common.hpp"
#include "qreset/dynamics.hpp"

namespace qreset {

struct config_error : std::runtime_error {
    std::string key;
    config_error(const std::string& key_, const std::string& what)
        : std::runtime_error(key_ + ": " + what), key(key_) {}
};

struct BathConfig {
    std::string kind = "ohmic";
    double alpha = 0.03;
    double omega_c_ghz = 5.0;
    double sigma_ghz = 1.0;
    double temperature_ghz = 0.0;
};

struct TempoConfig {
    double dt_ns = 0.005;
    double t_f_ns = 11.0;
    double svd_cutoff = 1e-8;
    long max_bond = 256;
    double memory_tol = 1e-6;
    long memory_steps = -1;  // < 0: full window for ohmic, tail criterion otherwise
    std::string cache_dir;   // empty: no cache
};

struct SystemConfig {
    int levels = 2;
    double omega_q0_ghz = 5.0;
    double alpha_A_ghz = -0.3;
    double bounds_ghz[2] = {4.0, 7.0};
};

struct ControlConfig {
    std::string mode = "constant";  // constant | optimize | from_file
    std::string protocol_file;
    std::string init = "constant";  // constant | random
    double random_amplitude_ghz = 0.1;
    int max_iter = 500;
    double pgtol = 1e-9;
    int memory = 10;
    long checkpoint_every = 0;
};

struct TdvpConfig {
    int n_modes = 500;
    std::string equation = "linearized";  // linearized | full
    double omega_max_ghz = 0.0;           // 0: bath default
    std::vector<int> record_modes;
};

struct OutputConfig {
    std::string dir = "out";
    std::string prefix = "run";
};

struct Config {
    BathConfig bath;
    TempoConfig tempo;
    SystemConfig system;
    ControlConfig control;
    TdvpConfig tdvp;
    OutputConfig output;
    nlohmann::json raw;

    SpectralDensity spectral_density() const {
        double T = ghz_to_rad(bath.temperature_ghz);
        if (bath.kind == "ohmic") return SpectralDensity::ohmic(bath.alpha, ghz_to_rad(bath.omega_c_ghz), T);
        return SpectralDensity::gaussian(bath.alpha, ghz_to_rad(bath.omega_c_ghz), ghz_to_rad(bath.sigma_ghz), T);
    }
    long n_steps() const { return std::lround(tempo.t_f_ns / tempo.dt_ns); }
    double omega_q0() const { return ghz_to_rad(system.omega_q0_ghz); }
    TransmonSpec transmon() const { return {system.levels, omega_q0(), ghz_to_rad(system.alpha_A_ghz)}; }
    ControlProtocol constant_protocol() const {
        return ControlProtocol::constant(omega_q0(), tempo.dt_ns, n_steps(), ghz_to_rad(system.bounds_ghz[0]),
                                         ghz_to_rad(system.bounds_ghz[1]));
    }
    std::uint64_t hash() const {
        auto s = raw.dump();
        return fnv1a(s.data(), s.size());
    }
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& section, std::set<std::string> allowed) {
    if (!j.is_object()) throw config_error(section, "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw config_error(section + "." + it.key(), "unknown key");
}

template <class T>
void read(const json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(section + "." + key, std::string("wrong type (") + e.what() + ")");
    }
}

} // namespace config_detail

inline void validate(const Config& c) {
    auto fail = [](const std::string& k, const std::string& w) { throw config_error(k, w); };
    if (c.bath.kind != "ohmic" && c.bath.kind != "gaussian") fail("bath.kind", "must be \"ohmic\" or \"gaussian\"");
    if (!(c.bath.alpha >= 0.0)) fail("bath.alpha", "must be >= 0");
    if (!(c.bath.omega_c_ghz > 0.0)) fail("bath.omega_c_ghz", "must be > 0");
    if (c.bath.kind == "gaussian" && !(c.bath.sigma_ghz > 0.0)) fail("bath.sigma_ghz", "must be > 0");
    if (!(c.bath.temperature_ghz >= 0.0)) fail("bath.temperature_ghz", "must be >= 0");
    if (!(c.tempo.dt_ns > 0.0)) fail("tempo.dt_ns", "must be > 0");
    if (!(c.tempo.t_f_ns >= c.tempo.dt_ns)) fail("tempo.t_f_ns", "must be >= dt_ns");
    if (std::abs(c.tempo.t_f_ns / c.tempo.dt_ns - std::round(c.tempo.t_f_ns / c.tempo.dt_ns)) > 1e-6)
        fail("tempo.t_f_ns", "must be an integer multiple of dt_ns");
    if (!(c.tempo.svd_cutoff > 0.0 && c.tempo.svd_cutoff < 1.0)) fail("tempo.svd_cutoff", "must be in (0, 1)");
    if (c.tempo.max_bond < 1) fail("tempo.max_bond", "must be >= 1");
    if (!(c.tempo.memory_tol > 0.0)) fail("tempo.memory_tol", "must be > 0");
    if (c.system.levels < 2) fail("system.levels", "must be >= 2");
    if (!(c.system.omega_q0_ghz > 0.0)) fail("system.omega_q0_ghz", "must be > 0");
    if (!(c.system.bounds_ghz[0] < c.system.bounds_ghz[1])) fail("system.bounds_ghz", "lower bound must be below upper");
    if (c.system.omega_q0_ghz < c.system.bounds_ghz[0] || c.system.omega_q0_ghz > c.system.bounds_ghz[1])
        fail("system.omega_q0_ghz", "outside bounds_ghz");
    if (c.control.mode != "constant" && c.control.mode != "optimize" && c.control.mode != "from_file")
        fail("control.mode", "must be constant, optimize or from_file");
    if (c.control.mode == "from_file" && c.control.protocol_file.empty())
        fail("control.protocol_file", "required when mode is from_file");
    if (c.control.init != "constant" && c.control.init != "random") fail("control.init", "must be constant or random");
    if (c.control.max_iter < 0) fail("control.max_iter", "must be >= 0");
    if (c.control.memory < 1) fail("control.memory", "must be >= 1");
    if (c.tdvp.n_modes < 1) fail("tdvp.n_modes", "must be >= 1");
    if (c.tdvp.equation != "linearized" && c.tdvp.equation != "full") fail("tdvp.equation", "must be linearized or full");
    for (int k : c.tdvp.record_modes)
        if (k < 0 || k >= c.tdvp.n_modes) fail("tdvp.record_modes", "mode index out of range");
}

inline Config parse_config(const nlohmann::json& j) {
    using namespace config_detail;
    Config c;
    c.raw = j;
    check_keys(j, "config", {"bath", "tempo", "system", "control", "tdvp", "output"});
    if (j.contains("bath")) {
        const auto& b = j["bath"];
        check_keys(b, "bath", {"kind", "alpha", "omega_c_ghz", "sigma_ghz", "temperature_ghz"});
        read(b, "bath", "kind", c.bath.kind);
        read(b, "bath", "alpha", c.bath.alpha);
        read(b, "bath", "omega_c_ghz", c.bath.omega_c_ghz);
        read(b, "bath", "sigma_ghz", c.bath.sigma_ghz);
        read(b, "bath", "temperature_ghz", c.bath.temperature_ghz);
    }
    if (j.contains("tempo")) {
        const auto& t = j["tempo"];
        check_keys(t, "tempo", {"dt_ns", "t_f_ns", "svd_cutoff", "max_bond", "memory_tol", "memory_steps", "cache_dir"});
        read(t, "tempo", "dt_ns", c.tempo.dt_ns);
        read(t, "tempo", "t_f_ns", c.tempo.t_f_ns);
        read(t, "tempo", "svd_cutoff", c.tempo.svd_cutoff);
        read(t, "tempo", "max_bond", c.tempo.max_bond);
        read(t, "tempo", "memory_tol", c.tempo.memory_tol);
        read(t, "tempo", "memory_steps", c.tempo.memory_steps);
        read(t, "tempo", "cache_dir", c.tempo.cache_dir);
    }
    if (j.contains("system")) {
        const auto& s = j["system"];
        check_keys(s, "system", {"levels", "omega_q0_ghz", "alpha_A_ghz", "bounds_ghz"});
        read(s, "system", "levels", c.system.levels);
        read(s, "system", "omega_q0_ghz", c.system.omega_q0_ghz);
        read(s, "system", "alpha_A_ghz", c.system.alpha_A_ghz);
        if (s.contains("bounds_ghz")) {
            std::vector<double> bnd;
            read(s, "system", "bounds_ghz", bnd);
            if (bnd.size() != 2) throw config_error("system.bounds_ghz", "must have two entries");
            c.system.bounds_ghz[0] = bnd[0];
            c.system.bounds_ghz[1] = bnd[1];
        }
    }
    if (j.contains("control")) {
        const auto& k = j["control"];
        check_keys(k, "control", {"mode", "protocol_file", "init", "random_amplitude_ghz", "max_iter", "pgtol", "memory",
                                  "checkpoint_every"});
        read(k, "control", "mode", c.control.mode);
        read(k, "control", "protocol_file", c.control.protocol_file);
        read(k, "control", "init", c.control.init);
        read(k, "control", "random_amplitude_ghz", c.control.random_amplitude_ghz);
        read(k, "control", "max_iter", c.control.max_iter);
        read(k, "control", "pgtol", c.control.pgtol);
        read(k, "control", "memory", c.control.memory);
        read(k, "control", "checkpoint_every", c.control.checkpoint_every);
    }
    if (j.contains("tdvp")) {
        const auto& t = j["tdvp"];
        check_keys(t, "tdvp", {"n_modes", "equation", "omega_max_ghz", "record_modes"});
        read(t, "tdvp", "n_modes", c.tdvp.n_modes);
        read(t, "tdvp", "equation", c.tdvp.equation);
        read(t, "tdvp", "omega_max_ghz", c.tdvp.omega_max_ghz);
        read(t, "tdvp", "record_modes", c.tdvp.record_modes);
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        check_keys(o, "output", {"dir", "prefix"});
        read(o, "output", "dir", c.output.dir);
        read(o, "output", "prefix", c.output.prefix);
    }
    validate(c);
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("config", "cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

} // namespace qreset
