#pragma once

#include <filesystem>
#include <string>

#include "qreset/config.hpp"
#include "qreset/dynamics.hpp"
#include "qreset/influence.hpp"
#include "qreset/io.hpp"

namespace qreset {

inline SystemModel model_for(const Config& c) {
    return c.system.levels == 2 ? qubit_model() : transmon_model(c.transmon());
}

inline InfluenceOptions influence_options(const Config& c) {
    InfluenceOptions io;
    io.memory_tol = c.tempo.memory_tol;
    io.memory_steps = c.tempo.memory_steps;
    // the Ohmic kernel has a slowly decaying 1/t^2 tail, so keep the whole window
    if (io.memory_steps < 0 && c.bath.kind == "ohmic") io.memory_steps = c.n_steps() - 1;
    return io;
}

struct PtBuild {
    ProcessTensor pt;
    std::vector<std::string> warnings;
    std::string cache_file;  // empty when caching is off
    bool from_cache = false;
};

// Builds (or loads from tempo.cache_dir) the process tensor for a config.
inline PtBuild make_process_tensor(const Config& c, const SystemModel& m) {
    PtBuild out;
    auto inf = build_influence(c.spectral_density(), c.tempo.dt_ns, c.n_steps(), m.coupling_eigenvalues,
                               influence_options(c));
    out.warnings = inf.warnings;
    BuildOptions bo{c.tempo.svd_cutoff, c.tempo.max_bond};
    if (!c.tempo.cache_dir.empty()) {
        auto key = pt_cache_key(inf.bath_hash, inf.dt, inf.n_steps, bo.svd_cutoff, inf.memory_steps,
                                m.coupling_eigenvalues);
        key = fnv1a_value(static_cast<std::int64_t>(bo.max_bond), key);
        std::filesystem::create_directories(c.tempo.cache_dir);
        out.cache_file = (std::filesystem::path(c.tempo.cache_dir) / ("pt_" + hex64(key) + ".bin")).string();
        if (std::filesystem::exists(out.cache_file)) {
            out.pt = load_process_tensor(out.cache_file);
            out.from_cache = true;
            return out;
        }
    }
    out.pt = build_process_tensor(inf, bo);
    if (!out.cache_file.empty()) save_process_tensor(out.pt, out.cache_file);
    return out;
}

inline nlohmann::json pt_metadata(const PtBuild& b) {
    return {{"bath_hash", hex64(b.pt.bath_hash)},
            {"dt_ns", b.pt.dt},
            {"n_steps", b.pt.n_steps},
            {"memory_steps", b.pt.memory_steps},
            {"svd_cutoff", b.pt.svd_cutoff},
            {"max_bond", b.pt.max_bond},
            {"bond_dimension", b.pt.chi()},
            {"discarded_weight", b.pt.discarded_weight},
            {"from_cache", b.from_cache},
            {"cache_file", b.cache_file},
            {"warnings", b.warnings}};
}

} // namespace qreset
