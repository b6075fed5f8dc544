#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qreset/common.hpp"
#include "qreset/control.hpp"
#include "qreset/dynamics.hpp"
#include "qreset/polaron.hpp"
#include "qreset/transmon.hpp"

namespace qreset {

inline constexpr const char* version_string = "0.1.0";
inline constexpr int csv_schema_version = 1;

// Every CSV starts with "# qreset <kind> schema=<n>" followed by the column header.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& kind, const std::vector<std::string>& columns)
        : os_(path) {
        if (!os_) throw std::runtime_error("cannot write " + path);
        os_ << "# qreset " << kind << " schema=" << csv_schema_version << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
        os_ << "\n";
        os_ << std::setprecision(12);
    }
    void row(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << v[i];
        os_ << "\n";
    }

private:
    std::ofstream os_;
};

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << "\n";
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
    std::vector<std::string> cols = {"t_ns", "P_plus"};
    const auto d = tr.populations.cols();
    if (d > 2)
        for (Eigen::Index k = 0; k < d; ++k) cols.push_back("P_" + std::to_string(k));
    CsvWriter w(path, "trajectory", cols);
    for (std::size_t n = 0; n < tr.t.size(); ++n) {
        std::vector<double> r = {tr.t[n], tr.P_plus[n]};
        if (d > 2)
            for (Eigen::Index k = 0; k < d; ++k) r.push_back(tr.populations(n, k));
        w.row(r);
    }
}

inline void write_multilevel_csv(const std::string& path, const MultilevelTrajectory& tr) {
    std::vector<std::string> cols = {"t_ns"};
    for (Eigen::Index k = 0; k < tr.populations.cols(); ++k) cols.push_back("P_" + std::to_string(k));
    CsvWriter w(path, "multilevel", cols);
    for (std::size_t n = 0; n < tr.t.size(); ++n) {
        std::vector<double> r = {tr.t[n]};
        for (Eigen::Index k = 0; k < tr.populations.cols(); ++k) r.push_back(tr.populations(n, k));
        w.row(r);
    }
}

inline void write_protocol_csv(const std::string& path, const ControlProtocol& p) {
    CsvWriter w(path, "protocol", {"t_ns", "omega_q_ghz"});
    for (long n = 0; n < p.n_steps(); ++n) w.row({n * p.dt, rad_to_ghz(p.omega_q[n])});
}

inline void write_spectrum_csv(const std::string& path, const Spectrum& s) {
    CsvWriter w(path, "spectrum", {"freq_ghz", "power"});
    for (std::size_t k = 0; k < s.power.size(); ++k) w.row({s.freq_ghz[k], s.power[k]});
}

inline void write_tdvp_csv(const std::string& path, const TdvpTrajectory& tr) {
    std::vector<std::string> cols = {"t_ns", "S", "P_plus"};
    for (auto k : tr.recorded) {
        cols.push_back("re_f_" + std::to_string(k));
        cols.push_back("im_f_" + std::to_string(k));
    }
    CsvWriter w(path, "tdvp", cols);
    for (std::size_t n = 0; n < tr.t.size(); ++n) {
        std::vector<double> r = {tr.t[n], tr.S[n], tr.P_plus[n]};
        for (Eigen::Index j = 0; j < tr.f[n].size(); ++j) {
            r.push_back(tr.f[n][j].real());
            r.push_back(tr.f[n][j].imag());
        }
        w.row(r);
    }
}

inline void write_phase_csv(const std::string& path, const std::vector<PhasePoint>& pts) {
    CsvWriter w(path, "phase_profile", {"omega_k_prime_ghz", "phase_rad"});
    for (auto& p : pts)
        if (p.valid) w.row({rad_to_ghz(p.omega_prime), p.phase});
}

// Reads a protocol CSV (t_ns, omega_q_ghz); comment lines start with '#'.
inline ControlProtocol read_protocol_csv(const std::string& path, double lo = ghz_to_rad(4.0),
                                         double hi = ghz_to_rad(7.0)) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    ControlProtocol p;
    p.omega_min = lo;
    p.omega_max = hi;
    std::string line;
    std::vector<double> t;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            if (line.rfind("t_ns", 0) == 0) continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) throw std::runtime_error(path + ": malformed line: " + line);
        t.push_back(a);
        p.omega_q.push_back(ghz_to_rad(b));
    }
    if (t.size() < 2) throw std::runtime_error(path + ": need at least two samples");
    p.dt = t[1] - t[0];
    for (std::size_t n = 1; n < t.size(); ++n)
        if (std::abs(t[n] - t[n - 1] - p.dt) > 1e-9 * std::max(1.0, t[n]))
            throw std::runtime_error(path + ": non-uniform time grid");
    return p;
}

inline nlohmann::json run_metadata(std::uint64_t config_hash, std::uint64_t seed) {
    return {{"version", version_string}, {"schema", csv_schema_version}, {"config_hash", hex64(config_hash)},
            {"seed", seed}};
}

} // namespace qreset
