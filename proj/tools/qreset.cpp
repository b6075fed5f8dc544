// Batch front-end: simulate, optimize, tdvp, multilevel, verify, spectrum.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qreset/bath.hpp"
#include "qreset/config.hpp"
#include "qreset/control.hpp"
#include "qreset/io.hpp"
#include "qreset/oracles.hpp"
#include "qreset/pipeline.hpp"
#include "qreset/polaron.hpp"
#include "qreset/transmon.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qreset;

namespace {

enum Exit { ok = 0, generic = 1, config = 2, convergence = 3, verification = 4 };

struct Common {
    std::string config_path;
    std::string out_dir;
    std::string protocol_file;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Run {
    Config cfg;
    fs::path out;
    std::string prefix;
    json meta;

    std::string path(const std::string& suffix) const { return (out / (prefix + "_" + suffix)).string(); }
};

Run setup(const Common& c, const std::string& command) {
    Run r;
    r.cfg = c.config_path.empty() ? parse_config(json::object()) : load_config(c.config_path);
    r.out = c.out_dir.empty() ? fs::path(r.cfg.output.dir) : fs::path(c.out_dir);
    r.prefix = r.cfg.output.prefix;
    fs::create_directories(r.out);
    r.meta = run_metadata(r.cfg.hash(), c.seed);
    r.meta["command"] = command;
    r.meta["config"] = r.cfg.raw;
    r.meta["config_path"] = c.config_path;
    Eigen::setNbThreads(std::max(1, c.threads));
    return r;
}

void finish(const Run& r, const std::string& suffix = "meta.json") { write_json(r.path(suffix), r.meta); }

ControlProtocol bounded(ControlProtocol p, const Config& c) {
    p.omega_min = ghz_to_rad(c.system.bounds_ghz[0]);
    p.omega_max = ghz_to_rad(c.system.bounds_ghz[1]);
    return p;
}

// Protocol chosen by control.mode (or an explicit --protocol file).
ControlProtocol input_protocol(const Common& c, const Config& cfg) {
    std::string file = !c.protocol_file.empty() ? c.protocol_file
                       : cfg.control.mode == "from_file" ? cfg.control.protocol_file
                                                         : std::string();
    if (file.empty()) return cfg.constant_protocol();
    auto p = bounded(read_protocol_csv(file), cfg);
    if (std::abs(p.dt - cfg.tempo.dt_ns) > 1e-9 * cfg.tempo.dt_ns)
        throw config_error("control.protocol_file", "time step differs from tempo.dt_ns");
    if (p.n_steps() != cfg.n_steps())
        throw config_error("control.protocol_file", "has " + std::to_string(p.n_steps()) + " steps, expected " +
                                                        std::to_string(cfg.n_steps()));
    p.validate();
    return p;
}

Mat initial_state(const Config& c) {
    return c.system.levels == 2 ? Mat(Mat::Identity(2, 2) / 2.0) : transmon_initial_state(c.system.levels);
}

int cmd_simulate(const Common& c) {
    auto r = setup(c, "simulate");
    auto m = model_for(r.cfg);
    auto p = input_protocol(c, r.cfg);
    auto b = make_process_tensor(r.cfg, m);
    for (auto& w : b.warnings) std::cerr << "warning: " << w << "\n";
    auto tr = run_protocol(b.pt, m, p, initial_state(r.cfg));
    write_trajectory_csv(r.path("trajectory.csv"), tr);
    r.meta["process_tensor"] = pt_metadata(b);
    r.meta["protocol_hash"] = hex64(p.hash());
    r.meta["final_P_plus"] = tr.P_plus.back();
    r.meta["max_trace_deviation"] = tr.max_trace_deviation;
    finish(r);
    std::printf("final P_plus %.6e\n", tr.P_plus.back());
    return ok;
}

int cmd_optimize(const Common& c) {
    auto r = setup(c, "optimize");
    const auto& cc = r.cfg.control;
    auto m = model_for(r.cfg);
    auto b = make_process_tensor(r.cfg, m);
    for (auto& w : b.warnings) std::cerr << "warning: " << w << "\n";
    ControlProtocol init = cc.mode == "from_file" || !c.protocol_file.empty() ? input_protocol(c, r.cfg)
                                                                               : r.cfg.constant_protocol();
    if (cc.init == "random") {
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& w : init.omega_q)
            w = std::clamp(w + ghz_to_rad(cc.random_amplitude_ghz) * u(rng), init.omega_min, init.omega_max);
    }
    Mat rho0 = initial_state(r.cfg);
    Mat target = m.working_to_natural(m.level_projector(0));

    OptimizeOptions oo;
    oo.lbfgsb.m = cc.memory;
    oo.lbfgsb.max_iter = cc.max_iter;
    oo.lbfgsb.pgtol = cc.pgtol;
    oo.gradient.checkpoint_every = cc.checkpoint_every;
    oo.on_iter = [](int it, double f, double pg) {
        if (it % 50 == 0) std::fprintf(stderr, "iter %d infidelity %.6e pg %.3e\n", it, f, pg);
    };
    auto res = optimize(b.pt, m, init, rho0, target, oo);

    double constant_cost = infidelity_gradient(b.pt, m, r.cfg.constant_protocol(), m.natural_to_working(rho0),
                                               m.level_projector(0), {}, false)
                               .cost;
    auto tr = run_protocol(b.pt, m, res.protocol, rho0);
    write_protocol_csv(r.path("protocol.csv"), res.protocol);
    write_trajectory_csv(r.path("trajectory.csv"), tr);
    write_spectrum_csv(r.path("spectrum.csv"), power_spectrum(res.protocol));
    {
        CsvWriter w(r.path("history.csv"), "cost_history", {"iteration", "infidelity"});
        for (std::size_t i = 0; i < res.history.size(); ++i) w.row({double(i), res.history[i]});
    }
    r.meta["process_tensor"] = pt_metadata(b);
    r.meta["initial_protocol_hash"] = hex64(init.hash());
    r.meta["protocol_hash"] = hex64(res.protocol.hash());
    r.meta["constant_infidelity"] = constant_cost;
    r.meta["initial_infidelity"] = res.initial_infidelity;
    r.meta["final_infidelity"] = res.infidelity;
    r.meta["improvement"] = constant_cost / res.infidelity;
    r.meta["iterations"] = res.iterations;
    r.meta["evaluations"] = res.n_evaluations;
    r.meta["converged"] = res.converged;
    r.meta["message"] = res.message;
    r.meta["projected_gradient"] = res.gradient_norm_final;
    r.meta["seconds"] = res.seconds;
    finish(r);
    std::printf("constant %.6e optimized %.6e (x%.2f) after %d iterations: %s\n", constant_cost, res.infidelity,
                constant_cost / res.infidelity, res.iterations, res.message.c_str());
    return ok;
}

int cmd_tdvp(const Common& c) {
    auto r = setup(c, "tdvp");
    const auto& tc = r.cfg.tdvp;
    auto sd = r.cfg.spectral_density();
    auto p = input_protocol(c, r.cfg);
    double wmax = tc.omega_max_ghz > 0.0 ? ghz_to_rad(tc.omega_max_ghz) : default_omega_max(sd);
    auto bath = discretize(sd, tc.n_modes, wmax);
    if (bath.coverage_warning) std::cerr << "warning: omega_max leaves part of the spectral weight uncovered\n";
    double w0 = r.cfg.omega_q0();
    auto eq = equilibrium_displacements(bath, w0);
    TdvpOptions opt;
    opt.mode = tc.equation == "full" ? TdvpMode::full : TdvpMode::linearized;
    for (int k : tc.record_modes) opt.record_modes.push_back(std::size_t(k));
    auto tr = integrate_tdvp(eq, p, opt);
    write_tdvp_csv(r.path("tdvp.csv"), tr);
    auto phases = phase_profile(bath.modes, tr.final_state.f, eq.f, w0);
    write_phase_csv(r.path("phase.csv"), phases);
    auto top = top_weight_modes(bath.modes);
    auto cs = circular_stats(phases, top);
    r.meta["n_modes"] = tc.n_modes;
    r.meta["omega_max_ghz"] = rad_to_ghz(wmax);
    r.meta["equation"] = tc.equation;
    r.meta["protocol_hash"] = hex64(p.hash());
    r.meta["S_equilibrium"] = eq.S();
    r.meta["final_S"] = tr.S.back();
    r.meta["final_P_plus"] = tr.P_plus.back();
    r.meta["phase_circular_deviation_top_modes"] = cs.deviation;
    finish(r);
    std::printf("S_eq %.6e final S %.6e final P_plus %.6e\n", eq.S(), tr.S.back(), tr.P_plus.back());
    return ok;
}

int cmd_multilevel(const Common& c) {
    auto r = setup(c, "multilevel");
    if (r.cfg.system.levels < 3) throw config_error("system.levels", "multilevel needs at least 3 levels");
    auto spec = r.cfg.transmon();
    auto p = input_protocol(c, r.cfg);
    auto m = transmon_model(spec);
    auto b = make_process_tensor(r.cfg, m);
    for (auto& w : b.warnings) std::cerr << "warning: " << w << "\n";
    auto tr = run_multilevel_reset(b.pt, spec, p);
    write_multilevel_csv(r.path("multilevel.csv"), tr);
    auto mp = solve_multilevel_displacements(spec, discretize(r.cfg.spectral_density(), r.cfg.tdvp.n_modes));
    json series = json::array();
    for (int n = 0; n < spec.d; ++n) series.push_back(mp.S < 0.5 ? population_series(mp.S, n) : fock_bruteforce_Pn(mp.S, n));
    r.meta["process_tensor"] = pt_metadata(b);
    r.meta["protocol_hash"] = hex64(p.hash());
    r.meta["polaron_S"] = mp.S;
    r.meta["polaron_populations"] = series;
    json fin = json::array();
    for (int n = 0; n < spec.d; ++n) fin.push_back(tr.populations(tr.populations.rows() - 1, n));
    r.meta["final_populations"] = fin;
    r.meta["max_population_sum_error"] = tr.max_population_sum_error;
    finish(r);
    std::printf("final P_1 %.6e P_2 %.6e\n", tr.populations(tr.populations.rows() - 1, 1),
                tr.populations(tr.populations.rows() - 1, 2));
    return ok;
}

int cmd_spectrum(const Common& c) {
    auto r = setup(c, "spectrum");
    if (c.protocol_file.empty() && r.cfg.control.protocol_file.empty())
        throw config_error("control.protocol_file", "spectrum needs --protocol or control.protocol_file");
    auto p = bounded(read_protocol_csv(c.protocol_file.empty() ? r.cfg.control.protocol_file : c.protocol_file), r.cfg);
    auto s = power_spectrum(p);
    write_spectrum_csv(r.path("spectrum.csv"), s);
    json peaks = json::array();
    auto pk = s.peaks();
    for (std::size_t i = 0; i < pk.size() && i < 5; ++i) peaks.push_back({{"freq_ghz", s.freq_ghz[pk[i]]}, {"power", s.power[pk[i]]}});
    r.meta["peaks"] = peaks;
    r.meta["bin_ghz"] = s.freq_ghz.size() > 1 ? s.freq_ghz[1] : 0.0;
    finish(r);
    for (auto& q : peaks) std::printf("peak %.4f GHz\n", q["freq_ghz"].get<double>());
    return ok;
}

// Quick oracle cross-checks; each entry records the measured deviation and its threshold.
int cmd_verify(const Common& c) {
    auto r = setup(c, "verify");
    json checks = json::array();
    bool all = true;
    auto add = [&](const std::string& name, double measured, double threshold) {
        bool pass = measured < threshold;
        all = all && pass;
        checks.push_back({{"name", name}, {"measured", measured}, {"threshold", threshold}, {"pass", pass}});
        std::printf("%-34s %.3e < %.1e  %s\n", name.c_str(), measured, threshold, pass ? "PASS" : "FAIL");
    };
    auto sd = r.cfg.spectral_density();

    if (sd.kind == BathKind::ohmic) {
        double worst = 0.0;
        for (int i = 0; i <= 40; ++i) {
            double t = 20.0 * i / 40.0;
            worst = std::max(worst, std::abs(eta_analytic(sd, t) - eta_quadrature(sd, t)));
        }
        add("kernel_analytic_vs_quadrature", worst, 1e-8);
    }

    {
        double worst = 0.0;
        for (double S : {0.001, 0.01, 0.1})
            for (int n = 0; n < 5; ++n) worst = std::max(worst, std::abs(population_series(S, n) - fock_bruteforce_Pn(S, n)));
        add("population_series_vs_fock", worst, 1e-8);
    }

    {
        // few-mode bath: TEMPO against exact diagonalization
        std::vector<Mode> modes = {{ghz_to_rad(4.0), ghz_to_rad(0.1)}, {ghz_to_rad(5.0), ghz_to_rad(0.1)},
                                   {ghz_to_rad(6.0), ghz_to_rad(0.1)}};
        const double dt = r.cfg.tempo.dt_ns;
        const long N = std::lround(0.5 / dt);
        auto m = qubit_model();
        InfluenceOptions io;
        io.memory_steps = N - 1;
        auto pt = build_process_tensor(build_influence(modes, 0.0, dt, N, m.coupling_eigenvalues, io), {1e-8, 1024});
        auto p = ControlProtocol::constant(r.cfg.omega_q0(), dt, N);
        Mat rho0 = Mat::Identity(2, 2) / 2.0;
        auto tr = run_protocol(pt, m, p, rho0);
        auto ex = exact_small_bath(modes, 4, p, rho0);
        double worst = 0.0;
        for (long n = 0; n < N; ++n) worst = std::max(worst, std::abs(tr.P_plus[n] - ex.P_plus[n]));
        add("tempo_vs_exact_small_bath", worst, 1e-3);
        add("exact_bath_energy_drift", ex.max_energy_drift, 1e-10);
    }

    {
        // adjoint gradient against central differences on a short random protocol
        const double dt = r.cfg.tempo.dt_ns;
        const long N = std::lround(0.25 / dt);
        auto m = qubit_model();
        InfluenceOptions io;
        io.memory_steps = N - 1;
        auto pt = build_process_tensor(build_influence(sd, dt, N, m.coupling_eigenvalues, io), {1e-10, 1024});
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> u(ghz_to_rad(4.0), ghz_to_rad(7.0));
        auto p = ControlProtocol::constant(r.cfg.omega_q0(), dt, N);
        for (auto& w : p.omega_q) w = u(rng);
        Mat r0 = Mat::Identity(2, 2) / 2.0, rT = m.level_projector(0);
        auto cg = infidelity_gradient(pt, m, p, r0, rT);
        const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * r.cfg.omega_q0();
        double diff = 0.0, scale = 0.0;
        for (long n = 0; n < N; ++n) {
            auto q = p;
            q.omega_q[n] += h;
            double fp = infidelity_gradient(pt, m, q, r0, rT, {}, false).cost;
            q.omega_q[n] -= 2 * h;
            double fm = infidelity_gradient(pt, m, q, r0, rT, {}, false).cost;
            double fd = (fp - fm) / (2 * h);
            diff = std::max(diff, std::abs(fd - cg.grad[n]));
            scale = std::max(scale, std::abs(fd));
        }
        add("gradient_vs_finite_difference", scale > 0.0 ? diff / scale : diff, 1e-4);
    }

    {
        auto rates = lindblad_rates(SpectralDensity::ohmic(0.0, sd.omega_c), r.cfg.omega_q0());
        add("lindblad_zero_coupling_rate", rates.total(), 1e-300);
    }

    r.meta["checks"] = checks;
    r.meta["pass"] = all;
    finish(r, "verify.json");
    return all ? ok : verification;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dissipative qubit reset: simulation, optimal control and polaron analysis"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", c.config_path, "run configuration (JSON)");
        s->add_option("--out", c.out_dir, "output directory (overrides output.dir)");
        s->add_option("--seed", c.seed, "random seed");
        s->add_option("--threads", c.threads, "threads for linear algebra")->check(CLI::PositiveNumber);
    };
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Common&);
        bool protocol;
    };
    const Sub subs[] = {{"simulate", "run a constant or file-supplied protocol", cmd_simulate, true},
                        {"optimize", "optimize the qubit frequency protocol", cmd_optimize, true},
                        {"tdvp", "polaron TDVP dynamics under a protocol", cmd_tdvp, true},
                        {"multilevel", "d-level transmon reset", cmd_multilevel, true},
                        {"verify", "oracle cross-checks", cmd_verify, false},
                        {"spectrum", "power spectrum of a protocol", cmd_spectrum, true}};
    int (*chosen)(const Common&) = nullptr;
    for (const auto& s : subs) {
        auto* sc = app.add_subcommand(s.name, s.help);
        add_common(sc);
        if (s.protocol) sc->add_option("--protocol", c.protocol_file, "protocol CSV (t_ns, omega_q_ghz)");
        sc->callback([&chosen, fn = s.fn] { chosen = fn; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? ok : config;
    }
    try {
        return chosen(c);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return convergence;
    } catch (const bond_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return convergence;
    } catch (const domain_error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return generic;
    }
}
