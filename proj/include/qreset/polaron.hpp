#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "qreset/bath.hpp"
#include "qreset/common.hpp"
#include "qreset/dynamics.hpp"

namespace qreset {

struct PolaronState {
    std::vector<Mode> modes;
    Vec f;
    double t = 0.0;

    double S() const { return f.squaredNorm(); }
};

inline PolaronState equilibrium_displacements(const std::vector<Mode>& modes, double omega_q0) {
    if (!(omega_q0 > 0.0)) throw domain_error("equilibrium_displacements: omega_q0 must be > 0");
    PolaronState st;
    st.modes = modes;
    st.f.resize(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) st.f[k] = -modes[k].g / (2.0 * (omega_q0 + modes[k].omega));
    return st;
}

inline PolaronState equilibrium_displacements(const DiscretizedBath& bath, double omega_q0) {
    return equilibrium_displacements(bath.modes, omega_q0);
}

// Excited population of a polaron state with total displacement S.
struct ResidualPopulation {
    double doubled;   // 1 - exp(-2S), twice the ansatz population
    double half;      // (1 - exp(-2S)) / 2, the <+|rho|+> population of the ansatz
    double small_S;   // S
};

inline ResidualPopulation residual_population(double S) {
    double e = -std::expm1(-2.0 * S);
    return {e, 0.5 * e, S};
}

inline ResidualPopulation residual_population(const PolaronState& st) { return residual_population(st.S()); }

enum class TdvpMode { full, linearized };

struct TdvpOptions {
    TdvpMode mode = TdvpMode::linearized;
    double rtol = 1e-9;
    double atol = 1e-12;
    std::vector<std::size_t> record_modes;  // modes whose f_k is stored at every step
    bool record_all = false;
};

struct TdvpTrajectory {
    std::vector<double> t;
    std::vector<double> S;
    std::vector<double> P_plus;               // (1 - e^{-2S})/2
    std::vector<std::size_t> recorded;
    std::vector<Vec> f;                       // per time: recorded displacements (all modes if record_all)
    PolaronState final_state;
};

// Integrates the TDVP equations with the protocol held constant over each step.
//   full:       df/dt = i f (w_q(t) e^{-2S} + w_k) + i g/2
//   linearized: df/dt = i f (Delta(t) + w_k') + i g/2,  w_k' = w_k + w_q0, Delta = w_q - w_q0
inline TdvpTrajectory integrate_tdvp(const PolaronState& init, const std::vector<double>& omega_q, double dt,
                                     const TdvpOptions& opt = {}) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const std::size_t M = init.modes.size();
    State x(2 * M);
    for (std::size_t k = 0; k < M; ++k) {
        x[2 * k] = init.f[k].real();
        x[2 * k + 1] = init.f[k].imag();
    }
    std::vector<double> wk(M), gk(M);
    for (std::size_t k = 0; k < M; ++k) {
        wk[k] = init.modes[k].omega;
        gk[k] = init.modes[k].g;
    }
    double wq = 0.0;
    auto rhs = [&](const State& y, State& dy, double) {
        double freq_q;
        if (opt.mode == TdvpMode::full) {
            double S = 0.0;
            for (std::size_t k = 0; k < 2 * M; ++k) S += y[k] * y[k];
            freq_q = wq * std::exp(-2.0 * S);
        } else {
            freq_q = wq;  // = Delta + w_q0, so w_k' + Delta = w_k + wq
        }
        for (std::size_t k = 0; k < M; ++k) {
            double w = freq_q + wk[k];
            double re = y[2 * k], im = y[2 * k + 1];
            // i f w + i g/2
            dy[2 * k] = -im * w;
            dy[2 * k + 1] = re * w + 0.5 * gk[k];
        }
    };
    auto stepper = ode::make_controlled(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
    TdvpTrajectory tr;
    tr.recorded = opt.record_modes;
    if (opt.record_all) {
        tr.recorded.resize(M);
        std::iota(tr.recorded.begin(), tr.recorded.end(), std::size_t(0));
    }
    auto record = [&](double t) {
        double S = 0.0;
        for (double v : x) S += v * v;
        tr.t.push_back(t);
        tr.S.push_back(S);
        tr.P_plus.push_back(residual_population(S).half);
        Vec fr(tr.recorded.size());
        for (std::size_t j = 0; j < tr.recorded.size(); ++j) {
            auto k = tr.recorded[j];
            fr[j] = cplx(x[2 * k], x[2 * k + 1]);
        }
        tr.f.push_back(std::move(fr));
    };
    double t = init.t;
    for (std::size_t n = 0; n < omega_q.size(); ++n) {
        wq = omega_q[n];
        double t1 = init.t + (n + 1) * dt;
        double h = std::min(dt, 0.1 / (std::abs(wq) + (M ? wk.back() : 0.0) + 1.0));
        try {
            ode::integrate_adaptive(stepper, rhs, x, t, t1, h);
        } catch (const std::exception& e) {
            throw numerical_error("integrate_tdvp: integration failed at t=" + std::to_string(t) + " ns: " + e.what());
        }
        t = t1;
        record(t);
    }
    tr.final_state = init;
    tr.final_state.t = t;
    for (std::size_t k = 0; k < M; ++k) tr.final_state.f[k] = cplx(x[2 * k], x[2 * k + 1]);
    return tr;
}

inline TdvpTrajectory integrate_tdvp(const PolaronState& init, const ControlProtocol& p, const TdvpOptions& opt = {}) {
    return integrate_tdvp(init, p.omega_q, p.dt, opt);
}

// Exact propagation of the linearized equation for piecewise-constant Delta:
// f <- (f - f*) e^{i W dt} + f*, W = Delta + w_k', f* = -g/(2W).
inline Vec linearized_exact(const PolaronState& init, const std::vector<double>& omega_q, double dt) {
    Vec f = init.f;
    for (double wq : omega_q)
        for (Eigen::Index k = 0; k < f.size(); ++k) {
            double W = wq + init.modes[k].omega;
            cplx fs = -init.modes[k].g / (2.0 * W);
            f[k] = (f[k] - fs) * std::exp(I * W * dt) + fs;
        }
    return f;
}

// First-order response to Delta(t) = h cos(Omega t) with slowly varying h:
// q_k = -h f_k0 (w' cos(Omega t) + i Omega sin(Omega t)) / (w'^2 - Omega^2).
inline Vec perturbative_solution(const std::vector<Mode>& modes, double omega_q0, double h, double Omega, double t,
                                 double min_detuning = 1e-3) {
    Vec q(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) {
        double wp = modes[k].omega + omega_q0;
        if (std::abs(wp - Omega) < min_detuning * wp)
            throw domain_error("perturbative_solution: mode " + std::to_string(k) + " (w'=" + std::to_string(wp) +
                               " rad/ns) is resonant with the drive");
        cplx f0 = -modes[k].g / (2.0 * wp);
        q[k] = -h * f0 * (wp * std::cos(Omega * t) + I * Omega * std::sin(Omega * t)) / (wp * wp - Omega * Omega);
    }
    return q;
}

// Same expression with prefactor i h f_k0 (a quarter-period phase slip);
// kept only to compare against the corrected form.
inline Vec perturbative_solution_shifted(const std::vector<Mode>& modes, double omega_q0, double h, double Omega,
                                         double t) {
    Vec q = perturbative_solution(modes, omega_q0, h, Omega, t, 0.0);
    return -I * q;
}

struct PhasePoint {
    double omega_prime;  // rad/ns
    double phase;        // arg(f_k - f_k0), NaN when the deviation vanishes
    double magnitude;
    bool valid;
};

inline std::vector<PhasePoint> phase_profile(const std::vector<Mode>& modes, const Vec& f, const Vec& f0,
                                             double omega_q0, double zero_tol = 1e-300) {
    if (f.size() != f0.size() || std::size_t(f.size()) != modes.size())
        throw dimension_error("phase_profile: size mismatch");
    std::vector<PhasePoint> out(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) {
        cplx q = f[k] - f0[k];
        double m = std::abs(q);
        bool ok = m > zero_tol;
        out[k] = {modes[k].omega + omega_q0, ok ? std::arg(q) : std::numeric_limits<double>::quiet_NaN(), m, ok};
    }
    return out;
}

// Indices of the strongest-coupled modes holding `fraction` of sum g_k^2.
inline std::vector<std::size_t> top_weight_modes(const std::vector<Mode>& modes, double fraction = 0.99) {
    std::vector<std::size_t> idx(modes.size());
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return modes[a].g * modes[a].g > modes[b].g * modes[b].g; });
    double tot = 0.0;
    for (auto& m : modes) tot += m.g * m.g;
    std::vector<std::size_t> out;
    double acc = 0.0;
    for (auto i : idx) {
        if (acc >= fraction * tot) break;
        out.push_back(i);
        acc += modes[i].g * modes[i].g;
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct CircularStats {
    double mean = 0.0;       // rad
    double resultant = 0.0;  // R in [0,1]
    double deviation = 0.0;  // sqrt(-2 ln R)
};

// Weighted by |q_k| over the given subset (all valid points if empty).
inline CircularStats circular_stats(const std::vector<PhasePoint>& pts, const std::vector<std::size_t>& subset = {}) {
    cplx z = 0.0;
    double w = 0.0;
    auto add = [&](const PhasePoint& p) {
        if (!p.valid) return;
        z += p.magnitude * std::exp(I * p.phase);
        w += p.magnitude;
    };
    if (subset.empty())
        for (auto& p : pts) add(p);
    else
        for (auto i : subset) add(pts[i]);
    CircularStats s;
    if (w <= 0.0) {
        s.mean = std::numeric_limits<double>::quiet_NaN();
        s.deviation = std::numeric_limits<double>::infinity();
        return s;
    }
    s.resultant = std::min(1.0, std::abs(z) / w);
    s.mean = std::arg(z);
    s.deviation = s.resultant > 0.0 ? std::sqrt(-2.0 * std::log(s.resultant)) : std::numeric_limits<double>::infinity();
    return s;
}

inline double wrap_angle(double a) { return std::remainder(a, two_pi); }

} // namespace qreset
