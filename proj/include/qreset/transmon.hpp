#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qreset/bath.hpp"
#include "qreset/common.hpp"
#include "qreset/dynamics.hpp"
#include "qreset/influence.hpp"

namespace qreset {

struct MultilevelPolaron {
    TransmonSpec spec;
    std::vector<Mode> modes;
    Vec f;
    double S = 0.0;
    int iterations = 0;
    bool relaxed = false;  // under-relaxation was switched on
};

inline double multilevel_energy(const TransmonSpec& spec, const std::vector<Mode>& modes, const Vec& f) {
    double S = f.squaredNorm(), E = spec.omega_q * S + 1.5 * spec.alpha_A * S * S;
    for (std::size_t k = 0; k < modes.size(); ++k)
        E += modes[k].omega * std::norm(f[k]) + modes[k].g * f[k].real();
    return E;
}

// Fixed point f_k = -g_k / (2 (w_q + 3 alpha_A S + w_k)), iterated on S.
inline MultilevelPolaron solve_multilevel_displacements(const TransmonSpec& spec, const std::vector<Mode>& modes,
                                                        double tol = 1e-13) {
    MultilevelPolaron mp;
    mp.spec = spec;
    mp.modes = modes;
    auto f_of = [&](double S) {
        Vec f(modes.size());
        for (std::size_t k = 0; k < modes.size(); ++k) {
            double den = spec.omega_q + 3.0 * spec.alpha_A * S + modes[k].omega;
            if (!(den > 0.0))
                throw numerical_error("solve_multilevel_displacements: non-positive denominator for mode " +
                                          std::to_string(k),
                                      S);
            f[k] = -modes[k].g / (2.0 * den);
        }
        return f;
    };
    double S = 0.0, step_prev = 0.0, relax = 1.0;
    for (int it = 1; it <= 100; ++it) {
        double Snew = f_of(S).squaredNorm();
        double step = Snew - S;
        if (it > 1 && step * step_prev < 0.0 && relax == 1.0) {
            relax = 0.5;
            mp.relaxed = true;
        }
        double next = S + relax * step;
        mp.iterations = it;
        if (std::abs(next - S) <= tol * std::max(next, 1e-300) || next == S) {
            mp.S = next;
            mp.f = f_of(next);
            mp.S = mp.f.squaredNorm();
            return mp;
        }
        step_prev = step;
        S = next;
    }
    throw numerical_error("solve_multilevel_displacements: no convergence in 100 iterations", S);
}

inline MultilevelPolaron solve_multilevel_displacements(const TransmonSpec& spec, const DiscretizedBath& bath,
                                                        double tol = 1e-13) {
    return solve_multilevel_displacements(spec, bath.modes, tol);
}

// P_n = sum_p (-1)^p S^{n+p} (2(n+p)-1)!! / (n! p!), valid for S < 1/2.
inline double population_series(double S, int n, double term_tol = 1e-15) {
    if (n < 0) throw domain_error("population_series: n must be >= 0");
    if (!(S >= 0.0)) throw domain_error("population_series: S must be >= 0");
    if (S >= 0.5) throw numerical_error("population_series: S >= 1/2 is outside the convergence domain; use the Fock-space evaluation", S);
    if (S == 0.0) return n == 0 ? 1.0 : 0.0;
    // p = 0 term: S^n (2n-1)!! / n!
    double t = 1.0;
    for (int j = 1; j <= n; ++j) t *= S * (2.0 * j - 1.0) / j;
    double sum = 0.0;
    for (int p = 0; p < 100000; ++p) {
        sum += t;
        double next = -t * S * (2.0 * (n + p) + 1.0) / (p + 1.0);
        if (std::abs(next) < term_tol) return sum;
        t = next;
    }
    throw numerical_error("population_series: series did not converge", S);
}

inline double population_series(const MultilevelPolaron& mp, int n) { return population_series(mp.S, n); }

// Reset-relevant initial state: maximally mixed over the two lowest levels.
inline Mat transmon_initial_state(int d) {
    Mat rho = Mat::Zero(d, d);
    rho(0, 0) = rho(1, 1) = 0.5;
    return rho;
}

struct MultilevelTrajectory {
    std::vector<double> t;
    RMat populations;  // N x d, number basis
    double max_trace_deviation = 0.0;
    double max_population_sum_error = 0.0;
};

inline MultilevelTrajectory run_multilevel_reset(const ProcessTensor& pt, const TransmonSpec& spec,
                                                 const ControlProtocol& protocol, const Mat& rho0) {
    auto model = transmon_model(spec);
    auto tr = run_protocol(pt, model, protocol, rho0);
    MultilevelTrajectory out;
    out.t = tr.t;
    out.populations = tr.populations;
    out.max_trace_deviation = tr.max_trace_deviation;
    for (Eigen::Index n = 0; n < out.populations.rows(); ++n)
        out.max_population_sum_error =
            std::max(out.max_population_sum_error, std::abs(out.populations.row(n).sum() - 1.0));
    return out;
}

inline MultilevelTrajectory run_multilevel_reset(const ProcessTensor& pt, const TransmonSpec& spec,
                                                 const ControlProtocol& protocol) {
    return run_multilevel_reset(pt, spec, protocol, transmon_initial_state(spec.d));
}

} // namespace qreset
