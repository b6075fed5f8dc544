#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "qreset/dynamics.hpp"
#include "qreset/influence.hpp"
#include "qreset/lbfgsb.hpp"

namespace qreset {

// 1 - Tr(rho_f rho_T) / Tr(rho_f); the normalisation absorbs truncation drift.
inline double infidelity(const Mat& rho_f, const Mat& rho_T) {
    if (rho_f.rows() != rho_T.rows() || rho_f.cols() != rho_T.cols())
        throw dimension_error("infidelity: dimension mismatch");
    cplx a = (rho_f * rho_T).trace(), b = rho_f.trace();
    return 1.0 - (a / b).real();
}

struct GradientOptions {
    long checkpoint_every = 0;             // 0: cache every step
    std::size_t memory_limit = 2ull << 30; // bytes of cached bond states
};

struct CostGradient {
    double cost = 0.0;
    std::vector<double> grad;  // dZ/d omega_q[n], rad/ns^-1
    double trace_drift = 0.0;  // |Tr rho_f - 1| before normalisation
};

// One forward sweep caching the bond states and one reverse sweep with the
// cotangent of the cost. All maps are complex-linear in the bond state, so the
// reverse sweep uses the bilinear pairing <x, y> = sum x.*y and dZ = -Re <lam, dv>.
// rho0 and rho_T are in the model's working basis.
inline CostGradient infidelity_gradient(const ProcessTensor& pt, const SystemModel& m, const ControlProtocol& p,
                                        const Mat& rho0_w, const Mat& rhoT_w, GradientOptions opt = {},
                                        bool with_gradient = true) {
    check_compatible(pt, m);
    const long N = p.n_steps();
    if (N != pt.n_steps) throw dimension_error("gradient: protocol length does not match process tensor");
    const int d = m.d;
    const Eigen::Index chi = pt.chi();
    const std::size_t per_state = std::size_t(chi) * d * d * sizeof(cplx);
    long every = opt.checkpoint_every > 0 ? opt.checkpoint_every : 1;
    if (with_gradient && (std::size_t(N / every) + 1) * per_state > opt.memory_limit)
        throw std::runtime_error("gradient: cached bond states need " +
                                 std::to_string((std::size_t(N / every) + 1) * per_state >> 20) +
                                 " MiB, above the memory limit; set checkpoint_every");

    auto S_of = [&](long n) { return m.half_step(p.omega_q[n], p.dt); };
    Mat v = pt.l * vec_rowmajor(rho0_w).transpose();
    std::vector<Mat> saved;
    if (with_gradient) saved.reserve(N / every + 1);
    Mat a, b;
    auto step = [&](long n, Mat& state) {
        Mat S = S_of(n);
        a.noalias() = state * S.transpose();
        apply_influence(pt, a, b);
        state.noalias() = b * S.transpose();
    };
    for (long n = 0; n < N; ++n) {
        if (with_gradient && n % every == 0) saved.push_back(v);
        step(n, v);
    }
    Vec rv = (pt.r.transpose() * v).transpose();
    Mat rho = unvec_rowmajor(rv, d);
    cplx A = (rho * rhoT_w).trace(), B = rho.trace();
    CostGradient out;
    out.cost = 1.0 - (A / B).real();
    out.trace_drift = std::abs(B - 1.0);
    if (!with_gradient) return out;

    // cotangent of rho (row-major Liouville index)
    Vec c(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) c[i * d + j] = rhoT_w(j, i) / B - (i == j ? A / (B * B) : 0.0);
    Mat lam = pt.r * c.transpose();
    out.grad.assign(N, 0.0);
    Mat mu, nu;
    std::vector<Mat> seg;
    for (long s0 = ((N - 1) / every) * every; s0 >= 0; s0 -= every) {
        long s1 = std::min(N, s0 + every);
        // rebuild bond states inside the segment
        seg.assign(1, saved[s0 / every]);
        for (long n = s0; n + 1 < s1; ++n) {
            Mat w = seg.back();
            step(n, w);
            seg.push_back(std::move(w));
        }
        for (long n = s1 - 1; n >= s0; --n) {
            const Mat& vn = seg[n - s0];
            Mat S = S_of(n), dS = m.d_half_step(p.omega_q[n], p.dt);
            a.noalias() = vn * S.transpose();
            apply_influence(pt, a, b);
            double g = -((lam.transpose() * b).cwiseProduct(dS)).sum().real();
            mu.noalias() = lam * S;
            apply_influence_adjoint(pt, mu, nu);
            g -= ((nu.transpose() * vn).cwiseProduct(dS)).sum().real();
            lam.noalias() = nu * S;
            out.grad[n] = g;
        }
    }
    return out;
}

struct OptimizeOptions {
    LbfgsbOptions lbfgsb;
    GradientOptions gradient;
    std::function<void(int, double, double)> on_iter;
};

struct OptimizationResult {
    ControlProtocol protocol;
    double infidelity = 0.0;
    double initial_infidelity = 0.0;
    std::vector<double> history;
    double gradient_norm_final = 0.0;
    int iterations = 0;
    int n_evaluations = 0;
    bool converged = false;
    std::string message;
    double seconds = 0.0;
};

inline OptimizationResult optimize(const ProcessTensor& pt, const SystemModel& m, const ControlProtocol& initial,
                                   const Mat& rho0_natural, const Mat& rhoT_natural, OptimizeOptions opt = {}) {
    initial.validate();
    const long N = initial.n_steps();
    Mat r0 = m.natural_to_working(rho0_natural), rT = m.natural_to_working(rhoT_natural);
    ControlProtocol work = initial;
    auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        for (long n = 0; n < N; ++n) work.omega_q[n] = x[n];
        auto cg = infidelity_gradient(pt, m, work, r0, rT, opt.gradient);
        g = Eigen::Map<Eigen::VectorXd>(cg.grad.data(), N);
        return cg.cost;
    };
    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(initial.omega_q.data(), N);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(N, initial.omega_min);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(N, initial.omega_max);
    auto t0 = std::chrono::steady_clock::now();
    auto r = lbfgsb_minimize(fg, x0, lo, hi, opt.lbfgsb, opt.on_iter);
    OptimizationResult out;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.protocol = initial;
    for (long n = 0; n < N; ++n) out.protocol.omega_q[n] = std::clamp(r.x[n], initial.omega_min, initial.omega_max);
    out.infidelity = r.f;
    out.initial_infidelity = r.history.front();
    out.history = r.history;
    out.gradient_norm_final = r.pg_norm;
    out.iterations = r.iterations;
    out.n_evaluations = r.evaluations;
    out.converged = r.converged;
    out.message = r.message;
    return out;
}

struct Spectrum {
    std::vector<double> freq_ghz;
    std::vector<double> power;

    // indices of local maxima, strongest first
    std::vector<std::size_t> peaks() const {
        std::vector<std::size_t> idx;
        for (std::size_t k = 1; k < power.size(); ++k) {
            bool left = power[k] > power[k - 1];
            bool right = k + 1 == power.size() || power[k] >= power[k + 1];
            if (left && right) idx.push_back(k);
        }
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return power[a] > power[b]; });
        return idx;
    }
};

// |DFT|^2 of omega_q - mean (one-sided, rad/ns amplitude units), frequency in GHz.
inline Spectrum power_spectrum(const ControlProtocol& p) {
    const long N = p.n_steps();
    Spectrum s;
    if (N == 0) return s;
    double mean = 0.0;
    for (double w : p.omega_q) mean += w;
    mean /= double(N);
    std::vector<double> x(N);
    for (long n = 0; n < N; ++n) x[n] = p.omega_q[n] - mean;
    Eigen::FFT<double> fft;
    std::vector<cplx> X;
    fft.fwd(X, x);
    for (long k = 0; k <= N / 2; ++k) {
        s.freq_ghz.push_back(double(k) / (double(N) * p.dt));
        s.power.push_back(std::norm(X[k]));
    }
    return s;
}

} // namespace qreset
