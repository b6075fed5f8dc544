#pragma once

#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qreset/bath.hpp"
#include "qreset/common.hpp"
#include "qreset/dynamics.hpp"

namespace qreset {

// ---- Born-Markov reference ------------------------------------------------------

// Golden-rule rates for H_S = (w/2) sigma_x with coupling (sigma_z/2) sum g_k (b_k + b_k^dag):
// the |+> <-> |-> matrix element of sigma_z/2 is 1/2, so the emission rate is
// 2 pi (1/4) J(w) (n(w) + 1) and absorption 2 pi (1/4) J(w) n(w).
struct LindbladRates {
    double down = 0.0;
    double up = 0.0;
    double total() const { return down + up; }
};

inline LindbladRates lindblad_rates(const SpectralDensity& sd, double omega_q) {
    double G = 0.5 * std::numbers::pi * eval_spectral_density(sd, omega_q);
    double nb = sd.temperature > zero_temperature ? 1.0 / std::expm1(omega_q / sd.temperature) : 0.0;
    return {G * (nb + 1.0), G * nb};
}

struct LindbladResult {
    std::vector<double> t;
    std::vector<double> P_plus;
    LindbladRates rates;
};

// Integrates the amplitude-damping master equation in the |->, |+> basis by
// exponentiating its 4x4 generator (no secular approximation beyond dropping
// the Lamb shift).
inline LindbladResult lindblad_reference(const SpectralDensity& sd, double omega_q, const std::vector<double>& times,
                                         const Mat& rho0_levels) {
    LindbladResult out;
    out.rates = lindblad_rates(sd, omega_q);
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = -0.5 * omega_q;
    H(1, 1) = 0.5 * omega_q;
    Mat lower = Mat::Zero(2, 2);  // |-><+|
    lower(0, 1) = 1.0;
    Mat Id = Mat::Identity(2, 2);
    // row-major vec: vec(A X B) = (A kron B^T) vec(X)
    auto lmul = [&](const Mat& A) { return Eigen::kroneckerProduct(A, Id).eval(); };
    auto rmul = [&](const Mat& B) { return Eigen::kroneckerProduct(Id, B.transpose()).eval(); };
    auto dissipator = [&](const Mat& L, double g) {
        Mat LdL = L.adjoint() * L;
        return (g * (Eigen::kroneckerProduct(L, L.conjugate()).eval() - 0.5 * lmul(LdL) - 0.5 * rmul(LdL))).eval();
    };
    Mat Lgen = -I * (lmul(H) - rmul(H)) + dissipator(lower, out.rates.down) + dissipator(lower.adjoint(), out.rates.up);
    Vec v0 = vec_rowmajor(rho0_levels);
    for (double t : times) {
        Mat E = (Lgen * t).exp();
        Vec v = E * v0;
        out.t.push_back(t);
        out.P_plus.push_back(v[3].real());
    }
    return out;
}

// Least-squares slope of log P over t in [t0, t1]: returns the decay rate.
inline double fit_exponential_rate(const std::vector<double>& t, const std::vector<double>& P, double t0, double t1) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= t0 && t[i] <= t1 && P[i] > 0) {
            double y = std::log(P[i]);
            sx += t[i];
            sy += y;
            sxx += t[i] * t[i];
            sxy += t[i] * y;
            ++n;
        }
    if (n < 2) throw domain_error("fit_exponential_rate: fewer than two points in the window");
    return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---- exact diagonalization of a few-mode bath ---------------------------------------

struct ExactBathResult {
    std::vector<double> t;
    std::vector<Mat> rho;           // reduced qubit state, sigma_z basis
    std::vector<double> P_plus;
    double max_energy_drift = 0.0;  // relative, for time-independent stretches
    int dim = 0;
};

// Qubit plus modes truncated at fock_dim each, bath initially in vacuum.
// The protocol is piecewise constant; each step is exp(-i H(w_n) dt) from an
// eigendecomposition (cached per distinct w).
inline ExactBathResult exact_small_bath(const std::vector<Mode>& modes, int fock_dim, const ControlProtocol& p,
                                        const Mat& rho0) {
    const int M = static_cast<int>(modes.size());
    if (fock_dim < 2) throw domain_error("exact_small_bath: fock_dim must be >= 2");
    int dimB = 1;
    for (int k = 0; k < M; ++k) dimB *= fock_dim;
    const int D = 2 * dimB;
    if (D > 4096) throw domain_error("exact_small_bath: Hilbert space too large");

    RMat a = RMat::Zero(fock_dim, fock_dim);
    for (int n = 1; n < fock_dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    auto embed = [&](const RMat& op, int k) {
        RMat out = RMat::Identity(1, 1);
        for (int j = 0; j < M; ++j) {
            RMat f = j == k ? op : RMat(RMat::Identity(fock_dim, fock_dim));
            out = Eigen::kroneckerProduct(out, f).eval();
        }
        return out;
    };
    RMat Hb = RMat::Zero(dimB, dimB), X = RMat::Zero(dimB, dimB);
    for (int k = 0; k < M; ++k) {
        Hb += modes[k].omega * embed(a.transpose() * a, k);
        X += modes[k].g * embed(a + a.transpose(), k);
    }
    RMat sx(2, 2), sz(2, 2), I2 = RMat::Identity(2, 2), IB = RMat::Identity(dimB, dimB);
    sx << 0, 1, 1, 0;
    sz << 1, 0, 0, -1;
    RMat H0 = Eigen::kroneckerProduct(I2, Hb).eval() + 0.5 * Eigen::kroneckerProduct(sz, X).eval();
    RMat Hx = 0.5 * Eigen::kroneckerProduct(sx, IB).eval();

    std::map<double, std::pair<RVec, RMat>> cache;
    auto eig = [&](double w) -> const std::pair<RVec, RMat>& {
        auto it = cache.find(w);
        if (it != cache.end()) return it->second;
        Eigen::SelfAdjointEigenSolver<RMat> es(H0 + w * Hx);
        return cache.emplace(w, std::make_pair(es.eigenvalues(), es.eigenvectors())).first->second;
    };

    // pure-state decomposition of rho0 (tensor bath vacuum)
    Eigen::SelfAdjointEigenSolver<Mat> r0(rho0);
    std::vector<double> weights;
    std::vector<Vec> psi;
    for (int j = 0; j < 2; ++j) {
        if (r0.eigenvalues()[j] <= 1e-15) continue;
        Vec s = r0.eigenvectors().col(j);
        Vec full = Vec::Zero(D);
        full[0] = s[0];      // |up> (x) vacuum
        full[dimB] = s[1];   // |down> (x) vacuum
        weights.push_back(r0.eigenvalues()[j]);
        psi.push_back(full);
    }
    ExactBathResult out;
    out.dim = D;
    const double s2 = 1.0 / std::sqrt(2.0);
    Vec plus(2);
    plus << s2, s2;
    std::vector<double> e_start(psi.size());
    double w_prev = std::numeric_limits<double>::quiet_NaN();
    for (long n = 0; n < p.n_steps(); ++n) {
        double w = p.omega_q[n];
        const auto& [ev, V] = eig(w);
        Vec ph = (-I * ev.cast<cplx>() * p.dt).array().exp();
        Mat rho = Mat::Zero(2, 2);
        for (std::size_t j = 0; j < psi.size(); ++j) {
            Vec c = V.transpose().cast<cplx>() * psi[j];
            if (w != w_prev) e_start[j] = (c.cwiseAbs2().transpose() * ev)(0);
            c = c.cwiseProduct(ph);
            double e_now = (c.cwiseAbs2().transpose() * ev)(0);
            out.max_energy_drift =
                std::max(out.max_energy_drift, std::abs(e_now - e_start[j]) / std::max(1.0, std::abs(e_start[j])));
            psi[j] = V.cast<cplx>() * c;
            // partial trace over the bath
            Eigen::Map<const Mat> blk(psi[j].data(), dimB, 2);  // column s = qubit state s
            rho += weights[j] * (blk.transpose() * blk.conjugate());
        }
        w_prev = w;
        out.t.push_back((n + 1) * p.dt);
        out.P_plus.push_back((plus.adjoint() * rho * plus)(0).real());
        out.rho.push_back(rho);
    }
    return out;
}

// ---- single-mode Fock evaluation of the multilevel populations -------------------

// P_n = <0| (iB)^{2n} / n! e^{B^2} |0> for B = f (b^dag - b), |f|^2 = S, using the
// spectral decomposition of the Hermitian iB in a truncated Fock space.
inline double fock_bruteforce_Pn(double S, int n, int fock_dim = 160) {
    if (S < 0.0) throw domain_error("fock_bruteforce_Pn: S must be >= 0");
    const double f = std::sqrt(S);
    RMat b = RMat::Zero(fock_dim, fock_dim);
    for (int m = 1; m < fock_dim; ++m) b(m - 1, m) = std::sqrt(double(m));
    // iB = i f (b^dag - b) is Hermitian; i(b^dag - b) is real antisymmetric times i,
    // so diagonalize the real symmetric matrix A = f (b + b^dag) which is unitarily
    // equivalent (b -> -i b) and shares the vacuum overlap weights.
    RMat A = f * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<RMat> es(A);
    double lfact = std::lgamma(n + 1.0);
    double sum = 0.0;
    for (int j = 0; j < fock_dim; ++j) {
        double lam = es.eigenvalues()[j];
        double w = es.eigenvectors()(0, j) * es.eigenvectors()(0, j);
        if (w == 0.0) continue;
        double l2 = lam * lam;
        double term = l2 == 0.0 ? (n == 0 ? 1.0 : 0.0) : std::exp(n * std::log(l2) - l2 - lfact);
        sum += w * term;
    }
    return sum;
}

} // namespace qreset
