#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "qreset/common.hpp"
#include "qreset/influence.hpp"

namespace qreset {

struct ControlProtocol {
    std::vector<double> omega_q;  // rad/ns, one per step
    double dt = 0.0;
    double omega_min = ghz_to_rad(4.0);
    double omega_max = ghz_to_rad(7.0);

    long n_steps() const { return static_cast<long>(omega_q.size()); }
    double t_f() const { return dt * n_steps(); }

    static ControlProtocol constant(double omega, double dt, long n, double lo = ghz_to_rad(4.0),
                                    double hi = ghz_to_rad(7.0)) {
        ControlProtocol p;
        p.omega_q.assign(n, omega);
        p.dt = dt;
        p.omega_min = lo;
        p.omega_max = hi;
        return p;
    }

    void validate() const {
        if (!(dt > 0.0)) throw domain_error("protocol: dt must be > 0");
        if (!(omega_min <= omega_max)) throw domain_error("protocol: omega_min > omega_max");
        for (std::size_t n = 0; n < omega_q.size(); ++n)
            if (!(omega_q[n] >= omega_min && omega_q[n] <= omega_max))
                throw domain_error("protocol: omega_q[" + std::to_string(n) + "] outside bounds");
    }

    std::uint64_t hash() const {
        std::uint64_t h = fnv1a_value(dt);
        return omega_q.empty() ? h : fnv1a(omega_q.data(), omega_q.size() * sizeof(double), h);
    }
};

struct SystemState {
    Mat rho;

    int dim() const { return static_cast<int>(rho.rows()); }

    static SystemState maximally_mixed(int d) { return {Mat::Identity(d, d) / double(d)}; }

    // throws domain_error naming the first violated invariant
    void check(double herm_tol = 1e-12, double trace_tol = 1e-12, double psd_tol = 1e-9) const {
        if (rho.rows() != rho.cols()) throw dimension_error("state: rho not square");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > herm_tol) throw domain_error("state: not Hermitian");
        if (std::abs(rho.trace() - 1.0) > trace_tol) throw domain_error("state: trace differs from 1");
        Eigen::SelfAdjointEigenSolver<Mat> es(rho);
        if (es.eigenvalues().minCoeff() < -psd_tol) throw domain_error("state: not positive semidefinite");
    }
};

struct TransmonSpec {
    int d = 5;
    double omega_q = ghz_to_rad(5.0);
    double alpha_A = ghz_to_rad(-0.3);
};

// System with H(w) = w N + H0, [N, H0] = 0. Everything is held in the eigenbasis
// of the coupling operator ("working" basis), where the influence functional is
// diagonal. `levels` holds the common eigenvectors of N and H0 as columns
// (working-basis components), ordered so that column 0 is the reset target
// and column 1 the first excited level. `to_working` maps the natural basis
// (sigma_z basis for the qubit, number basis for the transmon) into it.
struct SystemModel {
    int d = 0;
    std::vector<double> coupling_eigenvalues;
    Mat to_working;  // columns: coupling eigenvectors in the natural basis
    Mat levels;
    RVec n_diag, h0_diag;
    std::string name;

    Mat U(double w, double tau) const {
        Vec ph(d);
        for (int k = 0; k < d; ++k) ph[k] = std::exp(-I * (w * n_diag[k] + h0_diag[k]) * tau);
        return levels * ph.asDiagonal() * levels.adjoint();
    }
    Mat dU(double w, double tau) const {
        Vec ph(d);
        for (int k = 0; k < d; ++k) ph[k] = -I * tau * n_diag[k] * std::exp(-I * (w * n_diag[k] + h0_diag[k]) * tau);
        return levels * ph.asDiagonal() * levels.adjoint();
    }
    // superoperator of half a step (row-major vectorisation)
    Mat half_step(double w, double dt) const {
        Mat u = U(w, 0.5 * dt);
        return Eigen::kroneckerProduct(u, u.conjugate()).eval();
    }
    Mat d_half_step(double w, double dt) const {
        Mat u = U(w, 0.5 * dt), du = dU(w, 0.5 * dt);
        return (Eigen::kroneckerProduct(du, u.conjugate()) + Eigen::kroneckerProduct(u, du.conjugate())).eval();
    }

    Mat natural_to_working(const Mat& rho) const { return to_working.adjoint() * rho * to_working; }
    Mat working_to_natural(const Mat& rho) const { return to_working * rho * to_working.adjoint(); }
    // level populations <k|rho|k> of a working-basis state
    RVec populations(const Mat& rho_w) const { return (levels.adjoint() * rho_w * levels).diagonal().real(); }
    Mat level_projector(int k) const { return levels.col(k) * levels.col(k).adjoint(); }
};

// H = (w/2) sigma_x, coupling sigma_z/2; working basis = natural basis = (up, down).
// Levels: |-> (target) then |+>.
inline SystemModel qubit_model() {
    SystemModel m;
    m.d = 2;
    m.name = "qubit";
    m.coupling_eigenvalues = {0.5, -0.5};
    m.to_working = Mat::Identity(2, 2);
    const double s = 1.0 / std::sqrt(2.0);
    m.levels.resize(2, 2);
    m.levels << s, s, -s, s;
    m.n_diag = RVec(2);
    m.n_diag << -0.5, 0.5;
    m.h0_diag = RVec::Zero(2);
    return m;
}

// H = w n + (alpha_A/2) n(n-1), coupling (a + a^dagger)/2, truncated to d levels.
inline SystemModel transmon_model(const TransmonSpec& spec) {
    if (spec.d < 2) throw dimension_error("transmon: d must be >= 2");
    const int d = spec.d;
    SystemModel m;
    m.d = d;
    m.name = "transmon";
    RMat X = RMat::Zero(d, d);
    for (int n = 0; n + 1 < d; ++n) X(n, n + 1) = X(n + 1, n) = 0.5 * std::sqrt(n + 1.0);
    Eigen::SelfAdjointEigenSolver<RMat> es(X);
    m.coupling_eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + d);
    m.to_working = es.eigenvectors().cast<cplx>();
    m.levels = m.to_working.adjoint();  // number state n in working components
    m.n_diag.resize(d);
    m.h0_diag.resize(d);
    for (int n = 0; n < d; ++n) {
        m.n_diag[n] = n;
        m.h0_diag[n] = 0.5 * spec.alpha_A * n * (n - 1.0);
    }
    return m;
}

inline Mat qubit_propagator(double omega_q, double dt) {
    if (!(dt > 0.0)) throw domain_error("qubit_propagator: dt must be > 0");
    return qubit_model().half_step(omega_q, dt);
}

inline Mat transmon_propagator(const TransmonSpec& spec, double omega_q, double dt) {
    if (!(dt > 0.0)) throw domain_error("transmon_propagator: dt must be > 0");
    return transmon_model(spec).half_step(omega_q, dt);
}

inline void check_compatible(const ProcessTensor& pt, const SystemModel& m) {
    if (pt.dim() != m.d)
        throw dimension_error("process tensor dimension " + std::to_string(pt.dim()) + " does not match " + m.name +
                              " dimension " + std::to_string(m.d));
    for (int k = 0; k < m.d; ++k)
        if (std::abs(pt.classes.lam[k] - m.coupling_eigenvalues[k]) > 1e-12)
            throw dimension_error("process tensor coupling eigenvalues do not match the " + m.name + " model");
}

inline std::vector<Mat> half_steps(const SystemModel& m, const ControlProtocol& p) {
    std::vector<Mat> out;
    out.reserve(p.omega_q.size());
    for (double w : p.omega_q) out.push_back(m.half_step(w, p.dt));
    return out;
}

struct Trajectory {
    std::vector<double> t;          // ns, t_1..t_N
    std::vector<Mat> rho;           // natural basis
    RMat populations;               // N x d, level populations
    std::vector<double> P_plus;     // excited population 1 - P_0
    double max_trace_deviation = 0;
};

inline Trajectory run_protocol(const ProcessTensor& pt, const SystemModel& m, const ControlProtocol& p,
                               const Mat& rho0_natural) {
    check_compatible(pt, m);
    if (p.n_steps() != pt.n_steps)
        throw dimension_error("protocol has " + std::to_string(p.n_steps()) + " steps, process tensor " +
                              std::to_string(pt.n_steps));
    if (std::abs(p.dt - pt.dt) > 1e-12 * pt.dt) throw dimension_error("protocol dt differs from process tensor dt");
    auto c = contract(pt, half_steps(m, p), m.natural_to_working(rho0_natural));
    Trajectory tr;
    tr.max_trace_deviation = c.max_trace_deviation;
    tr.populations.resize(p.n_steps(), m.d);
    for (long n = 0; n < p.n_steps(); ++n) {
        tr.t.push_back((n + 1) * p.dt);
        RVec pop = m.populations(c.rho[n]);
        tr.populations.row(n) = pop.transpose();
        tr.P_plus.push_back(1.0 - pop[0]);
        tr.rho.push_back(m.working_to_natural(c.rho[n]));
    }
    return tr;
}

inline Trajectory run_protocol(const ProcessTensor& pt, const SystemModel& m, const ControlProtocol& p) {
    return run_protocol(pt, m, p, SystemState::maximally_mixed(m.d).rho);
}

} // namespace qreset
