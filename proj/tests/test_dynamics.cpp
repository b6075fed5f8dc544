#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "qreset/dynamics.hpp"

using namespace qreset;

namespace {

Mat sx() {
    Mat m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

} // namespace

TEST(Models, QubitHalfStepIsUnitaryConjugation) {
    auto m = qubit_model();
    double w = ghz_to_rad(5.3), dt = 0.01;
    Mat u = (-I * 0.5 * w * sx() * (0.5 * dt)).exp();
    EXPECT_LT((m.U(w, 0.5 * dt) - u).cwiseAbs().maxCoeff(), 1e-13);
    Mat S = qubit_propagator(w, dt);
    Mat rho(2, 2);
    rho << 0.7, cplx(0.1, 0.2), cplx(0.1, -0.2), 0.3;
    Vec v = vec_rowmajor(rho);
    Mat out = unvec_rowmajor(Vec(S * v), 2);
    EXPECT_LT((out - u * rho * u.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Models, QubitLevelsAreSigmaXEigenstates) {
    auto m = qubit_model();
    Mat minus = m.level_projector(0);
    EXPECT_NEAR((sx() * minus).trace().real(), -1.0, 1e-14);
    EXPECT_NEAR((sx() * m.level_projector(1)).trace().real(), 1.0, 1e-14);
}

TEST(Models, DerivativeOfHalfStep) {
    for (auto m : {qubit_model(), transmon_model({4, ghz_to_rad(5.0), ghz_to_rad(-0.3)})}) {
        double w = ghz_to_rad(5.1), dt = 0.005, h = 1e-5 * w;
        Mat fd = (m.half_step(w + h, dt) - m.half_step(w - h, dt)) / (2 * h);
        EXPECT_LT((fd - m.d_half_step(w, dt)).cwiseAbs().maxCoeff(), 1e-8) << m.name;
    }
}

TEST(Models, TransmonMatchesDirectHamiltonian) {
    TransmonSpec spec{4, ghz_to_rad(5.0), ghz_to_rad(-0.3)};
    auto m = transmon_model(spec);
    Mat H = Mat::Zero(4, 4), X = Mat::Zero(4, 4);
    for (int n = 0; n < 4; ++n) H(n, n) = spec.omega_q * n + 0.5 * spec.alpha_A * n * (n - 1);
    for (int n = 0; n + 1 < 4; ++n) X(n, n + 1) = X(n + 1, n) = 0.5 * std::sqrt(n + 1.0);
    double tau = 0.013;
    Mat u_nat = (-I * H * tau).exp();
    Mat u_w = m.to_working.adjoint() * u_nat * m.to_working;
    EXPECT_LT((m.U(spec.omega_q, tau) - u_w).cwiseAbs().maxCoeff(), 1e-12);
    // working basis diagonalises the coupling
    Mat Xw = m.to_working.adjoint() * X * m.to_working;
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(Xw(k, k).real(), m.coupling_eigenvalues[k], 1e-12);
    EXPECT_THROW(transmon_model({1, 1.0, 0.0}), dimension_error);
}

TEST(State, InvariantsAreChecked) {
    EXPECT_NO_THROW(SystemState::maximally_mixed(3).check());
    Mat r = Mat::Identity(2, 2);
    EXPECT_THROW(SystemState{r}.check(), domain_error);
    Mat nh(2, 2);
    nh << 0.5, 0.1, 0.2, 0.5;
    EXPECT_THROW(SystemState{nh}.check(), domain_error);
    Mat neg(2, 2);
    neg << 1.2, 0, 0, -0.2;
    EXPECT_THROW(SystemState{neg}.check(), domain_error);
}

TEST(Protocol, Validation) {
    auto p = ControlProtocol::constant(ghz_to_rad(5.0), 0.005, 10);
    EXPECT_NO_THROW(p.validate());
    EXPECT_DOUBLE_EQ(p.t_f(), 0.05);
    p.omega_q[3] = ghz_to_rad(8.0);
    EXPECT_THROW(p.validate(), domain_error);
    EXPECT_THROW(qubit_propagator(1.0, 0.0), domain_error);
}

TEST(RunProtocol, ZeroCouplingIsUnitaryEvolution) {
    auto m = qubit_model();
    const double dt = 0.01;
    const long N = 50;
    auto inf = build_influence(SpectralDensity::ohmic(0.0, ghz_to_rad(5.0)), dt, N, m.coupling_eigenvalues);
    auto pt = build_process_tensor(inf);
    auto p = ControlProtocol::constant(ghz_to_rad(5.0), dt, N);
    for (long n = 0; n < N; ++n) p.omega_q[n] = ghz_to_rad(5.0 + std::sin(0.3 * n));
    Mat rho0(2, 2);
    rho0 << 1, 0, 0, 0;
    auto tr = run_protocol(pt, m, p, rho0);
    Mat rho = rho0;
    for (long n = 0; n < N; ++n) {
        Mat u = (-I * 0.5 * p.omega_q[n] * sx() * dt).exp();
        rho = u * rho * u.adjoint();
        EXPECT_LT((tr.rho[n] - rho).cwiseAbs().maxCoeff(), 1e-12) << n;
    }
    EXPECT_NEAR(tr.t.back(), N * dt, 1e-12);
    // |up> has equal weight on |+> and |->, and that is conserved by sigma_x evolution
    for (double v : tr.P_plus) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(RunProtocol, RejectsMismatchedInputs) {
    auto m = qubit_model();
    auto inf = build_influence(SpectralDensity::ohmic(0.01, ghz_to_rad(5.0)), 0.01, 10, m.coupling_eigenvalues);
    auto pt = build_process_tensor(inf);
    EXPECT_THROW(run_protocol(pt, m, ControlProtocol::constant(30.0, 0.01, 11)), dimension_error);
    EXPECT_THROW(run_protocol(pt, m, ControlProtocol::constant(30.0, 0.02, 10)), dimension_error);
    auto t3 = transmon_model({3, 30.0, -2.0});
    EXPECT_THROW(run_protocol(pt, t3, ControlProtocol::constant(30.0, 0.01, 10)), dimension_error);
}

TEST(RunProtocol, WeakCouplingRelaxesTowardsGround) {
    auto m = qubit_model();
    const double dt = 0.01;
    const long N = 200;
    auto inf = build_influence(SpectralDensity::ohmic(0.03, ghz_to_rad(5.0)), dt, N, m.coupling_eigenvalues);
    auto pt = build_process_tensor(inf);
    auto tr = run_protocol(pt, m, ControlProtocol::constant(ghz_to_rad(5.0), dt, N));
    EXPECT_LT(tr.P_plus.back(), 0.5);
    EXPECT_GT(tr.P_plus.back(), 0.0);
    for (auto& r : tr.rho) EXPECT_NO_THROW(SystemState{r}.check(1e-10, 1e-10, 1e-8));
}
