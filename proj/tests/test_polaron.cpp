#include <gtest/gtest.h>

#include "qreset/polaron.hpp"

using namespace qreset;

namespace {

const double wq0 = ghz_to_rad(5.0);

std::vector<Mode> few_modes() { return {{ghz_to_rad(3.0), 0.4}, {ghz_to_rad(6.0), 0.9}, {ghz_to_rad(11.0), 0.2}}; }

} // namespace

TEST(Polaron, EquilibriumDisplacements) {
    auto st = equilibrium_displacements(few_modes(), wq0);
    for (int k = 0; k < 3; ++k)
        EXPECT_DOUBLE_EQ(st.f[k].real(), -few_modes()[k].g / (2 * (wq0 + few_modes()[k].omega)));
    EXPECT_THROW(equilibrium_displacements(few_modes(), 0.0), domain_error);
}

TEST(Polaron, ResidualPopulation) {
    auto r = residual_population(0.01);
    EXPECT_NEAR(r.doubled, 1 - std::exp(-0.02), 1e-16);
    EXPECT_NEAR(r.half, 0.5 * r.doubled, 1e-18);
    EXPECT_EQ(r.small_S, 0.01);
    EXPECT_EQ(residual_population(0.0).half, 0.0);
}

TEST(Tdvp, EquilibriumIsStationaryForConstantProtocol) {
    auto st = equilibrium_displacements(few_modes(), wq0);
    std::vector<double> w(200, wq0);
    auto tr = integrate_tdvp(st, w, 0.005);
    EXPECT_LT((tr.final_state.f - st.f).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(tr.S.back(), st.S(), 1e-12);
    EXPECT_NEAR(tr.P_plus.back(), residual_population(st.S()).half, 1e-14);
}

TEST(Tdvp, LinearizedMatchesExactPiecewiseSolution) {
    auto st = equilibrium_displacements(few_modes(), wq0);
    std::vector<double> w;
    for (int n = 0; n < 400; ++n) w.push_back(wq0 + ghz_to_rad(0.8) * std::sin(0.05 * n));
    TdvpOptions o;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    auto tr = integrate_tdvp(st, w, 0.005, o);
    Vec ex = linearized_exact(st, w, 0.005);
    EXPECT_LT((tr.final_state.f - ex).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Tdvp, FullReducesToLinearizedWhenCouplingIsWeak) {
    std::vector<Mode> modes = {{ghz_to_rad(4.0), 1e-4}, {ghz_to_rad(9.0), 2e-4}};
    auto st = equilibrium_displacements(modes, wq0);
    std::vector<double> w(300, wq0 + ghz_to_rad(0.5));
    TdvpOptions full;
    full.mode = TdvpMode::full;
    auto a = integrate_tdvp(st, w, 0.005, full);
    auto b = integrate_tdvp(st, w, 0.005);
    EXPECT_LT((a.final_state.f - b.final_state.f).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Tdvp, RecordsRequestedModes) {
    auto st = equilibrium_displacements(few_modes(), wq0);
    TdvpOptions o;
    o.record_modes = {2, 0};
    auto tr = integrate_tdvp(st, std::vector<double>(10, wq0 + 1.0), 0.01, o);
    ASSERT_EQ(tr.f.size(), 10u);
    EXPECT_EQ(tr.f[9][0], tr.final_state.f[2]);
    EXPECT_EQ(tr.f[9][1], tr.final_state.f[0]);
    EXPECT_NEAR(tr.t.back(), 0.1, 1e-14);
}

TEST(Perturbative, MatchesDrivenLinearizedSolutionAwayFromResonance) {
    // slow ramp of the drive amplitude approximates the adiabatic particular solution
    std::vector<Mode> modes = {{ghz_to_rad(1.0), 0.3}, {ghz_to_rad(9.0), 0.3}};
    auto st = equilibrium_displacements(modes, wq0);
    const double Omega = ghz_to_rad(9.0), h = ghz_to_rad(0.02), dt = 0.001, T = 40.0;
    std::vector<double> w;
    const long N = std::lround(T / dt);
    for (long n = 0; n < N; ++n) {
        double t = (n + 0.5) * dt;
        double ramp = std::pow(std::sin(0.5 * std::numbers::pi * std::min(1.0, t / 30.0)), 2);
        w.push_back(wq0 + h * ramp * std::cos(Omega * t));
    }
    Vec f = linearized_exact(st, w, dt);
    Vec q = perturbative_solution(modes, wq0, h, Omega, N * dt);
    for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(f[k] - st.f[k] - q[k]), 0.05 * std::abs(q[k])) << k;
    // the i h f_k0 prefactor differs by a factor -i
    Vec qp = perturbative_solution_shifted(modes, wq0, h, Omega, N * dt);
    EXPECT_GT(std::abs(f[1] - st.f[1] - qp[1]), 0.5 * std::abs(q[1]));
    EXPECT_THROW(perturbative_solution({{Omega - wq0, 0.1}}, wq0, h, Omega, 0.0), domain_error);
}

TEST(Phases, ProfileAndCircularStatistics) {
    auto modes = few_modes();
    Vec f0 = equilibrium_displacements(modes, wq0).f;
    Vec f = f0;
    f[0] += std::polar(1e-3, 0.4);
    f[1] += std::polar(2e-3, 0.5);
    auto pts = phase_profile(modes, f, f0, wq0);
    EXPECT_FALSE(pts[2].valid);
    EXPECT_NEAR(pts[0].phase, 0.4, 1e-9);
    EXPECT_NEAR(pts[1].omega_prime, modes[1].omega + wq0, 1e-14);
    auto cs = circular_stats(pts);
    EXPECT_NEAR(cs.mean, std::arg(std::polar(1e-3, 0.4) + std::polar(2e-3, 0.5)), 1e-9);
    EXPECT_LT(cs.deviation, 0.06);
    auto none = circular_stats(pts, {2});
    EXPECT_TRUE(std::isinf(none.deviation));
    EXPECT_NEAR(wrap_angle(2.5 * std::numbers::pi), 0.5 * std::numbers::pi, 1e-12);
    EXPECT_THROW(phase_profile(modes, Vec(2), f0, wq0), dimension_error);
}

TEST(Phases, TopWeightModes) {
    std::vector<Mode> modes = {{1, 0.1}, {2, 1.0}, {3, 0.5}, {4, 0.05}};
    auto top = top_weight_modes(modes, 0.9);
    EXPECT_EQ(top, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(top_weight_modes(modes, 1.0).size(), 4u);
}
