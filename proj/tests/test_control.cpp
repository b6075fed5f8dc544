#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "qreset/control.hpp"

using namespace qreset;

namespace {

struct Setup {
    SystemModel m = qubit_model();
    ProcessTensor pt;
    ControlProtocol p;
    Mat r0, rT;
};

Setup make(double alpha, long N, double dt = 0.005, double cutoff = 1e-10, unsigned seed = 3) {
    Setup s;
    auto inf = build_influence(SpectralDensity::ohmic(alpha, ghz_to_rad(5.0)), dt, N, s.m.coupling_eigenvalues,
                               {N - 1, 1e-6});
    s.pt = build_process_tensor(inf, {cutoff, 256});
    s.p = ControlProtocol::constant(ghz_to_rad(5.0), dt, N);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(ghz_to_rad(4.0), ghz_to_rad(7.0));
    for (auto& w : s.p.omega_q) w = U(rng);
    s.r0 = s.m.natural_to_working(Mat::Identity(2, 2) / 2.0);
    s.rT = s.m.level_projector(0);
    return s;
}

} // namespace

TEST(Infidelity, Definition) {
    auto m = qubit_model();
    Mat P = m.level_projector(0);
    EXPECT_NEAR(infidelity(P, P), 0.0, 1e-15);
    EXPECT_NEAR(infidelity(Mat::Identity(2, 2) / 2.0, P), 0.5, 1e-15);
    // trace normalisation
    EXPECT_NEAR(infidelity(Mat::Identity(2, 2) * 0.6, P), 0.5, 1e-15);
    EXPECT_THROW(infidelity(Mat::Identity(3, 3), P), dimension_error);
}

TEST(Gradient, CostMatchesContraction) {
    auto s = make(0.03, 60);
    auto tr = run_protocol(s.pt, s.m, s.p);
    auto cg = infidelity_gradient(s.pt, s.m, s.p, s.r0, s.rT, {}, false);
    EXPECT_NEAR(cg.cost, tr.P_plus.back(), 1e-12);
}

TEST(Gradient, MatchesCentralDifferences) {
    auto s = make(0.03, 50);
    auto cg = infidelity_gradient(s.pt, s.m, s.p, s.r0, s.rT);
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * ghz_to_rad(5.0);
    double worst = 0.0, gmax = 0.0;
    for (long n = 0; n < s.p.n_steps(); ++n) {
        auto q = s.p;
        q.omega_q[n] += h;
        double fp = infidelity_gradient(s.pt, s.m, q, s.r0, s.rT, {}, false).cost;
        q.omega_q[n] -= 2 * h;
        double fm = infidelity_gradient(s.pt, s.m, q, s.r0, s.rT, {}, false).cost;
        double fd = (fp - fm) / (2 * h);
        worst = std::max(worst, std::abs(fd - cg.grad[n]));
        gmax = std::max(gmax, std::abs(fd));
    }
    EXPECT_GT(gmax, 0.0);
    EXPECT_LT(worst / gmax, 1e-5);
}

TEST(Gradient, TransmonMatchesCentralDifferences) {
    TransmonSpec spec{3, ghz_to_rad(5.0), ghz_to_rad(-0.3)};
    auto m = transmon_model(spec);
    const long N = 30;
    const double dt = 0.005;
    auto inf = build_influence(SpectralDensity::ohmic(0.03, ghz_to_rad(5.0)), dt, N, m.coupling_eigenvalues,
                               {N - 1, 1e-6});
    auto pt = build_process_tensor(inf, {1e-10, 256});
    auto p = ControlProtocol::constant(ghz_to_rad(5.0), dt, N);
    for (long n = 0; n < N; ++n) p.omega_q[n] = ghz_to_rad(5.0 + 1.5 * std::sin(0.4 * n));
    Mat r0 = m.natural_to_working(Mat::Identity(3, 3) / 3.0), rT = m.level_projector(0);
    auto cg = infidelity_gradient(pt, m, p, r0, rT);
    const double h = 1e-5 * ghz_to_rad(5.0);
    double worst = 0.0, gmax = 0.0;
    for (long n = 0; n < N; ++n) {
        auto q = p;
        q.omega_q[n] += h;
        double fp = infidelity_gradient(pt, m, q, r0, rT, {}, false).cost;
        q.omega_q[n] -= 2 * h;
        double fm = infidelity_gradient(pt, m, q, r0, rT, {}, false).cost;
        double fd = (fp - fm) / (2 * h);
        worst = std::max(worst, std::abs(fd - cg.grad[n]));
        gmax = std::max(gmax, std::abs(fd));
    }
    EXPECT_LT(worst / gmax, 1e-5);
}

TEST(Gradient, CheckpointingGivesTheSameGradient) {
    auto s = make(0.03, 80);
    auto a = infidelity_gradient(s.pt, s.m, s.p, s.r0, s.rT);
    GradientOptions o;
    o.checkpoint_every = 7;
    auto b = infidelity_gradient(s.pt, s.m, s.p, s.r0, s.rT, o);
    EXPECT_EQ(a.cost, b.cost);
    for (long n = 0; n < s.p.n_steps(); ++n) EXPECT_NEAR(a.grad[n], b.grad[n], 1e-14 * (1 + std::abs(a.grad[n])));
}

TEST(Gradient, MemoryLimitIsEnforced) {
    auto s = make(0.03, 40);
    GradientOptions o;
    o.memory_limit = 16;
    EXPECT_THROW(infidelity_gradient(s.pt, s.m, s.p, s.r0, s.rT, o), std::runtime_error);
    EXPECT_NO_THROW(infidelity_gradient(s.pt, s.m, s.p, s.r0, s.rT, o, false));
}

TEST(Optimize, ImprovesOnShortWindowAndRespectsBounds) {
    auto s = make(0.03, 100);
    auto init = ControlProtocol::constant(ghz_to_rad(5.0), s.p.dt, s.p.n_steps());
    OptimizeOptions o;
    o.lbfgsb.max_iter = 60;
    auto r = optimize(s.pt, s.m, init, Mat::Identity(2, 2) / 2.0, s.m.working_to_natural(s.rT), o);
    EXPECT_LT(r.infidelity, r.initial_infidelity);
    EXPECT_NO_THROW(r.protocol.validate());
    auto check = infidelity_gradient(s.pt, s.m, r.protocol, s.r0, s.rT, {}, false).cost;
    EXPECT_NEAR(check, r.infidelity, 1e-12);
    for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1] + 1e-15);
}

TEST(Optimize, RejectsProtocolOutsideBounds) {
    auto s = make(0.03, 10);
    auto bad = ControlProtocol::constant(ghz_to_rad(8.0), s.p.dt, 10);
    EXPECT_THROW(optimize(s.pt, s.m, bad, Mat::Identity(2, 2) / 2.0, s.m.working_to_natural(s.rT)), domain_error);
}

TEST(Spectrum, PureToneGivesSinglePeak) {
    const double dt = 0.005;
    const long N = 2200;
    auto p = ControlProtocol::constant(ghz_to_rad(5.0), dt, N);
    for (long n = 0; n < N; ++n) p.omega_q[n] += ghz_to_rad(0.5) * std::cos(ghz_to_rad(10.0) * n * dt);
    auto s = power_spectrum(p);
    auto pk = s.peaks();
    ASSERT_FALSE(pk.empty());
    EXPECT_NEAR(s.freq_ghz[pk[0]], 10.0, 1.0 / (N * dt));
    EXPECT_EQ(s.freq_ghz.size(), std::size_t(N / 2 + 1));
    // constant protocol has no power
    auto c = power_spectrum(ControlProtocol::constant(ghz_to_rad(5.0), dt, 64));
    for (double v : c.power) EXPECT_LT(v, 1e-20);
}
