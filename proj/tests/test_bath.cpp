#include <gtest/gtest.h>

#include "qreset/bath.hpp"

using namespace qreset;

namespace {
const double wc = ghz_to_rad(5.0);
}

TEST(SpectralDensity, ValuesAtSimplePoints) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    EXPECT_EQ(eval_spectral_density(oh, 0.0), 0.0);
    EXPECT_NEAR(eval_spectral_density(oh, wc), 2 * 0.03 * wc * std::exp(-1.0), 1e-14);
    auto ga = SpectralDensity::gaussian(0.013, wc, ghz_to_rad(1.0));
    EXPECT_NEAR(eval_spectral_density(ga, wc), 2 * 0.013 * wc, 1e-14);
    EXPECT_EQ(eval_spectral_density(ga, 0.0), 0.0);
}

TEST(SpectralDensity, RejectsBadParameters) {
    EXPECT_THROW(SpectralDensity::ohmic(-0.1, wc).validate(), domain_error);
    EXPECT_THROW(SpectralDensity::ohmic(0.1, 0.0).validate(), domain_error);
    EXPECT_THROW(SpectralDensity::gaussian(0.1, wc, 0.0).validate(), domain_error);
    EXPECT_THROW(eval_spectral_density(SpectralDensity::ohmic(0.1, wc), -1.0), domain_error);
}

TEST(SpectralDensity, HashDistinguishesParameters) {
    EXPECT_NE(SpectralDensity::ohmic(0.03, wc).hash(), SpectralDensity::ohmic(0.031, wc).hash());
    EXPECT_EQ(SpectralDensity::ohmic(0.03, wc).hash(), SpectralDensity::ohmic(0.03, wc).hash());
}

TEST(Kernel, TrivialLimits) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    EXPECT_EQ(eta_analytic(oh, 0.0), cplx(0.0));
    EXPECT_EQ(eta_quadrature(oh, 0.0), cplx(0.0));
    EXPECT_EQ(eta_analytic(SpectralDensity::ohmic(0.0, wc), 1.3), cplx(0.0));
}

TEST(Kernel, ClosedFormAgainstQuadrature) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    cplx a = eta_analytic(oh, 0.1), q = eta_quadrature(oh, 0.1);
    EXPECT_LT(std::abs(a - q), 1e-8);
    EXPECT_NEAR(a.real(), -0.0716, 1e-4);
    EXPECT_NEAR(a.imag(), 0.1127, 1e-4);
}

TEST(Kernel, FiniteTemperatureClosedFormAgainstQuadrature) {
    for (double T_ghz : {0.2, 1.0, 4.0}) {
        auto oh = SpectralDensity::ohmic(0.03, wc, ghz_to_rad(T_ghz));
        double worst = 0.0;
        for (double t : {0.01, 0.1, 0.7, 3.0, 12.0}) worst = std::max(worst, std::abs(eta_analytic(oh, t) - eta_quadrature(oh, t)));
        EXPECT_LT(worst, 1e-8) << "T=" << T_ghz;
    }
}

TEST(Kernel, SignConvention) {
    auto ga = SpectralDensity::gaussian(0.013, wc, ghz_to_rad(1.0));
    cplx e = eta_quadrature(ga, 0.1);
    EXPECT_TRUE(std::isfinite(e.real()) && std::isfinite(e.imag()));
    EXPECT_LT(e.real(), 0.0);
    EXPECT_GT(e.imag(), 0.0);
    EXPECT_THROW(eta_analytic(ga, 0.1), unsupported_error);
}

TEST(Kernel, FewModeKernelMatchesDefinition) {
    std::vector<Mode> modes = {{2.0, 0.3}, {5.0, 0.1}};
    double t = 0.8;
    cplx ref = 0.0;
    for (auto& m : modes)
        ref += m.g * m.g / (m.omega * m.omega) * cplx(std::cos(m.omega * t) - 1.0, -(std::sin(m.omega * t) - m.omega * t));
    EXPECT_LT(std::abs(eta_modes(modes, t) - ref), 1e-14);
}

TEST(Blocks, DefinitionAndZeroCoupling) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    const double dt = 0.005;
    auto b = eta_blocks(oh, dt, 5);
    ASSERT_EQ(b.size(), 5u);
    EXPECT_LT(std::abs(b[1] - (eta(oh, 2 * dt) - 2.0 * eta(oh, dt))), 1e-15);
    EXPECT_LT(std::abs(b[2] - (eta(oh, 3 * dt) - 2.0 * eta(oh, 2 * dt) + eta(oh, dt))), 1e-15);
    for (auto v : eta_blocks(SpectralDensity::ohmic(0.0, wc), dt, 20)) EXPECT_EQ(v, cplx(0.0));
}

TEST(Blocks, OhmicTailDecays) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    auto b = eta_blocks(oh, 0.005, 2000);
    std::size_t peak = 1;
    for (std::size_t k = 1; k < b.size(); ++k)
        if (std::abs(b[k]) > std::abs(b[peak])) peak = k;
    for (std::size_t k = std::max<std::size_t>(peak, 40) + 1; k < b.size(); ++k)
        EXPECT_LE(std::abs(b[k]), std::abs(b[k - 1]) * (1.0 + 1e-9)) << k;
}

TEST(Discretize, SingleMode) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    double wmax = 10 * wc;
    auto db = discretize(oh, 1, wmax);
    ASSERT_EQ(db.size(), 1u);
    EXPECT_DOUBLE_EQ(db.modes[0].omega, wmax / 2);
    EXPECT_NEAR(db.modes[0].g * db.modes[0].g, eval_spectral_density(oh, wmax / 2) * wmax, 1e-12);
}

TEST(Discretize, WeightMatchesIntegral) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    auto db = discretize(oh, 500);
    double wmax = db.omega_max;
    double exact = spectral_weight(oh, 0.0, wmax);
    EXPECT_LT(std::abs(db.weight() - exact) / exact, 1e-3);
    for (std::size_t k = 1; k < db.size(); ++k) EXPECT_GT(db.modes[k].omega, db.modes[k - 1].omega);
    EXPECT_GT(db.modes[0].omega, 0.0);
    EXPECT_FALSE(db.coverage_warning);
    auto gl = discretize(oh, 200, wmax, GridScheme::gauss_legendre);
    EXPECT_LT(std::abs(gl.weight() - exact) / exact, 1e-10);
}

TEST(Discretize, GaussianTailsCarryLittleWeight) {
    const double sigma = ghz_to_rad(1.0);
    auto ga = SpectralDensity::gaussian(0.013, wc, sigma);
    auto db = discretize(ga, 500);
    double out = 0.0;
    for (auto& m : db.modes)
        if (std::abs(m.omega - wc) > 5 * sigma) out += m.g * m.g;
    EXPECT_LT(out / db.weight(), 1e-4);
}

TEST(Discretize, FewModeKernelApproachesContinuum) {
    auto oh = SpectralDensity::ohmic(0.03, wc);
    // the residual ~6e-6 is the weight above 12 omega_c, not the mode count
    auto db = discretize(oh, 500, 12 * wc, GridScheme::gauss_legendre);
    for (double t : {0.05, 0.2, 0.5}) EXPECT_LT(std::abs(eta_modes(db.modes, t) - eta_analytic(oh, t)), 1e-5) << t;
}
