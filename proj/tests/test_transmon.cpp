#include <gtest/gtest.h>

#include "qreset/oracles.hpp"
#include "qreset/polaron.hpp"
#include "qreset/transmon.hpp"

using namespace qreset;

namespace {

const TransmonSpec spec{5, ghz_to_rad(5.0), ghz_to_rad(-0.3)};

} // namespace

TEST(Multilevel, FixedPointWithoutAnharmonicityIsQubitResult) {
    TransmonSpec lin{5, ghz_to_rad(5.0), 0.0};
    auto db = discretize(SpectralDensity::ohmic(0.03, ghz_to_rad(5.0)), 300);
    auto mp = solve_multilevel_displacements(lin, db);
    auto eq = equilibrium_displacements(db, lin.omega_q);
    EXPECT_LT((mp.f - eq.f).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Multilevel, FixedPointIsSelfConsistentAndStationary) {
    auto db = discretize(SpectralDensity::ohmic(0.03, ghz_to_rad(5.0)), 300);
    auto mp = solve_multilevel_displacements(spec, db);
    for (std::size_t k = 0; k < db.size(); ++k) {
        double den = spec.omega_q + 3 * spec.alpha_A * mp.S + db.modes[k].omega;
        EXPECT_NEAR(mp.f[k].real(), -db.modes[k].g / (2 * den), 1e-14);
    }
    // energy is stationary under variations of each f_k
    for (std::size_t k : {0ul, 50ul, 299ul}) {
        double h = 1e-3 * std::abs(mp.f[k]);
        Vec fp = mp.f, fm = mp.f;
        fp[k] += h;
        fm[k] -= h;
        double dE = (multilevel_energy(spec, db.modes, fp) - multilevel_energy(spec, db.modes, fm)) / (2 * h);
        EXPECT_LT(std::abs(dE), 1e-6 * std::abs(db.modes[k].g)) << k;
    }
}

TEST(Multilevel, StrongCouplingFailsLoudly) {
    std::vector<Mode> modes = {{ghz_to_rad(1.0), 200.0}};
    TransmonSpec s{5, ghz_to_rad(5.0), ghz_to_rad(-0.3)};
    EXPECT_THROW(solve_multilevel_displacements(s, modes), numerical_error);
}

TEST(Series, AgreesWithFockEvaluation) {
    for (double S : {1e-4, 0.003, 0.05, 0.2})
        for (int n = 0; n <= 4; ++n) {
            double a = population_series(S, n), b = fock_bruteforce_Pn(S, n);
            EXPECT_LT(std::abs(a - b), 1e-10 * std::max(1.0, b)) << S << " " << n;
        }
}

TEST(Series, LeadingOrderAndDomain) {
    EXPECT_NEAR(population_series(1e-3, 1), 1e-3 - 3e-6, 1e-8);
    EXPECT_NEAR(population_series(1e-3, 2), 1.5e-6, 1e-8);
    EXPECT_EQ(population_series(0.0, 0), 1.0);
    EXPECT_EQ(population_series(0.0, 3), 0.0);
    EXPECT_THROW(population_series(0.5, 1), numerical_error);
    EXPECT_THROW(population_series(-0.1, 1), domain_error);
    EXPECT_THROW(population_series(0.1, -1), domain_error);
}

TEST(Reset, PopulationsSumToOne) {
    auto m = transmon_model(spec);
    const double dt = 0.01;
    const long N = 100;
    auto inf = build_influence(SpectralDensity::ohmic(0.03, ghz_to_rad(5.0)), dt, N, m.coupling_eigenvalues,
                               {N - 1, 1e-6});
    auto pt = build_process_tensor(inf);
    auto tr = run_multilevel_reset(pt, spec, ControlProtocol::constant(spec.omega_q, dt, N));
    EXPECT_LT(tr.max_population_sum_error, 1e-9);
    EXPECT_EQ(tr.populations.cols(), 5);
    EXPECT_LT(tr.populations(N - 1, 1), 0.5);
    Mat rho0 = transmon_initial_state(5);
    EXPECT_NEAR(rho0.trace().real(), 1.0, 1e-15);
}
