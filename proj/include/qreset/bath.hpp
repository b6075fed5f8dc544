#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Eigenvalues>

#include "qreset/common.hpp"

namespace qreset {

enum class BathKind { ohmic, gaussian };

// J(w) = 2 alpha w exp(-w/wc)            (ohmic)
// J(w) = 2 alpha w exp(-(w-wc)^2/2s^2)  (gaussian filter centred on wc)
struct SpectralDensity {
    BathKind kind = BathKind::ohmic;
    double alpha = 0.0;
    double omega_c = two_pi * 5.0;  // rad/ns
    double sigma = 0.0;             // rad/ns, gaussian only
    double temperature = 0.0;       // rad/ns (k_B T / hbar), 0 allowed

    static SpectralDensity ohmic(double alpha, double omega_c, double temperature = 0.0) {
        return {BathKind::ohmic, alpha, omega_c, 0.0, temperature};
    }
    static SpectralDensity gaussian(double alpha, double omega_c, double sigma, double temperature = 0.0) {
        return {BathKind::gaussian, alpha, omega_c, sigma, temperature};
    }

    void validate() const {
        if (!(alpha >= 0.0)) throw domain_error("spectral density: alpha must be >= 0");
        if (!(omega_c > 0.0)) throw domain_error("spectral density: omega_c must be > 0");
        if (kind == BathKind::gaussian && !(sigma > 0.0))
            throw domain_error("spectral density: sigma must be > 0 for the gaussian kind");
        if (!(temperature >= 0.0)) throw domain_error("spectral density: temperature must be >= 0");
    }

    std::uint64_t hash() const {
        std::uint64_t h = fnv1a_value(static_cast<int>(kind));
        h = fnv1a_value(alpha, h);
        h = fnv1a_value(omega_c, h);
        h = fnv1a_value(kind == BathKind::gaussian ? sigma : 0.0, h);
        return fnv1a_value(temperature, h);
    }
};

inline const char* kind_name(BathKind k) { return k == BathKind::ohmic ? "ohmic" : "gaussian"; }

inline double eval_spectral_density(const SpectralDensity& sd, double w) {
    if (w < 0.0 || std::isnan(w)) throw domain_error("spectral density evaluated at negative frequency");
    if (w == 0.0) return 0.0;
    if (sd.kind == BathKind::ohmic) return 2.0 * sd.alpha * w * std::exp(-w / sd.omega_c);
    double u = (w - sd.omega_c) / sd.sigma;
    return 2.0 * sd.alpha * w * std::exp(-0.5 * u * u);
}

// Temperatures this small are treated as zero (Gamma arguments T/wc -> 0).
inline constexpr double zero_temperature = 1e-6;

namespace detail {

// log Gamma(z) for Re z > 0 by upward recurrence and the Stirling series.
inline cplx lgamma_complex(cplx z) {
    static constexpr double B[] = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66,
                                   -691.0 / 2730, 7.0 / 6, -3617.0 / 510};
    cplx shift = 0.0;
    while (std::abs(z) < 17.0 || z.real() < 8.0) {
        shift += std::log(z);
        z += 1.0;
    }
    cplx z2 = 1.0 / (z * z), zp = 1.0 / z, sum = 0.0;
    for (int k = 1; k <= 8; ++k) {
        sum += B[k - 1] / (2.0 * k * (2.0 * k - 1.0)) * zp;
        zp *= z2;
    }
    return (z - 0.5) * std::log(z) - z + 0.5 * std::log(two_pi) + sum - shift;
}

// 1 - cos(x) and x - sin(x) without cancellation at small x
inline double one_minus_cos(double x) {
    double s = std::sin(0.5 * x);
    return 2.0 * s * s;
}
inline double x_minus_sin(double x) {
    if (std::abs(x) > 0.1) return x - std::sin(x);
    double x2 = x * x, term = x * x2 / 6.0, sum = 0.0;
    for (int n = 1; n < 10; ++n) {
        sum += term;
        term *= -x2 / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
    }
    return sum;
}

// coth(w/2T)/w^2 * J(w) handled together so that w -> 0 stays finite
inline double thermal_weight(double w, double T) {
    if (T <= zero_temperature) return 1.0;
    double x = w / (2.0 * T);
    if (x > 40.0) return 1.0;
    return 1.0 / std::tanh(x);
}

} // namespace detail

// eta(t) = int J(w)/w^2 [coth(w/2T)(cos wt - 1) - i (sin wt - wt)] dw
// Closed forms exist for the Ohmic kind; Re eta <= 0, Im eta >= 0.
inline cplx eta_analytic(const SpectralDensity& sd, double t) {
    if (sd.kind != BathKind::ohmic)
        throw unsupported_error("eta_analytic: no closed form for the gaussian kind, use eta_quadrature");
    if (t < 0.0) throw domain_error("eta_analytic: t must be >= 0");
    if (t == 0.0 || sd.alpha == 0.0) return 0.0;
    const double a = sd.alpha, wc = sd.omega_c, x = wc * t;
    double im = 2.0 * a * (x - std::atan(x));
    if (x < 1e-3) im = 2.0 * a * x * x * x * (1.0 / 3.0 - x * x / 5.0);
    if (sd.temperature <= zero_temperature) return {-a * std::log1p(x * x), im};
    const double T = sd.temperature, b = T * t;
    double re = 0.0;
    for (double s : {T / wc, T / wc + 1.0})
        re += detail::lgamma_complex(cplx(s, b)).real() - std::lgamma(s);
    return {2.0 * a * re, im};
}

struct QuadratureResult {
    cplx value;
    double error;
};

// Gauss-Kronrod (31 points) on panels no wider than one oscillation period; the
// Kronrod-Gauss difference summed over panels is the error estimate.
inline QuadratureResult eta_quadrature_detail(const SpectralDensity& sd, double t, double tol = 1e-10) {
    if (t < 0.0) throw domain_error("eta_quadrature: t must be >= 0");
    if (t == 0.0 || sd.alpha == 0.0) return {0.0, 0.0};
    double lo = 0.0, hi, scale;
    if (sd.kind == BathKind::ohmic) {
        hi = 60.0 * sd.omega_c;
        scale = 0.25 * sd.omega_c;
    } else {
        lo = std::max(0.0, sd.omega_c - 12.0 * sd.sigma);
        hi = sd.omega_c + 12.0 * sd.sigma;
        scale = 0.5 * sd.sigma;
    }
    const double T = sd.temperature;
    auto re_f = [&](double w) {
        if (w <= 0.0) return 0.0;
        double j = eval_spectral_density(sd, w);
        return -j / (w * w) * detail::thermal_weight(w, T) * detail::one_minus_cos(w * t);
    };
    auto im_f = [&](double w) {
        if (w <= 0.0) return 0.0;
        return eval_spectral_density(sd, w) / (w * w) * detail::x_minus_sin(w * t);
    };
    double width = std::min(scale, two_pi / t);
    long panels = std::max(1L, static_cast<long>(std::ceil((hi - lo) / width)));
    width = (hi - lo) / panels;
    double re = 0.0, im = 0.0, err = 0.0;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    for (long p = 0; p < panels; ++p) {
        double a = lo + p * width, b = a + width, e1 = 0.0, e2 = 0.0, l1 = 0.0, l2 = 0.0;
        re += GK::integrate(re_f, a, b, 0, 0.0, &e1, &l1);
        im += GK::integrate(im_f, a, b, 0, 0.0, &e2, &l2);
        err += e1 * l1 + e2 * l2;  // boost reports relative error
    }
    if (err > tol) throw numerical_error("eta_quadrature: error estimate above tolerance", err);
    return {{re, im}, err};
}

inline cplx eta_quadrature(const SpectralDensity& sd, double t) { return eta_quadrature_detail(sd, t).value; }

inline cplx eta(const SpectralDensity& sd, double t) {
    return sd.kind == BathKind::ohmic ? eta_analytic(sd, t) : eta_quadrature(sd, t);
}

// Blocks eta_0..eta_{n-1}: eta_0 = eta(dt), eta_k = eta((k+1)dt) - 2 eta(k dt) + eta((k-1)dt).
template <class EtaFn>
inline std::vector<cplx> eta_blocks_from(EtaFn&& f, double dt, long n) {
    if (!(dt > 0.0)) throw domain_error("eta_blocks: dt must be > 0");
    if (n < 1) throw domain_error("eta_blocks: need at least one block");
    std::vector<cplx> e(n + 1);
    for (long k = 0; k <= n; ++k) e[k] = f(k * dt);
    std::vector<cplx> b(n);
    b[0] = e[1];
    for (long k = 1; k < n; ++k) b[k] = e[k + 1] - 2.0 * e[k] + e[k - 1];
    return b;
}

inline std::vector<cplx> eta_blocks(const SpectralDensity& sd, double dt, long n) {
    return eta_blocks_from([&](double t) { return eta(sd, t); }, dt, n);
}

struct Mode {
    double omega;
    double g;
};

struct DiscretizedBath {
    std::vector<Mode> modes;
    std::string scheme;
    double omega_max = 0.0;
    bool coverage_warning = false;  // omega_max leaves more than 0.1% of int J uncovered

    std::size_t size() const { return modes.size(); }
    double weight() const {
        double s = 0.0;
        for (auto& m : modes) s += m.g * m.g;
        return s;
    }
};

// eta(t) of a finite set of modes (same definition, J a sum of deltas)
inline cplx eta_modes(const std::vector<Mode>& modes, double t, double T = 0.0) {
    cplx s = 0.0;
    for (auto& m : modes) {
        double w = m.omega, c = m.g * m.g / (w * w);
        s += c * cplx(-detail::thermal_weight(w, T) * detail::one_minus_cos(w * t), detail::x_minus_sin(w * t));
    }
    return s;
}

// int_a^b J(w) dw
inline double spectral_weight(const SpectralDensity& sd, double a, double b) {
    if (sd.kind == BathKind::ohmic) {
        auto F = [&](double w) {
            double wc = sd.omega_c;
            return -2.0 * sd.alpha * wc * std::exp(-w / wc) * (w + wc);
        };
        return F(b) - F(a);
    }
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto f = [&](double w) { return eval_spectral_density(sd, w); };
    return GK::integrate(f, a, b, 15, 1e-12);
}

inline double spectral_weight_total(const SpectralDensity& sd) {
    if (sd.kind == BathKind::ohmic) return 2.0 * sd.alpha * sd.omega_c * sd.omega_c;
    double lo = std::max(0.0, sd.omega_c - 14.0 * sd.sigma), hi = sd.omega_c + 14.0 * sd.sigma;
    return spectral_weight(sd, lo, hi);
}

enum class GridScheme { linear, gauss_legendre };

inline double default_omega_max(const SpectralDensity& sd) {
    return sd.kind == BathKind::ohmic ? 10.0 * sd.omega_c : sd.omega_c + 6.0 * sd.sigma;
}

// Gauss-Legendre nodes/weights on [-1,1] (Golub-Welsch)
inline void gauss_legendre(int n, RVec& x, RVec& w) {
    RMat J = RMat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(J);
    x = es.eigenvalues();
    w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
}

// g_k^2 = J(w_k) dw_k on [0, omega_max]
inline DiscretizedBath discretize(const SpectralDensity& sd, int n_modes, double omega_max,
                                  GridScheme scheme = GridScheme::linear) {
    if (n_modes < 1) throw domain_error("discretize: n_modes must be >= 1");
    if (!(omega_max > 0.0)) throw domain_error("discretize: omega_max must be > 0");
    DiscretizedBath db;
    db.omega_max = omega_max;
    if (scheme == GridScheme::linear) {
        db.scheme = "linear";
        double dw = omega_max / n_modes;
        for (int k = 0; k < n_modes; ++k) {
            double w = (k + 0.5) * dw;
            db.modes.push_back({w, std::sqrt(eval_spectral_density(sd, w) * dw)});
        }
    } else {
        db.scheme = "gauss_legendre";
        RVec x, w;
        gauss_legendre(n_modes, x, w);
        for (int k = 0; k < n_modes; ++k) {
            double om = 0.5 * omega_max * (x[k] + 1.0), dw = 0.5 * omega_max * w[k];
            db.modes.push_back({om, std::sqrt(eval_spectral_density(sd, om) * dw)});
        }
    }
    double total = spectral_weight_total(sd);
    db.coverage_warning = total > 0.0 && spectral_weight(sd, 0.0, omega_max) < (1.0 - 1e-3) * total;
    return db;
}

inline DiscretizedBath discretize(const SpectralDensity& sd, int n_modes = 500) {
    return discretize(sd, n_modes, default_omega_max(sd));
}

} // namespace qreset
