#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qreset {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// user-facing GHz (ordinary frequency) <-> internal rad/ns
inline constexpr double ghz_to_rad(double f) { return two_pi * f; }
inline constexpr double rad_to_ghz(double w) { return w / two_pi; }

struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct unsupported_error : std::logic_error {
    using std::logic_error::logic_error;
};

// Raised when an iterative or adaptive method cannot reach its tolerance.
struct numerical_error : std::runtime_error {
    double achieved = 0.0;
    numerical_error(const std::string& what, double achieved_ = 0.0)
        : std::runtime_error(what), achieved(achieved_) {}
};

struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bond dimension exceeded the allowed maximum while building a process tensor.
struct bond_error : std::runtime_error {
    long step = 0;
    long bond = 0;
    bond_error(const std::string& what, long step_, long bond_)
        : std::runtime_error(what), step(step_), bond(bond_) {}
};

// FNV-1a, used to key caches and metadata records.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

template <class T>
inline std::uint64_t fnv1a_value(const T& v, std::uint64_t h = 1469598103934665603ull) {
    return fnv1a(&v, sizeof(T), h);
}

inline std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 15];
    return s;
}

} // namespace qreset
