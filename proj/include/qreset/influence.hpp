#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include "qreset/bath.hpp"
#include "qreset/common.hpp"

namespace qreset {

// Liouville index A = i*d + j for rho(i,j) (row-major over ket i, bra j), in the
// eigenbasis of the coupling operator. A pair (s_i, s_j) of coupling eigenvalues
// enters the influence functional only through x = s_i - s_j and y = s_i + s_j,
// so indices sharing (x, y) share a "class".
struct ClassTable {
    int d = 0;
    std::vector<double> lam;  // coupling eigenvalues
    std::vector<double> x, y; // per class
    std::vector<int> amap;    // Liouville index -> class
    int vacuum = -1;          // class with x = y = 0 (boundary filler)
    std::vector<double> xs;   // distinct x values
    std::vector<int> xmap;    // class -> index into xs

    int n_classes() const { return static_cast<int>(x.size()); }
    int n_x() const { return static_cast<int>(xs.size()); }
};

inline ClassTable make_classes(const std::vector<double>& lam, double tol = 1e-12) {
    ClassTable ct;
    ct.d = static_cast<int>(lam.size());
    ct.lam = lam;
    auto find = [&](double xv, double yv) {
        for (int c = 0; c < ct.n_classes(); ++c)
            if (std::abs(ct.x[c] - xv) < tol && std::abs(ct.y[c] - yv) < tol) return c;
        return -1;
    };
    for (int i = 0; i < ct.d; ++i)
        for (int j = 0; j < ct.d; ++j) {
            double xv = lam[i] - lam[j], yv = lam[i] + lam[j];
            int c = find(xv, yv);
            if (c < 0) {
                ct.x.push_back(xv);
                ct.y.push_back(yv);
                c = ct.n_classes() - 1;
            }
            ct.amap.push_back(c);
        }
    ct.vacuum = find(0.0, 0.0);
    if (ct.vacuum < 0) {
        ct.x.push_back(0.0);
        ct.y.push_back(0.0);
        ct.vacuum = ct.n_classes() - 1;
    }
    for (int c = 0; c < ct.n_classes(); ++c) {
        auto it = std::find_if(ct.xs.begin(), ct.xs.end(), [&](double v) { return std::abs(v - ct.x[c]) < tol; });
        if (it == ct.xs.end()) {
            ct.xmap.push_back(ct.n_x());
            ct.xs.push_back(ct.x[c]);
        } else {
            ct.xmap.push_back(static_cast<int>(it - ct.xs.begin()));
        }
    }
    return ct;
}

struct InfluenceTensors {
    double dt = 0.0;
    long n_steps = 0;
    long memory_steps = 0;      // K
    std::vector<cplx> D;        // D_k = -eta_k for k = 0..2K, taper applied beyond K
    ClassTable classes;
    std::uint64_t bath_hash = 0;
    std::vector<std::string> warnings;

    long horizon() const { return static_cast<long>(D.size()) - 1; }

    // lag-k weights over (x index u of the later point, class v of the earlier point)
    Mat block(long k) const {
        const auto& ct = classes;
        Mat g(ct.n_x(), ct.n_classes());
        cplx Dk = k <= horizon() ? D[k] : 0.0;
        for (int u = 0; u < ct.n_x(); ++u)
            for (int v = 0; v < ct.n_classes(); ++v)
                g(u, v) = std::exp(-ct.xs[u] * (Dk.real() * ct.x[v] + I * Dk.imag() * ct.y[v]));
        return g;
    }
    // lag-0 weight per class
    Vec block0() const {
        const auto& ct = classes;
        Vec g(ct.n_classes());
        for (int c = 0; c < ct.n_classes(); ++c)
            g[c] = std::exp(-ct.x[c] * (D[0].real() * ct.x[c] + I * D[0].imag() * ct.y[c]));
        return g;
    }
};

// Smallest K with sum_{k>K} |eta_k| < tol * sum_k |eta_k| over the given blocks.
inline long memory_from_tail(const std::vector<cplx>& eta, double tol) {
    double total = 0.0;
    for (auto& e : eta) total += std::abs(e);
    double tail = 0.0;
    for (long K = static_cast<long>(eta.size()) - 1; K >= 0; --K) {
        if (tail + std::abs(eta[K]) >= tol * total) return K;
        tail += std::abs(eta[K]);
    }
    return 0;
}

inline double taper_weight(long k, long K) {
    if (k <= K) return 1.0;
    if (k >= 2 * K) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * double(k - K) / double(K)));
}

struct InfluenceOptions {
    long memory_steps = -1;   // < 0: tail criterion
    double memory_tol = 1e-6;
};

// Generic entry: eta_fn(t) returns the kernel eta(t) (Re <= 0 convention).
template <class EtaFn>
inline InfluenceTensors build_influence_from(EtaFn&& eta_fn, double dt, long n_steps,
                                             const std::vector<double>& coupling_eigenvalues,
                                             InfluenceOptions opt = {}) {
    if (!(dt > 0.0)) throw domain_error("build_influence: dt must be > 0");
    if (n_steps < 1) throw domain_error("build_influence: n_steps must be >= 1");
    if (coupling_eigenvalues.empty()) throw dimension_error("build_influence: no coupling eigenvalues");
    InfluenceTensors inf;
    inf.dt = dt;
    inf.n_steps = n_steps;
    inf.classes = make_classes(coupling_eigenvalues);
    long K = opt.memory_steps;
    std::vector<cplx> eta;
    if (K < 0) {
        // look beyond the window so that clipping can be detected
        eta = eta_blocks_from(eta_fn, dt, 2 * n_steps);
        K = memory_from_tail(eta, opt.memory_tol);
    }
    if (K > n_steps - 1) {
        inf.warnings.push_back("memory_steps " + std::to_string(K) + " exceeds the window; clipped to " +
                               std::to_string(n_steps - 1));
        K = n_steps - 1;
    }
    inf.memory_steps = K;
    long H = 2 * K;
    if (static_cast<long>(eta.size()) < H + 1) eta = eta_blocks_from(eta_fn, dt, std::max(H + 1, 1L));
    inf.D.resize(H + 1);
    for (long k = 0; k <= H; ++k) inf.D[k] = -taper_weight(k, K) * eta[k];
    return inf;
}

inline InfluenceTensors build_influence(const SpectralDensity& sd, double dt, long n_steps,
                                        const std::vector<double>& coupling_eigenvalues,
                                        InfluenceOptions opt = {}) {
    sd.validate();
    auto inf = build_influence_from([&](double t) { return eta(sd, t); }, dt, n_steps, coupling_eigenvalues, opt);
    inf.bath_hash = sd.hash();
    return inf;
}

inline InfluenceTensors build_influence(const std::vector<Mode>& modes, double temperature, double dt,
                                        long n_steps, const std::vector<double>& coupling_eigenvalues,
                                        InfluenceOptions opt = {}) {
    auto inf = build_influence_from([&](double t) { return eta_modes(modes, t, temperature); }, dt, n_steps,
                                    coupling_eigenvalues, opt);
    std::uint64_t h = fnv1a_value(temperature);
    for (auto& m : modes) h = fnv1a_value(m, h);
    inf.bath_hash = h;
    return inf;
}

// Time-translation-invariant matrix-product form of the influence functional.
// Every step uses the same core: for a point in class c the bond vector is
// multiplied by Q[c]. l and r are the boundary vectors for "no system before
// the first step" and "no system after the last"; both are fixed points of the
// vacuum-class core.
struct ProcessTensor {
    double dt = 0.0;
    long n_steps = 0;
    long memory_steps = 0;
    double svd_cutoff = 0.0;
    long max_bond = 0;
    std::uint64_t bath_hash = 0;
    ClassTable classes;
    std::vector<Mat> Q;  // per class, chi x chi
    Vec l, r;
    double discarded_weight = 0.0;  // sum of relative discarded squared singular values
    long max_chi_seen = 0;

    long chi() const { return Q.empty() ? 0 : Q[0].rows(); }
    int dim() const { return classes.d; }
    // bond dimension at each of the n_steps+1 cuts (boundaries included)
    std::vector<long> bond_dims() const { return std::vector<long>(n_steps + 1, chi()); }
    const Mat& core(long /*step*/, int cls) const { return Q[cls]; }
};

namespace detail {

// Two-site unit cell (v-type site: a class, u-type site: an x value) in the
// right-canonical form used by infinite TEBD. Gates are applied lag by lag,
// longest first; each gate also swaps the two sites so the u leg of a time
// point travels one cell per layer towards its own v leg.
struct TwoSite {
    std::vector<Mat> B[2];  // B[s][p] : (left bond) x (right bond)
    RVec lam[2];            // lam[0]: bond left of site 0, lam[1]: between 0 and 1
};

inline Eigen::Index keep_count(const RVec& s, double cutoff) {
    Eigen::Index n = 0;
    while (n < s.size() && s[n] > cutoff * s[0]) ++n;
    return std::max<Eigen::Index>(n, 1);
}

} // namespace detail

struct BuildOptions {
    double svd_cutoff = 1e-8;
    long max_bond = 256;
};

inline ProcessTensor build_process_tensor(const InfluenceTensors& inf, BuildOptions opt = {}) {
    const auto& ct = inf.classes;
    const int dv = ct.n_classes(), du = ct.n_x();
    ProcessTensor pt;
    pt.dt = inf.dt;
    pt.n_steps = inf.n_steps;
    pt.memory_steps = inf.memory_steps;
    pt.svd_cutoff = opt.svd_cutoff;
    pt.max_bond = opt.max_bond;
    pt.bath_hash = inf.bath_hash;
    pt.classes = ct;
    const long H = inf.horizon();
    Vec g0 = inf.block0();

    if (H < 1) {
        pt.Q.assign(dv, Mat(1, 1));
        for (int c = 0; c < dv; ++c) pt.Q[c](0, 0) = g0[c];
        pt.l = pt.r = Vec::Ones(1);
        pt.max_chi_seen = 1;
        return pt;
    }

    auto check = [&](long chi, long k) {
        if (chi > opt.max_bond)
            throw bond_error("bond dimension " + std::to_string(chi) + " exceeds max_bond " +
                                 std::to_string(opt.max_bond) + " at lag " + std::to_string(k),
                             k, chi);
        pt.max_chi_seen = std::max(pt.max_chi_seen, chi);
    };

    detail::TwoSite ts;
    int bond = 0;
    {
        // lag-H gate between v (site 0) and u (site 1) of one cell
        Mat M = inf.block(H).transpose();  // dv x du
        Eigen::BDCSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        RVec s = svd.singularValues();
        auto n = detail::keep_count(s, opt.svd_cutoff);
        double nrm = s.head(n).norm();
        Mat U = svd.matrixU().leftCols(n) * (s.head(n) / nrm).asDiagonal();
        Mat V = svd.matrixV().leftCols(n);
        check(n, H);
        ts.B[0].resize(dv);
        for (int v = 0; v < dv; ++v) ts.B[0][v] = U.row(v);
        ts.B[1].resize(du);
        for (int u = 0; u < du; ++u) ts.B[1][u] = V.row(u).adjoint();
        ts.lam[0] = RVec::Ones(1);
        ts.lam[1] = s.head(n) / nrm;
    }

    for (long k = H - 1; k >= 1; --k) {
        Mat g = inf.block(k);
        int L = bond == 0 ? 1 : 0, R = 1 - L;
        const RVec& ll = bond == 0 ? ts.lam[1] : ts.lam[0];
        // L carries u, R carries v before the gate; after it the order is swapped
        const auto& BL = ts.B[L];
        const auto& BR = ts.B[R];
        const Eigen::Index A = BL[0].rows(), C = BR[0].cols();
        Mat theta(A * dv, du * C);
        for (int u = 0; u < du; ++u)
            for (int v = 0; v < dv; ++v)
                theta.block(v * A, u * C, A, C).noalias() = g(u, v) * (BL[u] * BR[v]);
        Mat wt = theta;
        for (int v = 0; v < dv; ++v) wt.middleRows(v * A, A) = ll.asDiagonal() * theta.middleRows(v * A, A);
        Eigen::BDCSVD<Mat> svd(wt, Eigen::ComputeThinU | Eigen::ComputeThinV);
        RVec s = svd.singularValues();
        auto n = detail::keep_count(s, opt.svd_cutoff);
        check(n, k);
        double tot = s.squaredNorm();
        if (tot > 0.0) pt.discarded_weight += s.tail(s.size() - n).squaredNorm() / tot;
        double nrm = s.head(n).norm();
        Mat V = svd.matrixV().leftCols(n);    // (du*C) x n
        Mat newL = theta * V / nrm;           // (A*dv) x n
        std::vector<Mat> nBL(dv), nBR(du);
        for (int v = 0; v < dv; ++v) nBL[v] = newL.middleRows(v * A, A);
        for (int u = 0; u < du; ++u) nBR[u] = V.middleRows(u * C, C).adjoint();
        ts.B[L] = std::move(nBL);
        ts.B[R] = std::move(nBR);
        ts.lam[bond] = s.head(n) / nrm;
        bond = 1 - bond;
    }

    // merge the u leg of each point with its own v leg, adding the lag-0 weight
    int L = bond == 0 ? 1 : 0, R = 1 - L;
    pt.Q.resize(dv);
    for (int c = 0; c < dv; ++c) pt.Q[c] = g0[c] * (ts.B[L][ct.xmap[c]] * ts.B[R][c]);

    const Mat& Qv = pt.Q[ct.vacuum];
    Eigen::ComplexEigenSolver<Mat> er(Qv), el(Qv.transpose());
    Eigen::Index ir, il;
    er.eigenvalues().cwiseAbs().maxCoeff(&ir);
    el.eigenvalues().cwiseAbs().maxCoeff(&il);
    cplx w = er.eigenvalues()[ir];
    for (auto& q : pt.Q) q /= w;
    pt.r = er.eigenvectors().col(ir);
    pt.l = el.eigenvectors().col(il);
    pt.l /= pt.l.cwiseProduct(pt.r).sum();  // l^T r = 1
    return pt;
}

// ---- binary cache -----------------------------------------------------------

inline constexpr std::uint32_t pt_cache_magic = 0x54505251;  // "QRPT"
inline constexpr std::uint32_t pt_cache_version = 1;

inline std::uint64_t pt_cache_key(std::uint64_t bath_hash, double dt, long n_steps, double svd_cutoff, long K,
                                  const std::vector<double>& lam) {
    std::uint64_t h = fnv1a_value(bath_hash);
    h = fnv1a_value(dt, h);
    h = fnv1a_value(static_cast<std::int64_t>(n_steps), h);
    h = fnv1a_value(svd_cutoff, h);
    h = fnv1a_value(static_cast<std::int64_t>(K), h);
    for (double v : lam) h = fnv1a_value(v, h);
    return h;
}

namespace detail {
template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("process tensor cache: truncated file");
    return v;
}
} // namespace detail

// Layout documented in docs/process_tensor_cache.md (little-endian hosts only).
inline void save_process_tensor(const ProcessTensor& pt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    using detail::put;
    put(os, pt_cache_magic);
    put(os, pt_cache_version);
    put<std::int32_t>(os, pt.classes.d);
    put<std::int32_t>(os, pt.classes.n_classes());
    put<std::int64_t>(os, pt.chi());
    put(os, pt.dt);
    put<std::int64_t>(os, pt.n_steps);
    put<std::int64_t>(os, pt.memory_steps);
    put(os, pt.svd_cutoff);
    put<std::int64_t>(os, pt.max_bond);
    put(os, pt.bath_hash);
    put(os, pt.discarded_weight);
    for (double v : pt.classes.lam) put(os, v);
    for (const auto& q : pt.Q)
        for (Eigen::Index j = 0; j < q.cols(); ++j)
            for (Eigen::Index i = 0; i < q.rows(); ++i) put(os, q(i, j));
    for (Eigen::Index i = 0; i < pt.l.size(); ++i) put(os, pt.l[i]);
    for (Eigen::Index i = 0; i < pt.r.size(); ++i) put(os, pt.r[i]);
}

inline ProcessTensor load_process_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    using detail::get;
    if (get<std::uint32_t>(is) != pt_cache_magic) throw std::runtime_error(path + ": not a process tensor cache");
    if (get<std::uint32_t>(is) != pt_cache_version) throw std::runtime_error(path + ": unsupported cache version");
    ProcessTensor pt;
    int d = get<std::int32_t>(is), nc = get<std::int32_t>(is);
    long chi = get<std::int64_t>(is);
    pt.dt = get<double>(is);
    pt.n_steps = get<std::int64_t>(is);
    pt.memory_steps = get<std::int64_t>(is);
    pt.svd_cutoff = get<double>(is);
    pt.max_bond = get<std::int64_t>(is);
    pt.bath_hash = get<std::uint64_t>(is);
    pt.discarded_weight = get<double>(is);
    std::vector<double> lam(d);
    for (auto& v : lam) v = get<double>(is);
    pt.classes = make_classes(lam);
    if (pt.classes.n_classes() != nc) throw std::runtime_error(path + ": class table mismatch");
    pt.Q.assign(nc, Mat(chi, chi));
    for (auto& q : pt.Q)
        for (Eigen::Index j = 0; j < chi; ++j)
            for (Eigen::Index i = 0; i < chi; ++i) q(i, j) = get<cplx>(is);
    pt.l.resize(chi);
    pt.r.resize(chi);
    for (Eigen::Index i = 0; i < chi; ++i) pt.l[i] = get<cplx>(is);
    for (Eigen::Index i = 0; i < chi; ++i) pt.r[i] = get<cplx>(is);
    pt.max_chi_seen = chi;
    return pt;
}

// ---- contraction --------------------------------------------------------------

// Applies the influence of one time point to a bond-by-Liouville state block.
inline void apply_influence(const ProcessTensor& pt, const Mat& a, Mat& b) {
    const auto& amap = pt.classes.amap;
    b.resize(a.rows(), a.cols());
    for (Eigen::Index A = 0; A < a.cols(); ++A) b.col(A).noalias() = pt.Q[amap[A]].transpose() * a.col(A);
}

// Adjoint of apply_influence for the bilinear pairing <x, y> = sum x.*y.
inline void apply_influence_adjoint(const ProcessTensor& pt, const Mat& mu, Mat& nu) {
    const auto& amap = pt.classes.amap;
    nu.resize(mu.rows(), mu.cols());
    for (Eigen::Index A = 0; A < mu.cols(); ++A) nu.col(A).noalias() = pt.Q[amap[A]] * mu.col(A);
}

inline Vec vec_rowmajor(const Mat& rho) {
    const Eigen::Index d = rho.rows();
    Vec v(d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) v[i * d + j] = rho(i, j);
    return v;
}

inline Mat unvec_rowmajor(const Eigen::Ref<const Vec>& v, Eigen::Index d) {
    Mat rho(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) rho(i, j) = v[i * d + j];
    return rho;
}

struct Contraction {
    std::vector<Mat> rho;           // rho(t_1) .. rho(t_N), trace-normalised
    double max_trace_deviation = 0; // worst |Tr - 1| before normalisation
};

// half_steps[n] is the system superoperator for half of step n; each step is
// half-step, influence of point n, half-step.
inline Contraction contract(const ProcessTensor& pt, const std::vector<Mat>& half_steps, const Mat& rho0) {
    const int d = pt.dim();
    if (rho0.rows() != d || rho0.cols() != d) throw dimension_error("contract: rho0 dimension mismatch");
    if (static_cast<long>(half_steps.size()) != pt.n_steps)
        throw dimension_error("contract: expected " + std::to_string(pt.n_steps) + " propagators, got " +
                              std::to_string(half_steps.size()));
    for (auto& S : half_steps)
        if (S.rows() != d * d || S.cols() != d * d) throw dimension_error("contract: propagator dimension mismatch");
    Contraction out;
    out.rho.reserve(pt.n_steps);
    Mat v = pt.l * vec_rowmajor(rho0).transpose();
    Mat a, b;
    for (long n = 0; n < pt.n_steps; ++n) {
        const Mat& S = half_steps[n];
        a.noalias() = v * S.transpose();
        apply_influence(pt, a, b);
        v.noalias() = b * S.transpose();
        Vec rv = (pt.r.transpose() * v).transpose();
        Mat rho = unvec_rowmajor(rv, d);
        cplx tr = rho.trace();
        out.max_trace_deviation = std::max(out.max_trace_deviation, std::abs(tr - 1.0));
        rho /= tr;
        out.rho.push_back(0.5 * (rho + rho.adjoint()));
    }
    return out;
}

} // namespace qreset
