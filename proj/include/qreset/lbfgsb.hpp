#pragma once

// Limited-memory BFGS with box constraints: generalized Cauchy point along the
// projected gradient path, direct primal subspace minimization over the free
// variables, and a strong-Wolfe line search along the resulting feasible
// direction (Byrd, Lu, Nocedal & Zhu 1995).

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qreset {

struct LbfgsbOptions {
    int m = 10;
    int max_iter = 500;
    double pgtol = 1e-9;
    double ftol = 0.0;       // stop on relative decrease below ftol (0 disables)
    int max_linesearch = 25;
    double c1 = 1e-4;
    double c2 = 0.9;
};

struct LbfgsbResult {
    Eigen::VectorXd x;
    double f = 0.0;
    double pg_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> history;  // f at each accepted iterate, starting with f(x0)
};

namespace lbfgsb_detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double proj_grad_norm(const VectorXd& x, const VectorXd& g, const VectorXd& lo, const VectorXd& hi) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double p = std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i];
        r = std::max(r, std::abs(p));
    }
    return r;
}

// Compact form B = theta I - W M W^T, W = [Y, theta S].
struct Memory {
    std::deque<VectorXd> s, y;
    double theta = 1.0;
    MatrixXd W, M;

    int size() const { return static_cast<int>(s.size()); }

    void rebuild(Eigen::Index n) {
        const int k = size();
        W.resize(n, 2 * k);
        if (k == 0) {
            M.resize(0, 0);
            return;
        }
        MatrixXd S(n, k), Y(n, k);
        for (int i = 0; i < k; ++i) {
            S.col(i) = s[i];
            Y.col(i) = y[i];
        }
        W << Y, theta * S;
        MatrixXd SY = S.transpose() * Y;
        MatrixXd L = MatrixXd::Zero(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < i; ++j) L(i, j) = SY(i, j);
        MatrixXd Minv(2 * k, 2 * k);
        Minv.topLeftCorner(k, k) = MatrixXd((-SY.diagonal()).asDiagonal());
        Minv.topRightCorner(k, k) = L.transpose();
        Minv.bottomLeftCorner(k, k) = L;
        Minv.bottomRightCorner(k, k) = theta * S.transpose() * S;
        M = Minv.fullPivLu().inverse();
    }

    void clear() {
        s.clear();
        y.clear();
        theta = 1.0;
    }
};

// Generalized Cauchy point. Returns xc and c = W^T (xc - x).
inline void cauchy_point(const VectorXd& x, const VectorXd& g, const VectorXd& lo, const VectorXd& hi,
                         const Memory& mem, VectorXd& xc, VectorXd& c, std::vector<char>& free_var) {
    const Eigen::Index n = x.size();
    const Eigen::Index k2 = mem.W.cols();
    const double inf = std::numeric_limits<double>::infinity();
    VectorXd tb(n), d(n);
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (g[i] < 0.0)
            tb[i] = (x[i] - hi[i]) / g[i];
        else if (g[i] > 0.0)
            tb[i] = (x[i] - lo[i]) / g[i];
        else
            tb[i] = inf;
        d[i] = tb[i] == 0.0 ? 0.0 : -g[i];
        if (tb[i] > 0.0 && tb[i] < inf) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return tb[a] < tb[b]; });
    xc = x;
    c = VectorXd::Zero(k2);
    VectorXd p = k2 ? VectorXd(mem.W.transpose() * d) : VectorXd();
    double fp = -d.squaredNorm();
    double fpp = -mem.theta * fp - (k2 ? p.dot(mem.M * p) : 0.0);
    double dtmin = fpp > 0 ? -fp / fpp : inf;
    double told = 0.0;
    std::size_t it = 0;
    free_var.assign(n, 1);
    for (Eigen::Index i = 0; i < n; ++i)
        if (d[i] == 0.0) free_var[i] = 0;
    while (it < order.size()) {
        Eigen::Index b = order[it];
        double t = tb[b];
        double dt = t - told;
        if (dtmin < dt) break;
        // advance to breakpoint b, variable b becomes fixed
        xc[b] = d[b] > 0 ? hi[b] : lo[b];
        double zb = xc[b] - x[b];
        if (k2) c += dt * p;
        double gb = g[b];
        if (k2) {
            VectorXd wb = mem.W.row(b).transpose();
            VectorXd Mc = mem.M * c, Mp = mem.M * p, Mw = mem.M * wb;
            fp += dt * fpp + gb * gb + mem.theta * gb * zb - gb * wb.dot(Mc);
            fpp += -mem.theta * gb * gb - 2.0 * gb * wb.dot(Mp) - gb * gb * wb.dot(Mw);
            p += gb * wb;
        } else {
            fp += dt * fpp + gb * gb + mem.theta * gb * zb;
            fpp += -mem.theta * gb * gb;
        }
        d[b] = 0.0;
        free_var[b] = 0;
        told = t;
        ++it;
        if (fp >= 0.0) {
            dtmin = 0.0;
            break;
        }
        fpp = std::max(fpp, std::numeric_limits<double>::epsilon() * mem.theta);
        dtmin = -fp / fpp;
    }
    dtmin = std::max(dtmin, 0.0);
    if (!std::isfinite(dtmin)) dtmin = 0.0;
    double tfin = told + dtmin;
    for (Eigen::Index i = 0; i < n; ++i)
        if (d[i] != 0.0) xc[i] = std::clamp(x[i] + tfin * d[i], lo[i], hi[i]);
    if (k2) c += dtmin * p;
}

// Direct primal subspace minimization; returns x_bar.
inline VectorXd subspace_min(const VectorXd& x, const VectorXd& g, const VectorXd& lo, const VectorXd& hi,
                             const Memory& mem, const VectorXd& xc, const VectorXd& c,
                             const std::vector<char>& free_var) {
    std::vector<Eigen::Index> F;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (free_var[i] && xc[i] > lo[i] && xc[i] < hi[i]) F.push_back(i);
    if (F.empty()) return xc;
    const Eigen::Index nf = static_cast<Eigen::Index>(F.size());
    const Eigen::Index k2 = mem.W.cols();
    const double th = mem.theta;
    VectorXd r(nf);
    VectorXd Mc = k2 ? VectorXd(mem.M * c) : VectorXd();
    for (Eigen::Index j = 0; j < nf; ++j) {
        auto i = F[j];
        r[j] = g[i] + th * (xc[i] - x[i]) - (k2 ? mem.W.row(i).dot(Mc) : 0.0);
    }
    VectorXd du;
    if (k2) {
        MatrixXd WF(nf, k2);
        for (Eigen::Index j = 0; j < nf; ++j) WF.row(j) = mem.W.row(F[j]);
        VectorXd v = mem.M * (WF.transpose() * r);
        MatrixXd N = MatrixXd::Identity(k2, k2) - (1.0 / th) * mem.M * (WF.transpose() * WF);
        v = N.fullPivLu().solve(v);
        du = -(1.0 / th) * r - (1.0 / (th * th)) * (WF * v);
    } else {
        du = -(1.0 / th) * r;
    }
    double a = 1.0;
    for (Eigen::Index j = 0; j < nf; ++j) {
        auto i = F[j];
        if (du[j] > 0)
            a = std::min(a, (hi[i] - xc[i]) / du[j]);
        else if (du[j] < 0)
            a = std::min(a, (lo[i] - xc[i]) / du[j]);
    }
    a = std::max(a, 0.0);
    VectorXd xb = xc;
    for (Eigen::Index j = 0; j < nf; ++j) xb[F[j]] = std::clamp(xc[F[j]] + a * du[j], lo[F[j]], hi[F[j]]);
    return xb;
}

inline double max_step(const VectorXd& x, const VectorXd& d, const VectorXd& lo, const VectorXd& hi) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (d[i] > 0)
            a = std::min(a, (hi[i] - x[i]) / d[i]);
        else if (d[i] < 0)
            a = std::min(a, (lo[i] - x[i]) / d[i]);
    }
    return a;
}

// minimiser of the cubic through (a, fa, ga), (b, fb, gb); falls back to bisection
inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
    double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    double disc = d1 * d1 - ga * gb;
    double mid = 0.5 * (a + b);
    if (disc < 0.0) return mid;
    double d2 = std::copysign(std::sqrt(disc), b - a);
    double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    double lo = std::min(a, b), hi = std::max(a, b), w = hi - lo;
    if (!std::isfinite(t) || t < lo + 0.1 * w || t > hi - 0.1 * w) return mid;
    return t;
}

} // namespace lbfgsb_detail

// fg(x, g) returns f(x) and writes the gradient into g.
inline LbfgsbResult lbfgsb_minimize(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
                                    Eigen::VectorXd x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                    const LbfgsbOptions& opt = {},
                                    const std::function<void(int, double, double)>& on_iter = {}) {
    using namespace lbfgsb_detail;
    const Eigen::Index n = x0.size();
    LbfgsbResult res;
    VectorXd x = x0.cwiseMax(lo).cwiseMin(hi);
    VectorXd g(n);
    double f = fg(x, g);
    res.evaluations = 1;
    res.history.push_back(f);
    Memory mem;
    mem.rebuild(n);
    std::vector<char> free_var;
    VectorXd xc, c;
    bool fresh_restart = false;

    for (int iter = 0;; ++iter) {
        double pg = proj_grad_norm(x, g, lo, hi);
        res.pg_norm = pg;
        if (pg < opt.pgtol) {
            res.converged = true;
            res.message = "projected gradient below tolerance";
            break;
        }
        if (iter >= opt.max_iter) {
            res.message = "iteration limit reached";
            break;
        }
        cauchy_point(x, g, lo, hi, mem, xc, c, free_var);
        VectorXd xb = subspace_min(x, g, lo, hi, mem, xc, c, free_var);
        VectorXd d = xb - x;
        double dphi0 = g.dot(d);
        if (!(dphi0 < 0.0)) {
            if (mem.size() > 0 && !fresh_restart) {
                mem.clear();
                mem.rebuild(n);
                fresh_restart = true;
                --iter;
                continue;
            }
            res.message = "no descent direction";
            break;
        }
        double amax = max_step(x, d, lo, hi);
        double a = std::min(1.0, amax);
        if (mem.size() == 0) a = std::min(a, 1.0 / std::max(d.norm(), 1e-300));

        // strong Wolfe line search
        double a_prev = 0.0, f_prev = f, dphi_prev = dphi0;
        double a_lo = 0, f_lo = f, dphi_lo = dphi0, a_hi = 0, f_hi = f, dphi_hi = dphi0;
        bool zoom = false, ok = false;
        VectorXd xn(n), gn(n);
        double fn = f;
        int ls = 0;
        auto eval = [&](double step) {
            xn = (x + step * d).cwiseMax(lo).cwiseMin(hi);
            fn = fg(xn, gn);
            ++res.evaluations;
            return gn.dot(d);
        };
        for (; ls < opt.max_linesearch; ++ls) {
            double dphi = eval(a);
            if (!std::isfinite(fn)) {
                a = 0.5 * (a_prev + a);
                continue;
            }
            if (fn > f + opt.c1 * a * dphi0 || (ls > 0 && fn >= f_prev)) {
                a_lo = a_prev; f_lo = f_prev; dphi_lo = dphi_prev;
                a_hi = a; f_hi = fn; dphi_hi = dphi;
                zoom = true;
                break;
            }
            if (std::abs(dphi) <= -opt.c2 * dphi0) {
                ok = true;
                break;
            }
            if (dphi >= 0.0) {
                a_lo = a; f_lo = fn; dphi_lo = dphi;
                a_hi = a_prev; f_hi = f_prev; dphi_hi = dphi_prev;
                zoom = true;
                break;
            }
            if (a >= amax) {
                ok = true;  // sufficient decrease holds at the boundary
                break;
            }
            a_prev = a; f_prev = fn; dphi_prev = dphi;
            a = std::min(2.0 * a, amax);
        }
        if (zoom) {
            for (; ls < opt.max_linesearch; ++ls) {
                a = cubic_min(a_lo, f_lo, dphi_lo, a_hi, f_hi, dphi_hi);
                double dphi = eval(a);
                if (fn > f + opt.c1 * a * dphi0 || fn >= f_lo) {
                    a_hi = a; f_hi = fn; dphi_hi = dphi;
                } else {
                    if (std::abs(dphi) <= -opt.c2 * dphi0) {
                        ok = true;
                        break;
                    }
                    if (dphi * (a_hi - a_lo) >= 0.0) {
                        a_hi = a_lo; f_hi = f_lo; dphi_hi = dphi_lo;
                    }
                    a_lo = a; f_lo = fn; dphi_lo = dphi;
                }
                if (std::abs(a_hi - a_lo) < 1e-16 * std::max(1.0, a_lo)) break;
            }
            if (!ok && a_lo > 0.0 && f_lo < f) {
                // accept the best Armijo point found
                a = a_lo;
                eval(a);
                ok = true;
            }
        }
        if (!ok) {
            if (mem.size() > 0 && !fresh_restart) {
                mem.clear();
                mem.rebuild(n);
                fresh_restart = true;
                --iter;
                continue;
            }
            res.message = "line search failed";
            break;
        }
        fresh_restart = false;
        VectorXd s = xn - x, y = gn - g;
        double fold = f;
        x = xn;
        g = gn;
        f = fn;
        res.iterations = iter + 1;
        res.history.push_back(f);
        double sy = s.dot(y);
        if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm()) {
            mem.s.push_back(s);
            mem.y.push_back(y);
            if (mem.size() > opt.m) {
                mem.s.pop_front();
                mem.y.pop_front();
            }
            mem.theta = y.squaredNorm() / sy;
            mem.rebuild(n);
        }
        if (on_iter) on_iter(res.iterations, f, proj_grad_norm(x, g, lo, hi));
        if (opt.ftol > 0.0 && (fold - f) <= opt.ftol * std::max({std::abs(fold), std::abs(f), 1e-300})) {
            res.converged = true;
            res.message = "relative reduction below ftol";
            res.pg_norm = proj_grad_norm(x, g, lo, hi);
            break;
        }
    }
    res.x = x;
    res.f = f;
    return res;
}

} // namespace qreset
