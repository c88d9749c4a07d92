// Reference implementations used as independent oracles in the test suite.
// Deliberately brute-force and separate from the library's own algorithms.
#ifndef RESORB_TESTS_ORACLES_HPP
#define RESORB_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Kepler equation by pure bisection on the monotone residual; |res| < 1e-15.
inline double bisect_kepler(double e, double M) {
    double two_pi = 2.0 * M_PI;
    double Mr = std::remainder(M, two_pi);
    if (Mr <= -M_PI) Mr += two_pi;
    double branch = M - Mr;
    double sgn = Mr < 0 ? -1.0 : 1.0;
    double Ma = std::fabs(Mr);
    double lo = Ma - e, hi = Ma + e;
    for (int it = 0; it < 120; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid - e * std::sin(mid) - Ma <= 0)
            lo = mid;
        else
            hi = mid;
    }
    return sgn * 0.5 * (lo + hi) + branch;
}

// Central finite difference.
inline double central_fd(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Fourth-order Richardson extrapolation of the central difference.
inline double richardson_fd(const std::function<double(double)>& f, double x, double h) {
    double d1 = central_fd(f, x, h);
    double d2 = central_fd(f, x, 0.5 * h);
    return (4.0 * d2 - d1) / 3.0;
}

inline double second_fd(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// Local minima of a doubly 2pi-periodic function on an n x n grid.
struct GridMin {
    double u, v, value;
};
inline std::vector<GridMin> grid_minima(const std::function<double(double, double)>& f, int n) {
    std::vector<double> val(static_cast<std::size_t>(n) * n);
    double h = 2.0 * M_PI / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) val[std::size_t(i) * n + j] = f(i * h, j * h);
    std::vector<GridMin> out;
    auto at = [&](int i, int j) {
        return val[std::size_t((i + n) % n) * n + (j + n) % n];
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double c = at(i, j);
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1 && is_min; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    if (at(i + di, j + dj) < c) is_min = false;
                }
            if (is_min) out.push_back({i * h, j * h, c});
        }
    return out;
}

// Lattice minima can be artifacts of a narrow curved valley. Polish each
// candidate with a shrinking 8-direction pattern search (derivative free),
// then cluster: artifacts slide along the valley into the true minimum.
inline std::vector<GridMin> polished_minima(const std::function<double(double, double)>& f,
                                            int n, double cluster_tol = 1e-3) {
    auto raw = grid_minima(f, n);
    std::vector<GridMin> polished;
    for (auto m : raw) {
        double h = 2.0 * M_PI / n;
        while (h > 1e-8) {
            bool moved = false;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    double fu = f(m.u + di * h, m.v + dj * h);
                    if (fu < m.value) {
                        m = {m.u + di * h, m.v + dj * h, fu};
                        moved = true;
                    }
                }
            if (!moved) h *= 0.5;
        }
        m.u = std::fmod(m.u + 4.0 * M_PI, 2.0 * M_PI);
        m.v = std::fmod(m.v + 4.0 * M_PI, 2.0 * M_PI);
        bool dup = false;
        for (const auto& q : polished) {
            double du = std::remainder(m.u - q.u, 2.0 * M_PI);
            double dv = std::remainder(m.v - q.v, 2.0 * M_PI);
            if (std::fabs(du) < cluster_tol && std::fabs(dv) < cluster_tol) dup = true;
        }
        if (!dup) polished.push_back(m);
    }
    return polished;
}

// Tensor-product trapezoid over the full torus (equal weights).
inline double torus_trapezoid(const std::function<double(double, double)>& f, int n) {
    double h = 2.0 * M_PI / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += f(i * h, j * h);
        sum += row;
    }
    return sum * h * h;
}

// Adaptive 2-D quadrature on [u0,u0+2pi]x[v0,v0+2pi] that subdivides where the
// integrand is rough (integrable point singularities included). Gauss 5x5 per
// cell compared against its four children.
namespace detail {
inline const double gl5x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
inline const double gl5w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};

inline double cell_gl(const std::function<double(double, double)>& f, double ua, double ub,
                      double va, double vb) {
    double cu = 0.5 * (ua + ub), hu = 0.5 * (ub - ua);
    double cv = 0.5 * (va + vb), hv = 0.5 * (vb - va);
    double s = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            s += gl5w[i] * gl5w[j] * f(cu + hu * gl5x[i], cv + hv * gl5x[j]);
    return s * hu * hv;
}

inline double adapt_rec(const std::function<double(double, double)>& f, double ua, double ub,
                        double va, double vb, double coarse, double tol, int depth) {
    double um = 0.5 * (ua + ub), vm = 0.5 * (va + vb);
    double c00 = cell_gl(f, ua, um, va, vm);
    double c01 = cell_gl(f, ua, um, vm, vb);
    double c10 = cell_gl(f, um, ub, va, vm);
    double c11 = cell_gl(f, um, ub, vm, vb);
    double fine = c00 + c01 + c10 + c11;
    if (depth >= 26 || std::fabs(fine - coarse) < tol) return fine;
    double t = tol / 4.0;
    return adapt_rec(f, ua, um, va, vm, c00, t, depth + 1) +
           adapt_rec(f, ua, um, vm, vb, c01, t, depth + 1) +
           adapt_rec(f, um, ub, va, vm, c10, t, depth + 1) +
           adapt_rec(f, um, ub, vm, vb, c11, t, depth + 1);
}
} // namespace detail

inline double adaptive_torus_quadrature(const std::function<double(double, double)>& f,
                                        double u0, double v0, double tol) {
    const int n0 = 8; // initial uniform split so the peak is isolated early
    double h = 2.0 * M_PI / n0;
    double total = 0.0;
    for (int i = 0; i < n0; ++i)
        for (int j = 0; j < n0; ++j) {
            double ua = u0 + i * h, va = v0 + j * h;
            double coarse = detail::cell_gl(f, ua, ua + h, va, va + h);
            total += detail::adapt_rec(f, ua, ua + h, va, va + h, coarse,
                                       tol / (n0 * n0), 0);
        }
    return total;
}

} // namespace oracle

#endif
