#include "resorb/distance.hpp"

#include <algorithm>
#include <cmath>

#include "resorb/angles.hpp"
#include "resorb/errors.hpp"

namespace resorb {

namespace {

struct PairState {
    AnomalyState a, p;
    Vec3 delta; // p.X - a.X
};

PairState pair_at(const TwoOrbitConfig& cfg, const Vec2& V, bool second) {
    PairState s;
    s.a = cfg.ast.at(V.u, second);
    s.p = cfg.pl.at(V.v, second);
    s.delta = s.p.X - s.a.X;
    return s;
}

Sym2 half_hessian(const PairState& s) {
    Sym2 A;
    A.a11 = norm2(s.a.Xl) - dot(s.a.Xll, s.delta);
    A.a12 = -dot(s.a.Xl, s.p.Xl);
    A.a22 = norm2(s.p.Xl) + dot(s.p.Xll, s.delta);
    return A;
}

Vec2 gradient(const PairState& s) {
    return {-2.0 * dot(s.a.Xl, s.delta), 2.0 * dot(s.p.Xl, s.delta)};
}

// Damped Newton on grad d^2 = 0. Returns false if it fails to settle.
bool newton_solve(const TwoOrbitConfig& cfg, Vec2& V, double tol) {
    for (int it = 0; it < 60; ++it) {
        PairState s = pair_at(cfg, V, true);
        Vec2 g = gradient(s);
        Sym2 H = half_hessian(s) * 2.0;
        double tr = std::abs(H.trace());
        if (std::abs(H.det()) < 1e-13 * tr * tr)
            H = H + Sym2{1e-3 * tr, 0.0, 1e-3 * tr}; // regularize a flat iterate
        Sym2 Hinv = sym2_inverse(H);
        Vec2 step{-(Hinv.a11 * g.u + Hinv.a12 * g.v), -(Hinv.a12 * g.u + Hinv.a22 * g.v)};
        double g0 = std::hypot(g.u, g.v);
        double lam = 1.0;
        Vec2 next = V;
        for (int bt = 0; bt < 25; ++bt) {
            next = {V.u + lam * step.u, V.v + lam * step.v};
            PairState st = pair_at(cfg, next, false);
            Vec2 gt = gradient(st);
            if (std::hypot(gt.u, gt.v) <= g0 * (1.0 - 0.25 * lam) + 1e-16) break;
            lam *= 0.5;
        }
        double moved = std::max(std::abs(next.u - V.u), std::abs(next.v - V.v));
        V = next;
        if (moved < tol) return true;
    }
    return false;
}

CriticalPoint classify(const TwoOrbitConfig& cfg, const Vec2& V) {
    CriticalPoint cp;
    cp.V = {wrap_two_pi(V.u), wrap_two_pi(V.v)};
    PairState s = pair_at(cfg, cp.V, true);
    cp.d2 = norm2(s.delta);
    cp.d = std::sqrt(cp.d2);
    cp.A = half_hessian(s);
    double lo, hi;
    cp.A.eigenvalues(lo, hi);
    cp.morse_index = (lo < 0.0) + (hi < 0.0);
    double tr = cp.A.trace();
    cp.degenerate = std::abs(cp.A.det()) < 1e-12 * tr * tr;
    cp.d_tilde = cp.d;
    cp.signed_ok = false;
    if (cp.morse_index == 0) {
        try {
            cp.d_tilde = signed_distance(cfg, cp.V);
            cp.signed_ok = true;
        } catch (const SmoothingFails&) {
            // parallel tangents: magnitude is still d, sign unavailable
        }
    }
    return cp;
}

bool same_point(const Vec2& a, const Vec2& b, double tol) {
    return std::abs(wrap_pm_pi(a.u - b.u)) < tol && std::abs(wrap_pm_pi(a.v - b.v)) < tol;
}

std::vector<CriticalPoint> sweep(const TwoOrbitConfig& cfg, const CriticalPointOptions& opts,
                                 int grid) {
    std::vector<Vec2> found;
    const double step = TWO_PI / grid;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            Vec2 V{(i + 0.5) * step, (j + 0.5) * step};
            if (!newton_solve(cfg, V, opts.newton_tol)) continue;
            V = {wrap_two_pi(V.u), wrap_two_pi(V.v)};
            bool dup = false;
            for (const auto& w : found)
                if (same_point(V, w, opts.dedup_tol)) { dup = true; break; }
            if (!dup) {
                found.push_back(V);
                if ((int)found.size() > opts.max_points)
                    throw DegenerateConfig("critical set exceeds the isolated-point cap");
            }
        }
    }
    // residual screen: keep genuine roots only
    std::vector<CriticalPoint> out;
    double scale = cfg.ast.a() * cfg.ast.a() + cfg.pl.a() * cfg.pl.a();
    for (const auto& V : found) {
        Vec2 g = gradient(pair_at(cfg, V, false));
        if (std::hypot(g.u, g.v) > 1e-8 * scale) continue;
        out.push_back(classify(cfg, V));
    }
    return out;
}

void sort_points(std::vector<CriticalPoint>& pts) {
    std::sort(pts.begin(), pts.end(), [](const CriticalPoint& x, const CriticalPoint& y) {
        if (x.morse_index != y.morse_index) return x.morse_index < y.morse_index;
        if (x.d != y.d) return x.d < y.d;
        if (x.V.u != y.V.u) return x.V.u < y.V.u;
        return x.V.v < y.V.v;
    });
}

} // namespace

double d_squared(const TwoOrbitConfig& cfg, const Vec2& V) {
    return norm2(pair_at(cfg, V, false).delta);
}

Vec2 d_squared_gradient(const TwoOrbitConfig& cfg, const Vec2& V) {
    return gradient(pair_at(cfg, V, false));
}

Sym2 a_matrix(const TwoOrbitConfig& cfg, const Vec2& V) {
    return half_hessian(pair_at(cfg, V, true));
}

bool tangent_degenerate(const Sym2& A) {
    double tr = A.trace();
    return A.det() < 1e-12 * tr * tr;
}

double signed_distance(const TwoOrbitConfig& cfg, const Vec2& V) {
    PairState s = pair_at(cfg, V, false);
    Vec3 tstar = cross(s.p.Xl, s.a.Xl);
    double tn = norm(tstar);
    double sin_angle = tn / (norm(s.a.Xl) * norm(s.p.Xl));
    if (sin_angle < 1e-8)
        throw SmoothingFails("tangents are parallel, signed distance undefined");
    return dot(tstar, s.delta) / tn;
}

std::vector<CriticalPoint> critical_points(const TwoOrbitConfig& cfg,
                                           const CriticalPointOptions& opts) {
    // a coplanar concentric pair has a whole circle of critical points
    if (cfg.ast.e() < 1e-13 && cfg.pl.e() < 1e-13 &&
        norm(cross(cfg.ast.nhat(), cfg.pl.nhat())) < 1e-13)
        throw DegenerateConfig("coplanar concentric circles");

    auto pts = sweep(cfg, opts, opts.seed_grid);
    int chi = 0;
    for (const auto& p : pts) chi += (p.morse_index == 1) ? -1 : 1;
    if (chi != 0) {
        pts = sweep(cfg, opts, 2 * opts.seed_grid); // one escalation for coarse-grid misses
        chi = 0;
        for (const auto& p : pts) chi += (p.morse_index == 1) ? -1 : 1;
        if (chi != 0)
            throw NumericalFailure("critical point census is Morse-inconsistent");
    }
    if (pts.empty()) throw NumericalFailure("no critical points found");
    sort_points(pts);
    return pts;
}

CriticalPoint refine_critical_point(const TwoOrbitConfig& cfg, const Vec2& seed,
                                    double newton_tol) {
    Vec2 V = seed;
    if (!newton_solve(cfg, V, newton_tol))
        throw NumericalFailure("critical point refinement did not converge");
    return classify(cfg, V);
}

CriticalPoint min_distance(const TwoOrbitConfig& cfg, const CriticalPointOptions& opts) {
    auto pts = critical_points(cfg, opts);
    if (pts.front().morse_index != 0)
        throw NumericalFailure("no minimum in the critical point census");
    return pts.front();
}

double delta_h(const CriticalPoint& mp, const Vec2& V) {
    Vec2 w{wrap_pm_pi(V.u - mp.V.u), wrap_pm_pi(V.v - mp.V.v)};
    double q = mp.d2 + mp.A.quad(w);
    return std::sqrt(std::max(q, 0.0));
}

namespace {

struct MinimumEval {
    Vec2 V;
    double d_tilde;
    double inv_sqrt_detA;
};

MinimumEval eval_displaced(const ResonantState& y, const ResonanceSpec& spec,
                           const OrbitShape& planet, const Vec2& seed, double k) {
    TwoOrbitConfig cfg{shape_from_resonant(y, spec, k), planet};
    Vec2 V = seed;
    if (!newton_solve(cfg, V, 1e-13))
        throw BifurcationNearby("minimum lost under displacement");
    if (std::abs(wrap_pm_pi(V.u - seed.u)) > 0.3 || std::abs(wrap_pm_pi(V.v - seed.v)) > 0.3)
        throw BifurcationNearby("minimum jumped basins under displacement");
    PairState s = pair_at(cfg, V, true);
    Sym2 A = half_hessian(s);
    double lo, hi;
    A.eigenvalues(lo, hi);
    if (lo <= 0.0)
        throw BifurcationNearby("displaced critical point is not a minimum");
    MinimumEval out;
    // unwrap relative to the seed so finite differences see a continuous branch
    out.V = {seed.u + wrap_pm_pi(V.u - seed.u), seed.v + wrap_pm_pi(V.v - seed.v)};
    out.d_tilde = signed_distance(cfg, V);
    out.inv_sqrt_detA = 1.0 / std::sqrt(A.det());
    return out;
}

} // namespace

GeometryGradients geometry_gradients(const ResonantState& y, const ResonanceSpec& spec,
                                     const OrbitShape& planet, const Vec2& seed_Vh,
                                     double k, double rel_step) {
    GeometryGradients out;
    TwoOrbitConfig cfg{shape_from_resonant(y, spec, k), planet};
    out.base = refine_critical_point(cfg, seed_Vh, 1e-13);
    if (out.base.morse_index != 0)
        throw ContractViolation("geometry gradients require a minimum seed");
    out.inv_sqrt_detA = 1.0 / std::sqrt(out.base.A.det());

    const double act_scale = y.G;
    const double scales[5] = {std::max(std::abs(y.S), act_scale), y.G,
                              std::max(std::abs(y.Z), act_scale), 1.0, 1.0};
    const Vec2 base_V = out.base.V;

    for (int i = 0; i < 5; ++i) {
        // axes are (S, G, Z, g, z); sigma is not a geometry coordinate
        auto apply = [&](double h) {
            ResonantState yy = y;
            switch (i) {
                case 0: yy.S += h; break;
                case 1: yy.G += h; break;
                case 2: yy.Z += h; break;
                case 3: yy.g += h; break;
                case 4: yy.z += h; break;
            }
            return yy;
        };
        double h = rel_step * scales[i];
        auto probe = [&](double hh) {
            MinimumEval p = eval_displaced(apply(hh), spec, planet, base_V, k);
            MinimumEval m = eval_displaced(apply(-hh), spec, planet, base_V, k);
            struct {
                double dt, isd;
                Vec2 dV;
            } r{(p.d_tilde - m.d_tilde) / (2 * hh),
                (p.inv_sqrt_detA - m.inv_sqrt_detA) / (2 * hh),
                Vec2{(p.V.u - m.V.u) / (2 * hh), (p.V.v - m.V.v) / (2 * hh)}};
            return r;
        };
        auto c1 = probe(h);
        auto c2 = probe(h / 2);
        out.dtilde[i] = (4 * c2.dt - c1.dt) / 3;
        out.d_inv_sqrt_detA[i] = (4 * c2.isd - c1.isd) / 3;
        out.dVh[i] = {(4 * c2.dV.u - c1.dV.u) / 3, (4 * c2.dV.v - c1.dV.v) / 3};
    }
    return out;
}

} // namespace resorb
