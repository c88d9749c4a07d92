#include "resorb/hamiltonian.hpp"

#include <algorithm>
#include <cmath>

#include "resorb/angles.hpp"
#include "resorb/errors.hpp"
#include "resorb/quadrature.hpp"

namespace resorb {

namespace {

// ---- Dirichlet kernel -----------------------------------------------------

double power_sum(int N, int p) {
    double s = 0;
    for (int n = 1; n <= N; ++n) s += std::pow((double)n, p);
    return s;
}

// Near x = 0 (mod 2pi) the ratio form loses digits; switch to the cosine
// series there.
constexpr double KERNEL_SERIES_X = 1e-3;

double dirichlet_series(int N, double x) {
    double S2 = power_sum(N, 2), S4 = power_sum(N, 4), S6 = power_sum(N, 6);
    double x2 = x * x;
    return (2.0 * N + 1.0) - S2 * x2 + S4 * x2 * x2 / 12.0 - S6 * x2 * x2 * x2 / 360.0;
}

double dirichlet_deriv_series(int N, double x) {
    double S2 = power_sum(N, 2), S4 = power_sum(N, 4), S6 = power_sum(N, 6);
    double x2 = x * x;
    return -2.0 * (S2 * x - S4 * x2 * x / 6.0 + S6 * x2 * x2 * x / 120.0);
}

// ---- Radial taper ----------------------------------------------------------
// Gaussian-smoothed step centered at R/2 with width sg = R * taper_frac, cut
// and shifted so chi(R) = 0 exactly. A compactly supported C-infinity bump
// would leave a trapezoid error of the band grid around 1e-6; the erfc
// profile pushes the alias level to exp(-(m sg)^2/2) while its support leak
// at the center stays below 1e-13 for the default width ratio.

struct Taper {
    double R = 0, rc = 0, sg = 0, cut = 0, chi0 = 0;
    void set(double R_eff, double frac) {
        R = R_eff;
        rc = 0.5 * R_eff;
        sg = R_eff * frac;
        cut = 0.5 * std::erfc((R - rc) / (std::sqrt(2.0) * sg));
        chi0 = 0.5 * std::erfc(-rc / (std::sqrt(2.0) * sg)) - cut;
    }
    double chi(double rho) const {
        if (rho >= R) return 0.0;
        double v = 0.5 * std::erfc((rho - rc) / (std::sqrt(2.0) * sg)) - cut;
        return v > 0.0 ? v : 0.0;
    }
    double chi_prime(double rho) const {
        if (rho <= 0.0 || rho >= R) return 0.0;
        double u = (rho - rc) / sg;
        return -std::exp(-0.5 * u * u) / (sg * std::sqrt(TWO_PI));
    }
};

struct Cpx {
    double re = 1, im = 0;
};
inline Cpx cmul(const Cpx& a, const Cpx& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

// Kernel value and derivative from the two half-angle phasors
// w = e^{ix/2}, W = e^{i(2N+1)x/2}.
inline void kernel_from_phasors(int N, const Cpx& w, const Cpx& W, double& D, double& Dp) {
    if (std::fabs(w.im) > 5e-4) {
        D = W.im / w.im;
        Dp = ((N + 0.5) * W.re * w.im - 0.5 * w.re * W.im) / (w.im * w.im);
    } else {
        // 2 atan2 lands in (-2pi, 2pi]; fold by periodicity before the series
        double x = 2.0 * std::atan2(w.im, w.re);
        if (x > PI)
            x -= TWO_PI;
        else if (x <= -PI)
            x += TWO_PI;
        D = dirichlet_series(N, x);
        Dp = dirichlet_deriv_series(N, x);
    }
}

// ---- Per-axis tensor tables -----------------------------------------------

struct AstTables {
    std::vector<Vec3> X;
    std::vector<std::array<Vec3, 5>> D; // dX/d(S, G, Z, g, z) if gradients
    std::vector<Cpx> half, big;         // e^{i(h ell - sigma)/2}, e^{i(2N+1)(...)/2}
};

struct PlTables {
    std::vector<Vec3> X, ind; // position and X'/|X'|^3
    std::vector<Cpx> half, big;
};

AstTables ast_tables(const OrbitShape& ast, const ResonantState& y, const ResonanceSpec& spec,
                     double sigma, int N, int m, bool gradients, double k) {
    AstTables t;
    t.X.resize(m);
    if (gradients) t.D.resize(m);
    t.half.resize(m);
    t.big.resize(m);
    std::array<std::array<double, 5>, 5> J{};
    if (gradients) J = shape_jacobian(y, spec, k);
    double step = TWO_PI / m;
    for (int i = 0; i < m; ++i) {
        double ell = (i + 0.5) * step;
        AnomalyState st = ast.at(ell);
        t.X[i] = st.X;
        if (gradients) {
            auto sp = ast.shape_partials(ell, st.E);
            for (int axis = 0; axis < 5; ++axis) {
                Vec3 v{};
                for (int row = 0; row < 5; ++row) v += sp[row] * J[row][axis];
                t.D[i][axis] = v;
            }
        }
        double ph = 0.5 * (spec.h_ast * ell - sigma);
        t.half[i] = {std::cos(ph), std::sin(ph)};
        double phb = (2.0 * N + 1.0) * ph;
        t.big[i] = {std::cos(phb), std::sin(phb)};
    }
    return t;
}

PlTables pl_tables(const OrbitShape& pl, const ResonanceSpec& spec, int N, int m) {
    PlTables t;
    t.X.resize(m);
    t.ind.resize(m);
    t.half.resize(m);
    t.big.resize(m);
    double step = TWO_PI / m;
    for (int j = 0; j < m; ++j) {
        double ell = (j + 0.5) * step;
        Vec3 X = pl.position(ell);
        t.X[j] = X;
        double r3 = std::pow(norm2(X), 1.5);
        t.ind[j] = X / r3;
        double ph = 0.5 * spec.h_pl * ell;
        t.half[j] = {std::cos(ph), std::sin(ph)};
        double phb = (2.0 * N + 1.0) * ph;
        t.big[j] = {std::cos(phb), std::sin(phb)};
    }
    return t;
}

// ---- Polar sweep shared by the extracted paths ----------------------------

// Radial segments: dyadic panels from R inward, each split so no segment is
// wider than ~1.3 taper widths. The layout depends only on (R, sg), so the
// quadrature error is smooth under state displacements.
std::vector<std::pair<double, double>> radial_segments(const Taper& tp, const QuadSpec& q) {
    std::vector<std::pair<double, double>> segs;
    double hi = tp.R;
    for (int p = 0; p < q.panels; ++p) {
        double lo = (p == q.panels - 1) ? 0.0 : hi * 0.5;
        int ns = std::max(1, (int)std::ceil((hi - lo) / (1.3 * tp.sg)));
        for (int s = 0; s < ns; ++s) {
            double a = lo + (hi - lo) * s / ns;
            double b = lo + (hi - lo) * (s + 1) / ns;
            segs.emplace_back(a, b);
        }
        hi = lo;
    }
    return segs;
}

// node(base_wgt = w_r w_theta rho, chi, V, inv_d, inv_delta);
// theta_done(w_theta, q_theta) once per angular node.
template <class NodeFn, class ThetaFn>
void polar_sweep(const TwoOrbitConfig& cfg, const CriticalPoint& mp, double dt2,
                 const Taper& tp, const QuadSpec& q, NodeFn&& node, ThetaFn&& theta_done) {
    const GaussRule& gr = gauss_rule(q.gl);
    auto segs = radial_segments(tp, q);
    double wth = TWO_PI / q.n_theta;
    for (int t = 0; t < q.n_theta; ++t) {
        double th = (t + 0.5) * wth;
        double cth = std::cos(th), sth = std::sin(th);
        double qth = mp.A.quad({cth, sth});
        for (const auto& [lo, hi] : segs) {
            double c = 0.5 * (hi + lo), s = 0.5 * (hi - lo);
            for (int g = 0; g < q.gl; ++g) {
                double rho = c + s * gr.x[g];
                double wr = s * gr.w[g];
                Vec2 V{mp.V.u + rho * cth, mp.V.v + rho * sth};
                double d = std::sqrt(d_squared(cfg, V));
                double delta = std::sqrt(dt2 + rho * rho * qth);
                node(wr * wth * rho, tp.chi(rho), V, 1.0 / d, 1.0 / delta);
            }
        }
        theta_done(wth, qth);
    }
}

struct RefinedMin {
    CriticalPoint mp;
    Taper tp;
    int side;
};

// Sided polar value for one minimum: P1 + P2 + K_h (smooth carrier + kink),
// with the disc carrier split as
//   int chi rho/delta = chi0 (sqrt(d~^2 + q R^2) - |d~|)/q + int (chi-chi0) rho/delta
// so the |d~| kink appears only through the closed theta integral of 1/q.
// Also accumulates the analytic sigma derivative.
void polar_value(const TwoOrbitConfig& cfg, const RefinedMin& rm, double sigma, int N,
                 const ResonanceSpec& spec, const QuadSpec& q, double& val, double& dsig) {
    const CriticalPoint& mp = rm.mp;
    double dt = mp.d_tilde;
    double dt2 = dt * dt;
    double detA = mp.A.det();
    if (tangent_degenerate(mp.A))
        throw CrossingDegenerate("extraction metric is degenerate (tangent crossing)");
    double xh = spec.h_ast * mp.V.u + spec.h_pl * mp.V.v - sigma;
    double Kh = dirichlet(N, xh), Khp = dirichlet_deriv(N, xh);
    double chi0 = rm.tp.chi0, R = rm.tp.R;

    KahanAcc P1, P2, P1s, P2s, P3;
    polar_sweep(
        cfg, mp, dt2, rm.tp, q,
        [&](double w, double chi, const Vec2& V, double invd, double invdel) {
            double x = spec.h_ast * V.u + spec.h_pl * V.v - sigma;
            double D, Dp;
            if (N == 0) {
                D = 1.0;
                Dp = 0.0;
            } else {
                Cpx ph{std::cos(0.5 * x), std::sin(0.5 * x)};
                Cpx phb{std::cos((N + 0.5) * x), std::sin((N + 0.5) * x)};
                kernel_from_phasors(N, ph, phb, D, Dp);
            }
            double wc = w * chi;
            P1.add(wc * (invd - invdel) * D);
            P2.add(wc * (D - Kh) * invdel);
            P1s.add(wc * (invd - invdel) * (-Dp));
            P2s.add(wc * (-Dp + Khp) * invdel);
            P3.add(w * (chi - chi0) * invdel);
        },
        [&](double wth, double qth) {
            P3.add(wth * chi0 * std::sqrt(dt2 + qth * R * R) / qth);
        });

    double kink_d = (rm.side == 0) ? std::fabs(dt) : rm.side * dt;
    double carrier = P3.get() - chi0 * TWO_PI / std::sqrt(detA) * kink_d;
    val = P1.get() + P2.get() + Kh * carrier;
    dsig = P1s.get() + P2s.get() - Khp * carrier;
}

double taub(const OrbitShape& s) {
    return s.a() * (1.0 + s.e()) / std::max(0.25, 1.0 - s.e());
}

} // namespace

// ---- Public kernel functions ----------------------------------------------

double dirichlet(int N, double x) {
    if (N < 0) throw ContractViolation("kernel order must be nonnegative");
    if (N == 0) return 1.0;
    double xr = wrap_pm_pi(x);
    if (std::fabs(xr) < KERNEL_SERIES_X) return dirichlet_series(N, xr);
    return std::sin((N + 0.5) * xr) / std::sin(0.5 * xr);
}

double dirichlet_deriv(int N, double x) {
    if (N < 0) throw ContractViolation("kernel order must be nonnegative");
    if (N == 0) return 0.0;
    double xr = wrap_pm_pi(x);
    if (std::fabs(xr) < KERNEL_SERIES_X) return dirichlet_deriv_series(N, xr);
    double sh = std::sin(0.5 * xr), ch = std::cos(0.5 * xr);
    double sb = std::sin((N + 0.5) * xr), cb = std::cos((N + 0.5) * xr);
    return ((N + 0.5) * cb * sh - 0.5 * ch * sb) / (sh * sh);
}

double h0_value(double S, const ResonanceSpec& spec, double S5, double n_pl, double k) {
    double L = spec.h_ast * S;
    double k2 = k * k;
    return -k2 * k2 / (2.0 * L * L) + n_pl * (spec.h_pl * S + S5 / spec.h_ast);
}

double h0_dS(double S, const ResonanceSpec& spec, double n_pl, double k) {
    double h = spec.h_ast;
    double k2 = k * k;
    return k2 * k2 / (h * h * S * S * S) + n_pl * spec.h_pl;
}

int plain_grid_size(const TwoOrbitConfig& cfg, double d_min, const QuadSpec& q) {
    if (d_min <= 0.0) return 0;
    double strip = d_min / (taub(cfg.ast) + taub(cfg.pl));
    double need = 27.0 / strip;
    if (need > q.m_cap) return 0;
    int m = std::max(q.m_far, 32 * (int)std::ceil(need / 32.0));
    return m;
}

double band_activation_distance(const TwoOrbitConfig& cfg, const QuadSpec& q) {
    return 27.0 * (taub(cfg.ast) + taub(cfg.pl)) / (double)q.m_band;
}

PerturbationResult planet_term_plain(const ResonantState& y, const ResonanceSpec& spec,
                                     const OrbitShape& planet, double mu, double sigma,
                                     int N, int m, const QuadSpec& q, bool gradients) {
    OrbitShape ast = shape_from_resonant(y, spec);
    AstTables at = ast_tables(ast, y, spec, sigma, N, m, gradients, GAUSS_K);
    PlTables pt = pl_tables(planet, spec, N, m);

    int nacc = gradients ? 7 : 2; // value, dsigma, then 5 axes
    std::vector<std::vector<double>> rows(nacc, std::vector<double>(m, 0.0));
    parallel_rows(m, q.threads, [&](int i) {
        std::array<KahanAcc, 7> acc{};
        const Vec3& Xi = at.X[i];
        for (int j = 0; j < m; ++j) {
            Vec3 delta = pt.X[j] - Xi;
            double invd = 1.0 / std::sqrt(norm2(delta));
            double f = invd - dot(Xi, pt.ind[j]);
            double D = 1.0, Dp = 0.0;
            if (N > 0)
                kernel_from_phasors(N, cmul(at.half[i], pt.half[j]),
                                    cmul(at.big[i], pt.big[j]), D, Dp);
            acc[0].add(f * D);
            acc[1].add(-f * Dp);
            if (gradients) {
                double invd3 = invd * invd * invd;
                for (int axis = 0; axis < 5; ++axis) {
                    const Vec3& Dv = at.D[i][axis];
                    double fy = dot(delta, Dv) * invd3 - dot(Dv, pt.ind[j]);
                    acc[2 + axis].add(fy * D);
                }
            }
        }
        for (int a = 0; a < nacc; ++a) rows[a][i] = acc[a].get();
    });

    double scale = -mu * GAUSS_K2 / ((double)m * m);
    PerturbationResult out;
    out.value = scale * pairwise_sum(rows[0]);
    out.dsigma = scale * pairwise_sum(rows[1]);
    if (gradients)
        for (int axis = 0; axis < 5; ++axis) out.dy[axis] = scale * pairwise_sum(rows[2 + axis]);
    return out;
}

PerturbationResult planet_term_extracted(const ResonantState& y, const ResonanceSpec& spec,
                                         const OrbitShape& planet, double mu, double sigma,
                                         int N, const QuadSpec& q,
                                         const std::vector<ActiveMinimum>& active,
                                         bool gradients) {
    if (active.empty()) throw ContractViolation("extracted path needs at least one minimum");
    TwoOrbitConfig cfg{shape_from_resonant(y, spec), planet};

    std::vector<RefinedMin> mins;
    for (const auto& a : active) {
        RefinedMin rm;
        rm.mp = refine_critical_point(cfg, a.seed, 1e-13);
        if (rm.mp.morse_index != 0)
            throw NumericalFailure("extraction seed does not refine to a minimum");
        rm.side = a.side;
        mins.push_back(rm);
    }
    for (std::size_t i = 0; i < mins.size(); ++i) {
        double sep = 1e300;
        for (std::size_t j = 0; j < mins.size(); ++j) {
            if (i == j) continue;
            double du = wrap_pm_pi(mins[i].mp.V.u - mins[j].mp.V.u);
            double dv = wrap_pm_pi(mins[i].mp.V.v - mins[j].mp.V.v);
            sep = std::min(sep, std::hypot(du, dv));
        }
        double R_eff = std::min(q.R, 0.45 * sep);
        if (R_eff < 0.2)
            throw BifurcationNearby("extraction discs cannot be separated");
        mins[i].tp.set(R_eff, q.taper_frac);
    }

    std::vector<GeometryGradients> ggs;
    if (gradients)
        for (const auto& rm : mins)
            ggs.push_back(geometry_gradients(y, spec, planet, rm.mp.V));

    // ---- masked tensor part with analytic derivatives ----
    int m = q.m_band;
    AstTables at = ast_tables(cfg.ast, y, spec, sigma, N, m, gradients, GAUSS_K);
    PlTables pt = pl_tables(planet, spec, N, m);
    double step = TWO_PI / m;

    int nacc = gradients ? 7 : 2;
    std::vector<std::vector<double>> rows(nacc, std::vector<double>(m, 0.0));
    parallel_rows(m, q.threads, [&](int i) {
        std::array<KahanAcc, 7> acc{};
        double elli = (i + 0.5) * step;
        const Vec3& Xi = at.X[i];
        for (int j = 0; j < m; ++j) {
            double ellj = (j + 0.5) * step;
            Vec3 delta = pt.X[j] - Xi;
            double invd = 1.0 / std::sqrt(norm2(delta));
            double om = 1.0;
            // mask motion contributions per axis, filled when inside a blend
            std::array<double, 5> mask_dy{};
            for (std::size_t a = 0; a < mins.size(); ++a) {
                const RefinedMin& rm = mins[a];
                double wu = wrap_pm_pi(elli - rm.mp.V.u);
                double wv = wrap_pm_pi(ellj - rm.mp.V.v);
                if (std::fabs(wu) >= rm.tp.R || std::fabs(wv) >= rm.tp.R) continue;
                double rho = std::hypot(wu, wv);
                if (rho >= rm.tp.R) continue;
                om -= rm.tp.chi(rho);
                if (gradients && rho > 0.0) {
                    double cp = rm.tp.chi_prime(rho);
                    double hu = wu / rho, hv = wv / rho;
                    for (int axis = 0; axis < 5; ++axis)
                        mask_dy[axis] +=
                            cp * (hu * ggs[a].dVh[axis].u + hv * ggs[a].dVh[axis].v);
                }
            }
            double D = 1.0, Dp = 0.0;
            if (N > 0)
                kernel_from_phasors(N, cmul(at.half[i], pt.half[j]),
                                    cmul(at.big[i], pt.big[j]), D, Dp);
            double direct = (om > 0.0) ? om * invd : 0.0;
            double f = direct - dot(Xi, pt.ind[j]);
            acc[0].add(f * D);
            acc[1].add(-f * Dp);
            if (gradients) {
                double invd3 = invd * invd * invd;
                for (int axis = 0; axis < 5; ++axis) {
                    const Vec3& Dv = at.D[i][axis];
                    double fy = (om > 0.0 ? om * dot(delta, Dv) * invd3 : 0.0) -
                                dot(Dv, pt.ind[j]) + mask_dy[axis] * invd;
                    acc[2 + axis].add(fy * D);
                }
            }
        }
        for (int a = 0; a < nacc; ++a) rows[a][i] = acc[a].get();
    });

    double outer_val = pairwise_sum(rows[0]) / ((double)m * m);
    double outer_dsig = pairwise_sum(rows[1]) / ((double)m * m);
    std::array<double, 5> outer_dy{};
    if (gradients)
        for (int axis = 0; axis < 5; ++axis)
            outer_dy[axis] = pairwise_sum(rows[2 + axis]) / ((double)m * m);

    // ---- polar pieces and their sided finite differences ----
    const double inv4pi2 = 1.0 / (TWO_PI * TWO_PI);
    double polar_val = 0, polar_dsig = 0;
    std::array<double, 5> polar_dy{};
    for (std::size_t a = 0; a < mins.size(); ++a) {
        double v0, s0;
        polar_value(cfg, mins[a], sigma, N, spec, q, v0, s0);
        polar_val += v0 * inv4pi2;
        polar_dsig += s0 * inv4pi2;
        if (!gradients) continue;

        const double scales[5] = {std::max(std::abs(y.S), y.G), y.G,
                                  std::max(std::abs(y.Z), y.G), 1.0, 1.0};
        for (int axis = 0; axis < 5; ++axis) {
            double h = 1e-6 * scales[axis];
            double vp = 0, vm = 0, sdum = 0;
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                ResonantState yy = y;
                switch (axis) {
                    case 0: yy.S += sgn * h; break;
                    case 1: yy.G += sgn * h; break;
                    case 2: yy.Z += sgn * h; break;
                    case 3: yy.g += sgn * h; break;
                    case 4: yy.z += sgn * h; break;
                }
                TwoOrbitConfig cc{shape_from_resonant(yy, spec), planet};
                RefinedMin rm = mins[a];
                rm.mp = refine_critical_point(cc, mins[a].mp.V, 1e-13);
                if (rm.mp.morse_index != 0 ||
                    std::abs(wrap_pm_pi(rm.mp.V.u - mins[a].mp.V.u)) > 0.3 ||
                    std::abs(wrap_pm_pi(rm.mp.V.v - mins[a].mp.V.v)) > 0.3)
                    throw BifurcationNearby("minimum lost during sided differencing");
                double vv;
                polar_value(cc, rm, sigma, N, spec, q, vv, sdum);
                (sgn < 0 ? vm : vp) = vv;
            }
            polar_dy[axis] += (vp - vm) / (2.0 * h) * inv4pi2;
        }
    }

    double cscale = -mu * GAUSS_K2;
    PerturbationResult out;
    out.value = cscale * (outer_val + polar_val);
    out.dsigma = cscale * (outer_dsig + polar_dsig);
    if (gradients)
        for (int axis = 0; axis < 5; ++axis)
            out.dy[axis] = cscale * (outer_dy[axis] + polar_dy[axis]);
    return out;
}

double disc_average_closed(double d_h, double detA, double r) {
    if (detA <= 0.0) throw CrossingDegenerate("closed form needs a positive definite metric");
    return TWO_PI / std::sqrt(detA) * (std::sqrt(d_h * d_h + r * r) - d_h);
}

double disc_average_quadrature(const CriticalPoint& mp, double r, int n_theta, int panels,
                               int gl) {
    if (tangent_degenerate(mp.A))
        throw CrossingDegenerate("metric disc undefined at a tangent crossing");
    Sym2 B = spd_sqrt(mp.A);
    Sym2 Binv = sym2_inverse(B);
    double jac = 1.0 / std::sqrt(mp.A.det());
    const GaussRule& gr = gauss_rule(gl);
    double wth = TWO_PI / n_theta;
    double sum = 0;
    for (int t = 0; t < n_theta; ++t) {
        double th = (t + 0.5) * wth;
        Vec2 u{std::cos(th), std::sin(th)};
        double hi = r;
        for (int p = 0; p < panels; ++p) {
            double lo = (p == panels - 1) ? 0.0 : hi * 0.5;
            double c = 0.5 * (hi + lo), s = 0.5 * (hi - lo);
            for (int g = 0; g < gl; ++g) {
                double rho = c + s * gr.x[g];
                Vec2 w = Binv.mul({rho * u.u, rho * u.v});
                double delta = std::sqrt(mp.d2 + mp.A.quad(w));
                sum += s * gr.w[g] * wth * rho * jac / delta;
            }
            hi = lo;
        }
    }
    return sum;
}

KernelCoeffs resonant_coeffs(const TwoOrbitConfig& cfg, const ResonanceSpec& spec,
                             const CoeffOpts& opts, const QuadSpec& q) {
    KernelCoeffs out;
    out.Ic.assign(opts.n_max, 0.0);
    out.Is.assign(opts.n_max, 0.0);

    auto minima = critical_points(cfg);
    double d_min = minima.front().d; // minima sorted first, ascending d

    int m = opts.m;
    bool extract = false;
    std::vector<RefinedMin> mins;
    if (m == 0) {
        m = plain_grid_size(cfg, d_min, q);
        if (m == 0) {
            if (!opts.allow_extracted)
                throw NumericalFailure("plain grid cannot resolve this separation");
            extract = true;
            m = q.m_band;
            double thresh =
                27.0 * (taub(cfg.ast) + taub(cfg.pl)) / (double)m;
            for (const auto& p : minima) {
                if (p.morse_index != 0) continue;
                if (p.d < thresh) {
                    RefinedMin rm;
                    rm.mp = p;
                    rm.side = 0; // classical branch
                    mins.push_back(rm);
                }
            }
        }
    }
    if (extract) {
        for (std::size_t i = 0; i < mins.size(); ++i) {
            double sep = 1e300;
            for (std::size_t j = 0; j < mins.size(); ++j) {
                if (i == j) continue;
                double du = wrap_pm_pi(mins[i].mp.V.u - mins[j].mp.V.u);
                double dv = wrap_pm_pi(mins[i].mp.V.v - mins[j].mp.V.v);
                sep = std::min(sep, std::hypot(du, dv));
            }
            double R_eff = std::min(q.R, 0.45 * sep);
            if (R_eff < 0.2)
                throw BifurcationNearby("extraction discs cannot be separated");
            mins[i].tp.set(R_eff, q.taper_frac);
        }
    }

    // tensor part (masked when extracting)
    double step = TWO_PI / m;
    std::vector<Vec3> Xa(m), Xp(m), ind(m);
    std::vector<Cpx> ua(m), up(m);
    for (int i = 0; i < m; ++i) {
        double ell = (i + 0.5) * step;
        Xa[i] = cfg.ast.position(ell);
        double ph = spec.h_ast * ell;
        ua[i] = {std::cos(ph), std::sin(ph)};
    }
    for (int j = 0; j < m; ++j) {
        double ell = (j + 0.5) * step;
        Xp[j] = cfg.pl.position(ell);
        double r3 = std::pow(norm2(Xp[j]), 1.5);
        ind[j] = Xp[j] / r3;
        double ph = spec.h_pl * ell;
        up[j] = {std::cos(ph), std::sin(ph)};
    }
    int nk = opts.n_max;
    std::vector<std::vector<double>> rI0(1, std::vector<double>(m, 0.0));
    std::vector<std::vector<double>> rIc(nk, std::vector<double>(m, 0.0)),
        rIs(nk, std::vector<double>(m, 0.0));
    parallel_rows(m, q.threads, [&](int i) {
        KahanAcc a0;
        std::vector<KahanAcc> ac(nk), as(nk);
        double elli = (i + 0.5) * step;
        for (int j = 0; j < m; ++j) {
            double ellj = (j + 0.5) * step;
            Vec3 delta = Xp[j] - Xa[i];
            double invd = 1.0 / std::sqrt(norm2(delta));
            double om = 1.0;
            if (extract) {
                for (const auto& rm : mins) {
                    double wu = wrap_pm_pi(elli - rm.mp.V.u);
                    double wv = wrap_pm_pi(ellj - rm.mp.V.v);
                    if (std::fabs(wu) >= rm.tp.R || std::fabs(wv) >= rm.tp.R) continue;
                    double rho = std::hypot(wu, wv);
                    if (rho < rm.tp.R) om -= rm.tp.chi(rho);
                }
            }
            double f = (om > 0.0 ? om * invd : 0.0);
            if (opts.indirect) f -= dot(Xa[i], ind[j]);
            a0.add(f);
            Cpx z = cmul(ua[i], up[j]), zp = z;
            for (int n = 0; n < nk; ++n) {
                ac[n].add(f * zp.re);
                as[n].add(f * zp.im);
                zp = cmul(zp, z);
            }
        }
        rI0[0][i] = a0.get();
        for (int n = 0; n < nk; ++n) {
            rIc[n][i] = ac[n].get();
            rIs[n][i] = as[n].get();
        }
    });
    double inv = 1.0 / ((double)m * m);
    out.I0 = pairwise_sum(rI0[0]) * inv;
    for (int n = 0; n < nk; ++n) {
        out.Ic[n] = pairwise_sum(rIc[n]) * inv;
        out.Is[n] = pairwise_sum(rIs[n]) * inv;
    }

    // polar restore per masked minimum, all harmonics in one sweep
    if (extract) {
        const double inv4pi2 = 1.0 / (TWO_PI * TWO_PI);
        for (const auto& rm : mins) {
            const CriticalPoint& mp = rm.mp;
            double dt = mp.d_tilde;
            double dt2 = dt * dt;
            if (tangent_degenerate(mp.A))
                throw CrossingDegenerate("extraction metric is degenerate");
            double phih = spec.h_ast * mp.V.u + spec.h_pl * mp.V.v;
            double chi0 = rm.tp.chi0, R = rm.tp.R;
            std::vector<double> c0(nk + 1, 0.0), s0(nk + 1, 0.0); // P1+P2 moments
            double P3sm = 0;
            polar_sweep(
                cfg, mp, dt2, rm.tp, q,
                [&](double w, double chi, const Vec2& V, double invd, double invdel) {
                    double phi = spec.h_ast * V.u + spec.h_pl * V.v;
                    double wc = w * chi;
                    double p1 = wc * (invd - invdel);
                    P3sm += w * (chi - chi0) * invdel;
                    Cpx z{std::cos(phi), std::sin(phi)}, zp{1, 0};
                    Cpx zh{std::cos(phih), std::sin(phih)}, zhp{1, 0};
                    for (int n = 0; n <= nk; ++n) {
                        c0[n] += p1 * zp.re + wc * (zp.re - zhp.re) * invdel;
                        s0[n] += p1 * zp.im + wc * (zp.im - zhp.im) * invdel;
                        zp = cmul(zp, z);
                        zhp = cmul(zhp, zh);
                    }
                },
                [&](double wth, double qth) {
                    P3sm += wth * chi0 * std::sqrt(dt2 + qth * R * R) / qth;
                });
            double kink_d = (rm.side == 0) ? std::fabs(dt) : rm.side * dt;
            double carrier = P3sm - chi0 * TWO_PI / std::sqrt(mp.A.det()) * kink_d;
            Cpx zh{std::cos(phih), std::sin(phih)}, zhp{1, 0};
            for (int n = 0; n <= nk; ++n) {
                double add_c = (c0[n] + zhp.re * carrier) * inv4pi2;
                double add_s = (s0[n] + zhp.im * carrier) * inv4pi2;
                if (n == 0)
                    out.I0 += add_c;
                else {
                    out.Ic[n - 1] += add_c;
                    out.Is[n - 1] += add_s;
                }
                zhp = cmul(zhp, zh);
            }
        }
    }
    return out;
}

JumpResult crossing_jump(const GeometryGradients& gg, const ResonanceSpec& spec, double mu,
                         double sigma, int N, double k) {
    JumpResult out;
    out.sigma_c = spec.h_ast * gg.base.V.u + spec.h_pl * gg.base.V.v;
    double x = sigma - out.sigma_c;
    double D = dirichlet(N, x), Dp = dirichlet_deriv(N, x);
    double dt = gg.base.d_tilde;
    double isd = gg.inv_sqrt_detA;
    double pref = -mu * k * k / PI;
    for (int i = 0; i < 5; ++i) {
        double dsc = spec.h_ast * gg.dVh[i].u + spec.h_pl * gg.dVh[i].v;
        out.diff[i] = pref * (D * (gg.d_inv_sqrt_detA[i] * dt + isd * gg.dtilde[i]) -
                              dt * isd * Dp * dsc);
    }
    out.dsigma = pref * dt * isd * Dp;
    return out;
}

} // namespace resorb
