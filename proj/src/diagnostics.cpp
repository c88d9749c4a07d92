#include "resorb/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "resorb/constants.hpp"
#include "resorb/errors.hpp"
#include "resorb/quadrature.hpp"

namespace resorb {

namespace {

constexpr double TWO_PI = 6.28318530717958647692;

// h x + h' y = gcd(h, h'), gcd returned positive.
long egcd(long a, long b, long& x, long& y) {
    if (b == 0) {
        x = a >= 0 ? 1 : -1;
        y = 0;
        return std::labs(a);
    }
    long x1, y1;
    long g = egcd(b, a % b, x1, y1);
    x = y1;
    y = x1 - (a / b) * y1;
    return g;
}

// Adaptive bisection with an embedded Gauss pair per panel. tol is absolute
// and is distributed over subintervals proportionally to their length.
//
// Two escapes keep the refinement honest near a close approach of the two
// orbits. First, 1/d is computed from a squared distance built out of
// O(au)-sized coordinates, so its absolute rounding noise grows like f^3;
// once a panel is well inside the peak (peak * length small) no amount of
// splitting can beat that floor and the panel is accepted at the
// conditioning limit. Second, a node value beyond peak_limit means the
// distance fell below the resolvable scale: for 1/d that only happens on
// the crossing set, and the integral there is genuinely divergent.
//
// A panel still failing its local test at the depth cap is kept and its
// error added to a defect budget: for an integrable log-type profile the
// local error is proportional to the panel length, so the local ratio never
// improves while the absolute contribution is already negligible.
class Adaptive1D {
  public:
    Adaptive1D(std::function<double(double)> f, double tol, double span,
               double peak_limit = 0)
        : f_(std::move(f)), tol_(tol), span_(span), peak_limit_(peak_limit) {}

    double integrate(double a, double b) {
        value_ = 0;
        defect_ = 0;
        worst_err_ = 0;
        panel(a, b, 0);
        if (defect_ > tol_) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "adaptive panels stalled near [%.6f, %.6f], "
                          "accumulated defect %.3e beyond %.3e",
                          worst_a_, worst_b_, defect_, tol_);
            throw NumericalFailure(buf);
        }
        return value_;
    }

  private:
    std::function<double(double)> f_;
    double tol_, span_;
    double peak_limit_;
    double value_ = 0;
    double defect_ = 0, worst_err_ = 0, worst_a_ = 0, worst_b_ = 0;
    long evals_ = 0;
    static constexpr int MAX_DEPTH = 42;
    static constexpr double NOISE_C = 1e-15;
    static constexpr long EVAL_BUDGET = 30000000;

    double gl(double a, double b, double& peak) {
        const GaussRule& r = gauss_rule(7);
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double s = 0;
        for (size_t i = 0; i < r.x.size(); ++i) {
            double v = f_(mid + half * r.x[i]);
            peak = std::fmax(peak, std::fabs(v));
            s += r.w[i] * v;
        }
        if (peak_limit_ > 0 && peak > peak_limit_)
            throw DivergentIntegral(
                "averaged kernel: distance along the line falls below the "
                "resolvable scale (crossing set)");
        evals_ += (long)r.x.size();
        if (evals_ > EVAL_BUDGET) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "adaptive refinement budget exhausted near "
                          "[%.6f, %.6f]",
                          a, b);
            throw NumericalFailure(buf);
        }
        return s * half;
    }

    void panel(double a, double b, int depth) {
        double peak = 0;
        double coarse = gl(a, b, peak);
        double m = 0.5 * (a + b);
        double fine = gl(a, m, peak) + gl(m, b, peak);
        double err = std::fabs(fine - coarse);
        if (err <= tol_ * (b - a) / span_ * 0.5) {
            value_ += fine;
            return;
        }
        // conditioning floor (see class comment); the peak*(b-a) gate keeps
        // this from swallowing an unresolved 1/|tau - tau_c| chain, whose
        // sampled peak stays of order 1/length
        if (peak * (b - a) < 0.01 && err <= NOISE_C * peak * peak * peak * (b - a)) {
            value_ += fine;
            return;
        }
        if (depth >= MAX_DEPTH) {
            value_ += fine;
            defect_ += err;
            if (err > worst_err_) {
                worst_err_ = err;
                worst_a_ = a;
                worst_b_ = b;
            }
            return;
        }
        panel(a, m, depth + 1);
        panel(m, b, depth + 1);
    }
};

// beyond this value of 1/d the underlying squared distance is pure rounding
// residue (the coordinates carry ~1e-16 relative error on au scales)
constexpr double KBAR_PEAK_LIMIT = 1e7;

} // namespace

UnimodularChart make_chart(const ResonanceSpec& spec) {
    validate(spec);
    long h = spec.h_ast, hp = spec.h_pl;
    long x, y;
    long g = egcd(h, hp, x, y);
    if (g != 1) throw ContractViolation("resonance vector must be coprime");
    if (h * x + hp * y != 1) {
        x = -x;
        y = -y;
    }
    UnimodularChart c;
    c.spec = spec;
    c.U = {h, hp, -y, x};
    c.Uinv = {x, -hp, y, h};
    return c;
}

double averaged_inverse_distance(double sigma, const TwoOrbitConfig& cfg,
                                 const UnimodularChart& chart, double tol) {
    auto f = [&](double tau) {
        Vec2 V{(double)chart.Uinv[0] * sigma + (double)chart.Uinv[1] * tau,
               (double)chart.Uinv[2] * sigma + (double)chart.Uinv[3] * tau};
        return 1.0 / std::sqrt(d_squared(cfg, V));
    };
    int winding =
        (int)(std::labs(chart.spec.h_ast) + std::labs(chart.spec.h_pl));
    int n0 = 4 * std::max(winding, 2);
    Adaptive1D quad(f, tol * TWO_PI, TWO_PI, KBAR_PEAK_LIMIT);
    double s = 0;
    for (int i = 0; i < n0; ++i) {
        double a = TWO_PI * (double)i / n0;
        double b = TWO_PI * (double)(i + 1) / n0;
        s += quad.integrate(a, b);
    }
    return s / TWO_PI;
}

double partial_sum(double sigma, const TwoOrbitConfig& cfg,
                   const UnimodularChart& chart, int N, PartialSumRoute route,
                   double tol, const QuadSpec& q) {
    if (N < 0) throw ContractViolation("partial sum order must be >= 0");
    if (route == PartialSumRoute::FourierPartialSum) {
        CoeffOpts opts;
        opts.n_max = N;
        opts.indirect = false;
        KernelCoeffs kc = resonant_coeffs(cfg, chart.spec, opts, q);
        double s = kc.I0;
        for (int n = 1; n <= N; ++n)
            s += 2.0 * (kc.Ic[n - 1] * std::cos(n * sigma) +
                        kc.Is[n - 1] * std::sin(n * sigma));
        return s;
    }
    // Dirichlet-weighted integral of the tau-average; the average is computed
    // to a tighter tolerance because the weight reaches 2N+1
    double inner_tol = tol / (8.0 * (N + 1));
    int n0 = 4 * (N + 2);
    CriticalPoint cp = min_distance(cfg);
    if (std::fabs(cp.d_tilde) >= 1e-3) {
        auto f = [&](double st) {
            return dirichlet(N, st - sigma) *
                   averaged_inverse_distance(st, cfg, chart, inner_tol);
        };
        Adaptive1D quad(f, 0.5 * tol * TWO_PI, TWO_PI);
        double s = 0;
        for (int i = 0; i < n0; ++i) {
            double a = sigma + TWO_PI * ((double)i / n0 - 0.5);
            double b = sigma + TWO_PI * ((double)(i + 1) / n0 - 0.5);
            s += quad.integrate(a, b);
        }
        return s / TWO_PI;
    }

    // Near or on the crossing set the average behaves like
    //   -log|2 sin((st - sigma_c)/2)| / (pi sqrt(b22))
    // around the critical value sigma_c (b22 from the chart metric). That
    // part is convolved with the Dirichlet weight in closed form (the log
    // kernel has Fourier coefficients 1/(2n)); the smooth remainder is
    // integrated adaptively outside a small window, and inside the window it
    // is modelled by a Taylor polynomial extrapolated from samples at 1, 2
    // and 4 window widths, paired with exact Dirichlet moments. Without the
    // subtraction the quadrature error of the average near sigma_c, which
    // grows like the conditioning floor 1/(distance to sigma_c)^2, would
    // dominate the result.
    ProtectionBound pb = protection_bound(cp, chart);
    double sc = (double)chart.spec.h_ast * cp.V.u + (double)chart.spec.h_pl * cp.V.v;
    double sB = 1.0 / (M_PI * std::sqrt(pb.b22));
    const double W = 2e-4;
    auto smooth_rest = [&](double st) {
        return averaged_inverse_distance(st, cfg, chart, inner_tol) +
               sB * std::log(std::fabs(2.0 * std::sin(0.5 * (st - sc))));
    };
    auto f = [&](double st) { return dirichlet(N, st - sigma) * smooth_rest(st); };
    Adaptive1D quad(f, 0.5 * tol * TWO_PI, TWO_PI);
    double lo = sc + W, hi = sc + TWO_PI - W;
    double s = 0;
    for (int i = 0; i < n0; ++i) {
        double a = lo + (hi - lo) * (double)i / n0;
        double b = lo + (hi - lo) * (double)(i + 1) / n0;
        s += quad.integrate(a, b);
    }

    // remainder model r(eta) ~ c0 + a1 eta + c2 eta^2 + a3 eta^3 + c4 eta^4
    // from symmetric samples; the strong anisotropy of the chart metric makes
    // the curvature terms large enough to matter at the 1e-7 level
    double rp1 = smooth_rest(sc + W), rm1 = smooth_rest(sc - W);
    double rp2 = smooth_rest(sc + 2.0 * W), rm2 = smooth_rest(sc - 2.0 * W);
    double rp4 = smooth_rest(sc + 4.0 * W), rm4 = smooth_rest(sc - 4.0 * W);
    double e1 = 0.5 * (rp1 + rm1), e2 = 0.5 * (rp2 + rm2), e4 = 0.5 * (rp4 + rm4);
    double o1 = 0.5 * (rp1 - rm1), o2 = 0.5 * (rp2 - rm2);
    double W2 = W * W;
    double c4 = (e4 - 5.0 * e2 + 4.0 * e1) / (180.0 * W2 * W2);
    double c2 = (e2 - e1 - 15.0 * c4 * W2 * W2) / (3.0 * W2);
    double c0 = e1 - c2 * W2 - c4 * W2 * W2;
    double a1 = (8.0 * o1 - o2) / (6.0 * W);
    double a3 = (o2 - 2.0 * o1) / (6.0 * W * W2);

    // exact moments of the Dirichlet weight over the window, and the
    // closed-form convolution of the subtracted log kernel over the torus
    double x0 = sc - sigma;
    double m0 = 2.0 * W, m1 = 0.0, m2 = 2.0 * W * W2 / 3.0, m3 = 0.0,
           m4 = 0.4 * W * W2 * W2;
    double conv = 0;
    for (int n = 1; n <= N; ++n) {
        double nd = n;
        double cn = std::cos(nd * x0), sn = std::sin(nd * x0);
        double cw = std::cos(nd * W), sw = std::sin(nd * W);
        m0 += 4.0 * cn * sw / nd;
        m1 -= 4.0 * sn * (sw - nd * W * cw) / (nd * nd);
        m2 += 4.0 * cn * ((nd * nd * W2 - 2.0) * sw + 2.0 * nd * W * cw) /
              (nd * nd * nd);
        m3 -= 4.0 * sn *
              ((3.0 * W2 / (nd * nd) - 6.0 / (nd * nd * nd * nd)) * sw -
               (W * W2 / nd - 6.0 * W / (nd * nd * nd)) * cw);
        m4 += 4.0 * cn *
              ((W2 * W2 / nd - 12.0 * W2 / (nd * nd * nd) +
                24.0 / (nd * nd * nd * nd * nd)) *
                   sw +
               (4.0 * W * W2 / (nd * nd) - 24.0 * W / (nd * nd * nd * nd)) * cw);
        conv += cn / nd;
    }
    double window = c0 * m0 + a1 * m1 + c2 * m2 + a3 * m3 + c4 * m4;
    return (s + window) / TWO_PI + sB * conv;
}

JumpScan jump_delta_scan(const ResonantState& y, const ResonanceSpec& spec,
                         const OrbitShape& planet, double mu, int y_index,
                         const std::vector<int>& Ns, int m_sigma) {
    if (y_index < 0 || y_index > 4)
        throw OutOfRange("jump scan component index must be in 0..4");
    if (m_sigma < 8) throw ContractViolation("jump scan grid too small");
    TwoOrbitConfig cfg{shape_from_resonant(y, spec), planet};
    CriticalPoint cp = min_distance(cfg);
    GeometryGradients gg = geometry_gradients(y, spec, planet, cp.V);

    JumpScan out;
    out.N = Ns;
    out.sigma_c = spec.h_ast * gg.base.V.u + spec.h_pl * gg.base.V.v;
    out.mass = -2.0 * mu * GAUSS_K2 * gg.inv_sqrt_detA * gg.dtilde[y_index];
    out.sigma.resize(m_sigma);
    for (int j = 0; j < m_sigma; ++j)
        out.sigma[j] =
            out.sigma_c + TWO_PI * (((double)j + 0.5) / m_sigma - 0.5);
    out.profile.assign(Ns.size(), std::vector<double>(m_sigma, 0.0));
    for (size_t iN = 0; iN < Ns.size(); ++iN)
        for (int j = 0; j < m_sigma; ++j) {
            JumpResult jr = crossing_jump(gg, spec, mu, out.sigma[j], Ns[iN]);
            out.profile[iN][j] = jr.diff[y_index];
        }
    return out;
}

ProtectionBound protection_bound(const CriticalPoint& cp,
                                 const UnimodularChart& chart) {
    Vec2 c1{(double)chart.Uinv[0], (double)chart.Uinv[2]};
    Vec2 c2{(double)chart.Uinv[1], (double)chart.Uinv[3]};
    ProtectionBound b;
    b.B = Sym2{cp.A.quad(c1), dot(c1, cp.A.mul(c2)), cp.A.quad(c2)};
    b.b22 = b.B.a22;
    if (!(b.b22 > 0))
        throw CrossingDegenerate("chart metric is not positive on the fast direction");
    b.coeff = cp.A.det() / b.b22;
    return b;
}

} // namespace resorb
