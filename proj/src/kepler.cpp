#include "resorb/kepler.hpp"

#include <cmath>
#include <string>

#include "resorb/angles.hpp"
#include "resorb/errors.hpp"

namespace resorb {

namespace {

// Markley (1995) starter, valid for M in [0, pi].
double markley_start(double e, double M) {
    const double pi2 = PI * PI;
    double alpha = (3.0 * pi2 + 1.6 * PI * (PI - M) / (1.0 + e)) / (pi2 - 6.0);
    double d = 3.0 * (1.0 - e) + alpha * e;
    double q = 2.0 * alpha * d * (1.0 - e) - M * M;
    double r = 3.0 * alpha * d * (d - 1.0 + e) * M + M * M * M;
    double w = std::cbrt(std::fabs(r) + std::sqrt(q * q * q + r * r));
    w *= w;
    return (2.0 * r * w / (w * w + w * q + q * q) + M) / d;
}

// E - e sin E = M for M in [0, pi]; strictly monotone residual.
double solve_principal(double e, double M) {
    double E = markley_start(e, M);
    for (int it = 0; it < 12; ++it) {
        double s = std::sin(E), c = std::cos(E);
        double f = E - e * s - M;
        if (std::fabs(f) < 1e-14) return E;
        double fp = 1.0 - e * c;
        // Halley step; falls back to Newton when the correction is large.
        double dn = f / fp;
        double dh = f / (fp - 0.5 * dn * e * s);
        E -= std::fabs(dh) < 1.0 ? dh : dn;
    }
    double s = std::sin(E);
    if (std::fabs(E - e * s - M) < 1e-13) return E;
    // Bisection fallback on the bracket [M - e, M + e].
    double lo = M - e, hi = M + e;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid - e * std::sin(mid) - M <= 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

double solve_kepler(double e, double M) {
    if (!(e >= 0.0 && e < 1.0))
        throw ContractViolation("eccentricity out of [0, 1) in Kepler solver: " +
                                std::to_string(e));
    if (!std::isfinite(M)) throw ContractViolation("non-finite mean anomaly");
    if (e < 1e-15) return M;
    double Mr = wrap_pm_pi(M);
    double branch = M - Mr;
    double E = Mr >= 0 ? solve_principal(e, Mr) : -solve_principal(e, -Mr);
    return E + branch;
}

OrbitShape::OrbitShape(double a, double e, double I, double Omega, double omega)
    : a_(a), e_(e), I_(I), Omega_(Omega), omega_(omega) {
    validate(KeplerianElements{a, e, I, Omega, omega, 0.0});
    build_basis();
}

OrbitShape::OrbitShape(const KeplerianElements& el)
    : OrbitShape(el.a, el.e, el.I, el.Omega, el.omega) {}

void OrbitShape::build_basis() {
    double cO = std::cos(Omega_), sO = std::sin(Omega_);
    double ci = std::cos(I_), si = std::sin(I_);
    double cw = std::cos(omega_), sw = std::sin(omega_);
    p_ = {cO * cw - sO * ci * sw, sO * cw + cO * ci * sw, si * sw};
    q_ = {-cO * sw - sO * ci * cw, -sO * sw + cO * ci * cw, si * cw};
    n_ = {sO * si, -cO * si, ci};
    dp_dI_ = {sO * si * sw, -cO * si * sw, ci * sw};
    dq_dI_ = {sO * si * cw, -cO * si * cw, ci * cw};
    dp_dO_ = {-p_.y, p_.x, 0.0};
    dq_dO_ = {-q_.y, q_.x, 0.0};
}

AnomalyState OrbitShape::at(double ell, bool second_derivative) const {
    AnomalyState st;
    st.E = solve_kepler(e_, ell);
    double cE = std::cos(st.E), sE = std::sin(st.E);
    double b = a_ * std::sqrt(1.0 - e_ * e_);
    double x = a_ * (cE - e_), y = b * sE;
    st.X = x * p_ + y * q_;
    double dEdl = 1.0 / (1.0 - e_ * cE);
    Vec3 dXdE = (-a_ * sE) * p_ + (b * cE) * q_;
    st.Xl = dEdl * dXdE;
    if (second_derivative) {
        Vec3 d2XdE2 = (-a_ * cE) * p_ + (-b * sE) * q_;
        double d2Edl2 = -e_ * sE * dEdl * dEdl * dEdl;
        st.Xll = (dEdl * dEdl) * d2XdE2 + d2Edl2 * dXdE;
    }
    return st;
}

std::array<Vec3, 5> OrbitShape::shape_partials(double ell, double E) const {
    (void)ell;
    double cE = std::cos(E), sE = std::sin(E);
    double ome2 = 1.0 - e_ * e_;
    double rt = std::sqrt(ome2);
    double b = a_ * rt;
    double x = a_ * (cE - e_), y = b * sE;
    Vec3 X = x * p_ + y * q_;
    // dE/de at fixed mean anomaly.
    double dEde = sE / (1.0 - e_ * cE);
    double dxde = a_ * (-sE * dEde - 1.0);
    double dyde = -a_ * e_ / rt * sE + b * cE * dEde;
    std::array<Vec3, 5> d;
    d[0] = X / a_;                                  // d/da
    d[1] = dxde * p_ + dyde * q_;                   // d/de
    d[2] = x * dp_dI_ + y * dq_dI_;                 // d/dI
    d[3] = {-X.y, X.x, 0.0};                        // d/dOmega = z x X
    d[4] = cross(n_, X);                            // d/domega = n x X
    return d;
}

OrbitShape shape_from_resonant(const ResonantState& y, const ResonanceSpec& spec, double k) {
    DelaunayElements d;
    d.L = spec.h_ast * y.S;
    d.G = y.G;
    d.Z = y.Z;
    d.g = y.g;
    d.z = y.z;
    KeplerianElements el = delaunay_to_keplerian(d, k);
    return OrbitShape(el);
}

std::array<std::array<double, 5>, 5> shape_jacobian(const ResonantState& y,
                                                    const ResonanceSpec& spec, double k) {
    double h = spec.h_ast;
    double L = h * y.S, G = y.G, Z = y.Z;
    double ratio = G / L;
    double e2 = 1.0 - ratio * ratio;
    if (e2 < 1e-24)
        throw ContractViolation("shape Jacobian singular at zero eccentricity");
    double e = std::sqrt(e2);
    double cosI = Z / G;
    double sin2I = 1.0 - cosI * cosI;
    if (sin2I < 1e-24)
        throw ContractViolation("shape Jacobian singular at zero inclination");
    double sinI = std::sqrt(sin2I);
    std::array<std::array<double, 5>, 5> J{};
    J[0][0] = 2.0 * L * h / (k * k);          // da/dS
    J[1][0] = h * G * G / (e * L * L * L);    // de/dS
    J[1][1] = -G / (e * L * L);               // de/dG
    J[2][1] = Z / (G * G * sinI);             // dI/dG
    J[2][2] = -1.0 / (G * sinI);              // dI/dZ
    J[3][4] = 1.0;                            // dOmega/dz
    J[4][3] = 1.0;                            // domega/dg
    return J;
}

} // namespace resorb
