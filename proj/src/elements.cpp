#include "resorb/elements.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "resorb/angles.hpp"
#include "resorb/errors.hpp"

namespace resorb {

void validate(const KeplerianElements& el) {
    if (!(el.a > 0))
        throw ContractViolation("semi-major axis must be positive, got " + std::to_string(el.a));
    if (!(el.e >= 0 && el.e < 1))
        throw ContractViolation("eccentricity must lie in [0, 1), got " + std::to_string(el.e));
    if (!std::isfinite(el.I) || !std::isfinite(el.Omega) || !std::isfinite(el.omega) ||
        !std::isfinite(el.ell))
        throw ContractViolation("non-finite angle in orbital elements");
}

void validate(const ResonanceSpec& spec) {
    if (spec.h_ast < 1) throw ContractViolation("resonance coefficient h_ast must be >= 1");
    if (spec.h_pl == 0) throw ContractViolation("resonance coefficient h_pl must be nonzero");
    if (std::gcd(spec.h_ast, std::abs(spec.h_pl)) != 1)
        throw ContractViolation("resonance coefficients must be coprime");
}

DelaunayElements keplerian_to_delaunay(const KeplerianElements& el, double k) {
    validate(el);
    DelaunayElements d;
    d.L = k * std::sqrt(el.a);
    d.G = d.L * std::sqrt(1.0 - el.e * el.e);
    d.Z = d.G * std::cos(el.I);
    d.ell = el.ell;
    d.g = el.omega;
    d.z = el.Omega;
    return d;
}

KeplerianElements delaunay_to_keplerian(const DelaunayElements& d, double k) {
    if (!(d.L > 0) || !(d.G > 0) || d.G > d.L * (1 + 1e-14) || std::fabs(d.Z) > d.G * (1 + 1e-14))
        throw ContractViolation("Delaunay actions must satisfy L >= G >= |Z| > 0");
    KeplerianElements el;
    el.a = (d.L / k) * (d.L / k);
    double ratio = std::fmin(d.G / d.L, 1.0);
    el.e = std::sqrt(std::fmax(1.0 - ratio * ratio, 0.0));
    el.I = std::acos(std::fmax(-1.0, std::fmin(1.0, d.Z / d.G)));
    el.ell = d.ell;
    el.omega = d.g;
    el.Omega = d.z;
    return el;
}

Mat2 resonant_angle_matrix(const ResonanceSpec& spec) {
    double h = spec.h_ast, hp = spec.h_pl;
    return {h, hp, 0.0, 1.0 / h};
}

Mat2 resonant_action_matrix(const ResonanceSpec& spec) {
    double h = spec.h_ast, hp = spec.h_pl;
    return {1.0 / h, 0.0, -hp, h};
}

ResonantState delaunay_to_resonant(const DelaunayElements& d, double ell_pl,
                                   const ResonanceSpec& spec) {
    validate(spec);
    ResonantState r;
    r.S = d.L / spec.h_ast;
    r.G = d.G;
    r.Z = d.Z;
    r.sigma = spec.h_ast * d.ell + spec.h_pl * ell_pl;
    r.g = d.g;
    r.z = d.z;
    return r;
}

DelaunayElements resonant_to_delaunay(const ResonantState& r, double ell_pl,
                                      const ResonanceSpec& spec) {
    validate(spec);
    DelaunayElements d;
    d.L = spec.h_ast * r.S;
    d.G = r.G;
    d.Z = r.Z;
    d.ell = (r.sigma - spec.h_pl * ell_pl) / spec.h_ast;
    d.g = r.g;
    d.z = r.z;
    return d;
}

double s5_constant(double L, double L_pl, const ResonanceSpec& spec) {
    return -double(spec.h_pl) * L + double(spec.h_ast) * L_pl;
}

} // namespace resorb
