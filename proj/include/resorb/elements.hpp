#ifndef RESORB_ELEMENTS_HPP
#define RESORB_ELEMENTS_HPP

#include "resorb/vec3.hpp"

namespace resorb {

struct KeplerianElements {
    double a = 0;     // semi-major axis [au]
    double e = 0;     // eccentricity
    double I = 0;     // inclination [rad]
    double Omega = 0; // longitude of node [rad]
    double omega = 0; // argument of perihelion [rad]
    double ell = 0;   // mean anomaly [rad]
};

// L = k sqrt(a), G = L sqrt(1-e^2), Z = G cos I; angles ell, g = omega, z = Omega.
struct DelaunayElements {
    double L = 0, G = 0, Z = 0;
    double ell = 0, g = 0, z = 0;
};

// Mean motion resonance h_ast * n + h_pl * n_pl ~ 0; gcd(|h_ast|, |h_pl|) = 1.
struct ResonanceSpec {
    int h_ast = 1;  // coefficient of the asteroid mean anomaly, >= 1
    int h_pl = -1;  // coefficient of the resonant planet mean anomaly
};

// Resonant chart: sigma = h_ast*ell + h_pl*ell_pl, S = L/h_ast.
// S5 = -h_pl*L + h_ast*L_pl is a constant parameter of the normal form.
struct ResonantState {
    double S = 0, G = 0, Z = 0;
    double sigma = 0, g = 0, z = 0;
};

void validate(const KeplerianElements& el);
void validate(const ResonanceSpec& spec);

DelaunayElements keplerian_to_delaunay(const KeplerianElements& el, double k);
KeplerianElements delaunay_to_keplerian(const DelaunayElements& d, double k);

// Angle block of the chart: (sigma, sigma_pl)^T = A (ell, ell_pl)^T.
Mat2 resonant_angle_matrix(const ResonanceSpec& spec);
// Action block: (S, S5)^T = A^(-T) (L, L_pl)^T.
Mat2 resonant_action_matrix(const ResonanceSpec& spec);

ResonantState delaunay_to_resonant(const DelaunayElements& d, double ell_pl,
                                   const ResonanceSpec& spec);
DelaunayElements resonant_to_delaunay(const ResonantState& r, double ell_pl,
                                      const ResonanceSpec& spec);

// The conserved combination, for states where the planet action is tracked.
double s5_constant(double L, double L_pl, const ResonanceSpec& spec);

} // namespace resorb

#endif
