#ifndef RESORB_NBODY_HPP
#define RESORB_NBODY_HPP

#include <array>
#include <string>
#include <vector>

#include "resorb/constants.hpp"
#include "resorb/elements.hpp"
#include "resorb/ephemeris.hpp"
#include "resorb/vec3.hpp"

namespace resorb {

// Heliocentric position/velocity [au, au/day].
struct CartesianState {
    Vec3 r, v;
};

// Position and velocity of an elliptic heliocentric state; the velocity uses
// the two-body mean motion k a^(-3/2).
CartesianState cartesian_state(const KeplerianElements& el, double k = GAUSS_K);

// Osculating elements of a bound heliocentric state; ell in (-pi, pi].
// Throws OutOfRange when the state is not elliptic.
KeplerianElements osculating_elements(const CartesianState& s, double k = GAUSS_K);

// First-order form of the restricted problem: the time derivative of (r, v).
struct Derivative {
    Vec3 v, a;
};

// Heliocentric acceleration of a massless asteroid: Sun monopole plus, for
// each listed planet, the direct attraction and the indirect (frame) term.
// Planet positions and mass ratios come from the ephemeris at t_mjd. Any
// separation (Sun-asteroid or planet-asteroid) below 1e-8 au throws
// CollisionError.
Derivative full_rhs(const Vec3& r, const Vec3& v, double t_mjd,
                    const std::vector<std::string>& planets,
                    const EphemerisSource& eph);

// Full-model integration setup. `planets` must exist in the ephemeris;
// `resonant_planet` supplies the second anomaly of the critical combination
// sigma = h_ast ell + h_pl ell_planet.
struct FullIntegration {
    std::vector<std::string> planets;
    std::string resonant_planet;
    ResonanceSpec spec;
    double tol = 1e-10;                     // relative error target per step
    double out_step = 0.5 * DAYS_PER_YEAR;  // output grid spacing [days]
};

struct FullTrajectory {
    std::vector<double> t;                   // uniform output grid [MJD]
    std::vector<CartesianState> rv;          // state on the grid
    std::vector<KeplerianElements> elements; // osculating; ell unwrapped in t
    std::vector<double> sigma;               // critical combination, unwrapped
    CartesianState end;                      // state at t1 exactly
    long steps = 0;                          // accepted / rejected step counts
    long rejected = 0;
};

// Adaptive Dormand-Prince 5(4) embedded pair with proportional step control.
// Steps are clipped to the output grid, so every sample and the endpoint are
// hit exactly. Throws NumericalFailure on step underflow, CollisionError from
// the force evaluation.
FullTrajectory integrate_full(const CartesianState& y0, double t0, double t1,
                              const FullIntegration& cfg,
                              const EphemerisSource& eph);

// Phase-shifted initial conditions for the statistical comparison.
struct EnsembleSpec {
    int count = 64;
    double phase_step = 3.14159265358979323846 / 64.0;
    ResonanceSpec resonance;
};

struct EnsembleMember {
    KeplerianElements ast;          // asteroid elements with compensated ell
    std::vector<double> planet_ell; // shifted planet anomalies
    double shift = 0;               // offset applied to every planet anomaly
};

// Member k shifts every planet anomaly by k*phase_step and the asteroid
// anomaly by -(h_pl/h_ast) k*phase_step, so the critical combination
// h_ast*ell + h_pl*ell_planet is the same for all members.
std::vector<EnsembleMember> ensemble_shifts(const KeplerianElements& base,
                                            const std::vector<double>& planet_ell,
                                            const EnsembleSpec& spec);

// Integrates every member of the shifted family. Planet shifts are applied
// through the ephemeris phase offsets and restored before returning.
std::vector<FullTrajectory> run_ensemble(const KeplerianElements& base,
                                         double t0, double t1,
                                         const FullIntegration& cfg,
                                         EphemerisSource& eph,
                                         const EnsembleSpec& spec);

// Per-time mean and standard deviation over the ensemble of
// (a, e, I, Omega, omega, sigma). The spread of N members is measured with
// the 1/N normalization. Angular components are averaged on the unwrapped
// branch: each series is unwrapped in time and aligned to member 0 at the
// first sample. Throws ContractViolation when the output grids differ.
struct EnsembleStats {
    std::vector<double> t;
    std::vector<std::array<double, 6>> mean, stdev;
};
EnsembleStats ensemble_stats(const std::vector<FullTrajectory>& members);

} // namespace resorb

#endif
