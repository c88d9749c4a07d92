#ifndef RESORB_DISTANCE_HPP
#define RESORB_DISTANCE_HPP

#include <vector>

#include "resorb/kepler.hpp"
#include "resorb/vec3.hpp"

namespace resorb {

// Pair of confocal trajectories; V = (v, v') are the two mean anomalies.
struct TwoOrbitConfig {
    OrbitShape ast, pl;
};

struct CriticalPoint {
    Vec2 V;               // anomalies wrapped to [0, 2pi)
    double d2 = 0;        // squared distance at the point
    double d = 0;         // distance
    double d_tilde = 0;   // signed distance (minima with well-defined sign)
    bool signed_ok = true;
    Sym2 A;               // half Hessian of d^2 (the local metric)
    int morse_index = 0;  // negative eigenvalues of the Hessian
    bool degenerate = false; // det A below the tangent-crossing threshold
};

struct CriticalPointOptions {
    int seed_grid = 64;
    double newton_tol = 1e-12; // step-size convergence, radians
    double dedup_tol = 1e-7;
    int max_points = 24;       // beyond this the set is treated as a continuum
};

// Squared distance and its anomaly derivatives at V.
double d_squared(const TwoOrbitConfig& cfg, const Vec2& V);
Vec2 d_squared_gradient(const TwoOrbitConfig& cfg, const Vec2& V);

// Half Hessian of d^2 at V (equals the local quadratic form at a critical point).
Sym2 a_matrix(const TwoOrbitConfig& cfg, const Vec2& V);

// det A < 1e-12 trace^2: tangent crossing, the quadratic model degenerates.
bool tangent_degenerate(const Sym2& A);

// Signed distance at a minimum: (unit(tau' x tau)) . (X' - X).
// Throws SmoothingFails when the tangents are parallel (|sin| < 1e-8).
double signed_distance(const TwoOrbitConfig& cfg, const Vec2& V);

// All critical points of d^2 on the torus, Morse-classified. Minima first
// (ascending d, ties by v), then saddles, then maxima. Throws DegenerateConfig
// when the critical set is a continuum (e.g. concentric coplanar circles).
std::vector<CriticalPoint> critical_points(const TwoOrbitConfig& cfg,
                                           const CriticalPointOptions& opts = {});

// Newton from a seed; fills the full record. Throws NumericalFailure if the
// iteration leaves the seed's basin entirely (no convergence).
CriticalPoint refine_critical_point(const TwoOrbitConfig& cfg, const Vec2& seed,
                                    double newton_tol = 1e-12);

// Global minimum record (smallest d, ties by v).
CriticalPoint min_distance(const TwoOrbitConfig& cfg,
                           const CriticalPointOptions& opts = {});

// Approximated distance sqrt(d_h^2 + (V - V_h) . A (V - V_h)); the difference
// V - V_h is wrapped componentwise to (-pi, pi].
double delta_h(const CriticalPoint& mp, const Vec2& V);

// Derivatives of the minimum geometry with respect to the resonant elements
// y = (S, G, Z, g, z) at fixed planet shape. Central differences with a warm
// Newton re-solve per displaced configuration, Richardson-extrapolated.
struct GeometryGradients {
    double dtilde[5] = {0, 0, 0, 0, 0};         // d(d_tilde)/dy
    Vec2 dVh[5];                                // dV_h/dy
    double inv_sqrt_detA = 0;                   // 1/sqrt(det A_h) at the base
    double d_inv_sqrt_detA[5] = {0, 0, 0, 0, 0};
    CriticalPoint base;
};

GeometryGradients geometry_gradients(const ResonantState& y, const ResonanceSpec& spec,
                                     const OrbitShape& planet, const Vec2& seed_Vh,
                                     double k = GAUSS_K, double rel_step = 1e-6);

} // namespace resorb

#endif
