#ifndef RESORB_KEPLER_HPP
#define RESORB_KEPLER_HPP

#include <array>

#include "resorb/constants.hpp"
#include "resorb/elements.hpp"
#include "resorb/vec3.hpp"

namespace resorb {

// Eccentric anomaly E with E - e sin E = M, |residual| < 1e-13,
// E - M in (-pi, pi] (same 2pi branch as M). Requires 0 <= e < 1.
double solve_kepler(double e, double M);

// Position and mean-anomaly derivatives on a fixed Keplerian trajectory.
struct AnomalyState {
    Vec3 X;   // position [au]
    Vec3 Xl;  // dX/dell
    Vec3 Xll; // d2X/dell2
    double E = 0;
};

// Trajectory shape (a, e, I, Omega, omega) with the perifocal basis cached.
class OrbitShape {
  public:
    OrbitShape() = default;
    OrbitShape(double a, double e, double I, double Omega, double omega);
    explicit OrbitShape(const KeplerianElements& el);

    double a() const { return a_; }
    double e() const { return e_; }
    double I() const { return I_; }
    double Omega() const { return Omega_; }
    double omega() const { return omega_; }
    const Vec3& phat() const { return p_; }
    const Vec3& qhat() const { return q_; }
    const Vec3& nhat() const { return n_; } // orbit normal

    AnomalyState at(double ell, bool second_derivative = false) const;
    Vec3 position(double ell) const { return at(ell).X; }

    // dX/d(a, e, I, Omega, omega) at fixed mean anomaly; E from at(ell).
    std::array<Vec3, 5> shape_partials(double ell, double E) const;

  private:
    double a_ = 1, e_ = 0, I_ = 0, Omega_ = 0, omega_ = 0;
    Vec3 p_, q_, n_;      // perifocal basis in the inertial frame
    Vec3 dp_dI_, dq_dI_;  // basis derivatives wrt inclination
    Vec3 dp_dO_, dq_dO_;  // wrt node
    void build_basis();
};

// Shape of the trajectory described by a resonant state (a from S, e from G/L,
// I from Z/G, omega = g, Omega = z).
OrbitShape shape_from_resonant(const ResonantState& y, const ResonanceSpec& spec,
                               double k = GAUSS_K);

// Jacobian d(a, e, I, Omega, omega)/d(S, G, Z, g, z), row-major [shape][y].
// Requires e and sin I bounded away from the chart singularities.
std::array<std::array<double, 5>, 5> shape_jacobian(const ResonantState& y,
                                                    const ResonanceSpec& spec,
                                                    double k = GAUSS_K);

} // namespace resorb

#endif
