#ifndef RESORB_HAMILTONIAN_HPP
#define RESORB_HAMILTONIAN_HPP

#include <array>
#include <vector>

#include "resorb/distance.hpp"
#include "resorb/elements.hpp"
#include "resorb/kepler.hpp"

namespace resorb {

// Dirichlet kernel D_N(x) = sin((N+1/2)x)/sin(x/2); D_0 = 1, D_N(0) = 2N+1.
// The resonant harmonics of a planet term sum to a single D_N weight:
// 1 + 2 sum_{n<=N} cos(nx) = D_N(x).
double dirichlet(int N, double x);
double dirichlet_deriv(int N, double x);

// Kepler part: -k^4/(2 (h S)^2) + n_pl (h' S + S5/h), with resonance integers
// h = spec.h_ast, h' = spec.h_pl and the partner mean motion n_pl [rad/day].
double h0_value(double S, const ResonanceSpec& spec, double S5, double n_pl,
                double k = GAUSS_K);
double h0_dS(double S, const ResonanceSpec& spec, double n_pl, double k = GAUSS_K);

// One planet's contribution -mu k^2 (2pi)^-2 integral f . D_N(phi - sigma)
// over both mean anomalies, f = 1/d - X.X'/|X'|^3, phi = h ell + h' ell'.
// N = 0 is the plain average (non-resonant planet). dy orders (S, G, Z, g, z).
struct PerturbationResult {
    double value = 0;
    std::array<double, 5> dy{};
    double dsigma = 0;
};

struct QuadSpec {
    int m_far = 192;            // tensor grid, far regime
    int m_cap = 640;            // largest plain grid before extraction takes over
    int m_band = 512;           // tensor grid under the extracted path
    int n_theta = 128;          // polar angular nodes
    int panels = 22;            // geometric radial panels
    int gl = 6;                 // Gauss order per radial panel
    double R = 0.45;              // mask outer radius, wrapped-anomaly metric [rad]
    double taper_frac = 1.0 / 15.0; // erfc taper width as a fraction of R
    int threads = 1;
};

// Tensor grid size for the plain path at separation d_min, or 0 when the
// analyticity strip is too thin for q.m_cap (use the extracted path).
int plain_grid_size(const TwoOrbitConfig& cfg, double d_min, const QuadSpec& q);

// Minima closer than this must be masked off the band grid and handled by
// the polar extraction; same strip estimate as plain_grid_size at m_band.
double band_activation_distance(const TwoOrbitConfig& cfg, const QuadSpec& q);

PerturbationResult planet_term_plain(const ResonantState& y, const ResonanceSpec& spec,
                                     const OrbitShape& planet, double mu, double sigma,
                                     int N, int m, const QuadSpec& q, bool gradients);

// A minimum handled by the extraction. side = +1 selects the branch smooth
// from d_tilde > 0, side = -1 the other one; the classical value corresponds
// to side = sign(d_tilde).
struct ActiveMinimum {
    Vec2 seed;
    int side = +1;
};

PerturbationResult planet_term_extracted(const ResonantState& y, const ResonanceSpec& spec,
                                         const OrbitShape& planet, double mu, double sigma,
                                         int N, const QuadSpec& q,
                                         const std::vector<ActiveMinimum>& active,
                                         bool gradients);

// Average of 1/delta_h over the metric disc w.A w <= r^2:
// (2 pi / sqrt(det A)) (sqrt(d_h^2 + r^2) - d_h).
double disc_average_closed(double d_h, double detA, double r);
// Same by panelled polar quadrature with delta evaluated from its definition.
double disc_average_quadrature(const CriticalPoint& mp, double r, int n_theta, int panels,
                               int gl);

// Fourier moments of the kernel: I0 = (2pi)^-2 integral f, and the
// cos/sin(n phi) moments for n = 1..n_max (Ic[n-1], Is[n-1]).
struct KernelCoeffs {
    double I0 = 0;
    std::vector<double> Ic, Is;
};

struct CoeffOpts {
    int n_max = 10;
    bool indirect = true;
    int m = 0;                  // 0: pick from the separation; else forced grid
    bool allow_extracted = true;
};

KernelCoeffs resonant_coeffs(const TwoOrbitConfig& cfg, const ResonanceSpec& spec,
                             const CoeffOpts& opts, const QuadSpec& q = {});

// Jump of the planet-term gradient across the crossing set (minus-side
// extension minus plus-side extension), from local geometry alone:
// diff_i = -(mu k^2/pi) [ D_N(sigma - sigma_c) d(d~/sqrt(det A))/dy_i
//                         + (d~/sqrt(det A)) dD_N/dy_i ].
struct JumpResult {
    std::array<double, 5> diff{}; // jumps of d(term)/d(S, G, Z, g, z)
    double dsigma = 0;            // jump of d(term)/d(sigma), O(d~) near crossing
    double sigma_c = 0;           // crossing phase h v_h + h' v'_h
};

JumpResult crossing_jump(const GeometryGradients& gg, const ResonanceSpec& spec, double mu,
                         double sigma, int N, double k = GAUSS_K);

} // namespace resorb

#endif
