#ifndef RESORB_DIAGNOSTICS_HPP
#define RESORB_DIAGNOSTICS_HPP

#include <array>
#include <vector>

#include "resorb/distance.hpp"
#include "resorb/elements.hpp"
#include "resorb/hamiltonian.hpp"

namespace resorb {

// Unimodular completion of the resonance vector: first row (h, h'), integer
// second row from the extended Euclidean algorithm, det = +1 exactly. The
// integer inverse maps chart coordinates (sigma, tau) back to the anomalies;
// its tau column is (-h', h) so the fast line winds once around the torus.
struct UnimodularChart {
    ResonanceSpec spec;
    std::array<long, 4> U{};    // row-major: h, h', u21, u22
    std::array<long, 4> Uinv{}; // row-major integer inverse, det = +1
};
UnimodularChart make_chart(const ResonanceSpec& spec);

// Average of 1/d over the fast chart variable at fixed sigma: an adaptive
// panelled Gauss-Legendre integral along the line V = Uinv (sigma, tau).
// tol is absolute (the integrand is O(1) per au^-1). Throws DivergentIntegral
// when the line runs into an orbit crossing (the average is +infinity there);
// NumericalFailure with a refinement report when panels stall elsewhere.
double averaged_inverse_distance(double sigma, const TwoOrbitConfig& cfg,
                                 const UnimodularChart& chart, double tol = 1e-9);

// N-truncated resonant sum of 1/d by two independent routes:
//   DirichletOfAverage: 1-D Dirichlet-weighted integral of the tau-average
//   FourierPartialSum:  direct-kernel resonant Fourier coefficients summed
//     with the 2-D quadrature (plain or extracted per the separation)
// The routes agree identically in exact arithmetic; away from a crossing
// phase both converge to the tau-average as N grows.
enum class PartialSumRoute { DirichletOfAverage, FourierPartialSum };
double partial_sum(double sigma, const TwoOrbitConfig& cfg,
                   const UnimodularChart& chart, int N, PartialSumRoute route,
                   double tol = 1e-9, const QuadSpec& q = {});

// Gap between the two one-sided gradient extensions of the N-truncated
// planet term, tabulated over sigma on a midpoint grid centred at the
// crossing phase. As N grows the profile concentrates at sigma_c with total
// mass -2 mu k^2 inv_sqrt(det A) d(d_tilde)/dy_i, which `mass` reports.
struct JumpScan {
    std::vector<double> sigma;
    std::vector<int> N;
    std::vector<std::vector<double>> profile; // [N index][sigma index]
    double mass = 0;
    double sigma_c = 0;
};
JumpScan jump_delta_scan(const ResonantState& y, const ResonanceSpec& spec,
                         const OrbitShape& planet, double mu, int y_index,
                         const std::vector<int>& Ns, int m_sigma = 1024);

// Quadratic collision-protection bound at a minimum: with Z = U (V - V_h)
// the approximated squared distance obeys
//   delta_h^2 >= d_h^2 + coeff (sigma - sigma_c)^2,  coeff = det A / b22,
// where b22 is the tau-tau entry of the chart metric B = Uinv^T A Uinv.
struct ProtectionBound {
    Sym2 B;
    double b22 = 0;
    double coeff = 0;
};
ProtectionBound protection_bound(const CriticalPoint& cp,
                                 const UnimodularChart& chart);

} // namespace resorb

#endif
