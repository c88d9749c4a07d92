#ifndef RESORB_CONSTANTS_HPP
#define RESORB_CONSTANTS_HPP

namespace resorb {

// Internal units: au, day, radian. Interfaces convert at the boundary.
inline constexpr double GAUSS_K = 0.01720209895; // au^(3/2) / day
inline constexpr double GAUSS_K2 = GAUSS_K * GAUSS_K;
inline constexpr double DAYS_PER_YEAR = 365.25;

// Reference epoch of the built-in planet fixture (J2000.0).
inline constexpr double J2000_MJD = 51544.5;

} // namespace resorb

#endif
