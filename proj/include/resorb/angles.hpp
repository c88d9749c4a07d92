#ifndef RESORB_ANGLES_HPP
#define RESORB_ANGLES_HPP

#include <cmath>
#include <numbers>
#include <vector>

namespace resorb {

inline constexpr double TWO_PI = 2.0 * std::numbers::pi;
inline constexpr double PI = std::numbers::pi;
inline constexpr double DEG = std::numbers::pi / 180.0;

// Wrap to (-pi, pi].
inline double wrap_pm_pi(double x) {
    double y = std::remainder(x, TWO_PI);
    if (y <= -PI) y += TWO_PI;
    return y;
}

// Wrap to [0, 2pi).
inline double wrap_two_pi(double x) {
    double y = std::fmod(x, TWO_PI);
    if (y < 0) y += TWO_PI;
    return y;
}

inline double rad2deg(double x) { return x / DEG; }
inline double deg2rad(double x) { return x * DEG; }

// Continuation of a sampled angle series: each value is shifted by a multiple
// of 2pi so consecutive samples differ by less than pi.
inline void unwrap_in_place(std::vector<double>& a) {
    for (std::size_t i = 1; i < a.size(); ++i)
        a[i] = a[i - 1] + wrap_pm_pi(a[i] - a[i - 1]);
}

// Next value of an unwrapped series given the previous unwrapped value.
inline double unwrap_step(double prev, double raw) {
    return prev + wrap_pm_pi(raw - prev);
}

} // namespace resorb

#endif
