#ifndef RESORB_EPHEMERIS_HPP
#define RESORB_EPHEMERIS_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "resorb/elements.hpp"

namespace resorb {

// Planet orbital-element provider. Times are MJD; angles radians; a in au.
// Mean anomalies are returned unwrapped (monotone in t), so resonant
// combinations can be formed without branch bookkeeping.
class EphemerisSource {
  public:
    virtual ~EphemerisSource() = default;

    virtual std::vector<std::string> names() const = 0;
    virtual bool has(const std::string& name) const = 0;
    virtual double mu(const std::string& name) const = 0;
    virtual KeplerianElements elements(const std::string& name, double t_mjd) const = 0;
    virtual double mean_motion(const std::string& name, double t_mjd) const = 0;

    // Additive mean-anomaly offset (ensemble phase shifts).
    void set_phase_shift(const std::string& name, double delta_ell);
    double phase_shift(const std::string& name) const;

  protected:
    std::map<std::string, double> phase_;
};

// Standard mass ratio (planet/Sun) fixture values; throws on unknown name.
double default_mu(const std::string& name);

// Per-planet series at shared or unshared epochs; linear interpolation with
// unwrapped angles. No extrapolation outside the tabulated span.
class EphemerisTable : public EphemerisSource {
  public:
    // CSV columns: mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg.
    // mu per planet from `mu_overrides` or the default catalog.
    static EphemerisTable load(const std::string& path,
                               const std::map<std::string, double>& mu_overrides = {});

    // Sample another source onto a uniform grid (used to build fixture files).
    static EphemerisTable sample(const EphemerisSource& src,
                                 const std::vector<std::string>& names, double mjd0,
                                 double step_days, int rows);

    void save(const std::string& path) const;

    std::vector<std::string> names() const override;
    bool has(const std::string& name) const override;
    double mu(const std::string& name) const override;
    KeplerianElements elements(const std::string& name, double t_mjd) const override;
    double mean_motion(const std::string& name, double t_mjd) const override;

    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    int rows(const std::string& name) const;

  private:
    struct Series {
        std::vector<double> t, a, e, I, Omega, omega, ell; // angles unwrapped
        double mu = 0;
    };
    std::map<std::string, Series> planets_;
    double t_min_ = 0, t_max_ = 0;
    const Series& series(const std::string& name) const;
};

// Fixed shapes, uniformly advancing angles: ell = ell0 + n (t - epoch),
// omega and Omega precess at the slow secular rates.
class QuasiPeriodicModel : public EphemerisSource {
  public:
    struct Planet {
        double a = 1, e = 0, I = 0;
        double Omega0 = 0, omega0 = 0, ell0 = 0; // at the model epoch
        double n = 0;                            // rad/day, must match a
        double g_rate = 0, s_rate = 0;           // rad/day apsidal / nodal drift
        double mu = 0;
    };

    QuasiPeriodicModel() = default;
    explicit QuasiPeriodicModel(double epoch_mjd) : epoch_(epoch_mjd) {}

    // Model config file: [model] epoch_mjd, then one section per planet with
    // a, e, i_deg, Omega_deg, omega_deg, ell0_deg, mu and optional
    // g_arcsec_per_yr, s_arcsec_per_yr, n (rad/day).
    static QuasiPeriodicModel load(const std::string& path);

    void add(const std::string& name, const Planet& p); // validates n vs a
    double epoch() const { return epoch_; }

    std::vector<std::string> names() const override;
    bool has(const std::string& name) const override;
    double mu(const std::string& name) const override;
    KeplerianElements elements(const std::string& name, double t_mjd) const override;
    double mean_motion(const std::string& name, double t_mjd) const override;

  private:
    double epoch_ = 51544.5;
    std::vector<std::pair<std::string, Planet>> planets_;
    const Planet& planet(const std::string& name) const;
};

// Nominal J2000 elements for venus..saturn (fixture data, not an ephemeris of
// record) with Keplerian-consistent mean motions and zero secular rates.
QuasiPeriodicModel builtin_model();

} // namespace resorb

#endif
