#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "resorb/angles.hpp"
#include "resorb/constants.hpp"
#include "resorb/ephemeris.hpp"
#include "resorb/errors.hpp"

using namespace resorb;

TEST_CASE("builtin model: keplerian-consistent frequencies and epoch values") {
    QuasiPeriodicModel m = builtin_model();
    for (const auto& name : m.names()) {
        KeplerianElements el = m.elements(name, J2000_MJD);
        double n = m.mean_motion(name, J2000_MJD);
        CHECK(std::fabs(n - GAUSS_K * std::pow(el.a, -1.5)) <= 1e-10 * n);
        CHECK(el.e >= 0);
        CHECK(el.e < 1);
    }
    KeplerianElements j0 = m.elements("jupiter", J2000_MJD);
    KeplerianElements j1 = m.elements("jupiter", J2000_MJD + 100.0);
    CHECK(std::fabs(j1.ell - j0.ell - 100.0 * m.mean_motion("jupiter", 0)) < 1e-14);
    CHECK(j1.a == j0.a);
    CHECK(j1.Omega == j0.Omega);
    CHECK_THROWS_AS(m.elements("vulcan", J2000_MJD), ConfigError);
    CHECK_THROWS_AS(default_mu("vulcan"), ConfigError);
}

TEST_CASE("model config file roundtrip and frequency validation") {
    const char* path = "model_test.toml";
    {
        std::ofstream out(path);
        out << "[model]\nepoch_mjd = 57600\n"
            << "[heavy]\na = 5.0\ne = 0.05\ni_deg = 1.5\nOmega_deg = 100.0\n"
            << "omega_deg = 270.0\nell0_deg = 20.0\nmu = 1e-3\n"
            << "g_arcsec_per_yr = 4.25\n";
    }
    QuasiPeriodicModel m = QuasiPeriodicModel::load(path);
    CHECK(m.epoch() == 57600.0);
    CHECK(m.mu("heavy") == 1e-3);
    double n = m.mean_motion("heavy", 0);
    CHECK(std::fabs(n - GAUSS_K * std::pow(5.0, -1.5)) < 1e-18);
    KeplerianElements el = m.elements("heavy", 57600.0 + DAYS_PER_YEAR);
    CHECK(std::fabs(el.omega - deg2rad(270.0) - deg2rad(4.25 / 3600.0)) < 1e-15);

    {
        std::ofstream out(path);
        out << "[bad]\na = 5.0\ne = 0.05\ni_deg = 0\nOmega_deg = 0\nomega_deg = 0\n"
            << "ell0_deg = 0\nmu = 1e-3\nn = 0.0017\n"; // inconsistent with a = 5
    }
    CHECK_THROWS_AS(QuasiPeriodicModel::load(path), ConfigError);
    std::remove(path);
}

TEST_CASE("sampled table matches the model it came from") {
    QuasiPeriodicModel m = builtin_model();
    const double mjd0 = 57600.0;
    const double step = 0.5 * DAYS_PER_YEAR;
    const int rows = 4001; // 2000 years at half-year spacing
    EphemerisTable tab = EphemerisTable::sample(m, {"jupiter", "mars"}, mjd0, step, rows);
    tab.save("eph_test.csv");
    EphemerisTable loaded = EphemerisTable::load("eph_test.csv");
    CHECK(loaded.rows("jupiter") == 4001);
    CHECK(loaded.rows("mars") == 4001);
    CHECK(std::fabs(loaded.t_max() - loaded.t_min() - 2000.0 * DAYS_PER_YEAR) < 1e-6);
    CHECK(loaded.mu("jupiter") == default_mu("jupiter"));

    // Mean anomaly of the model is linear in t, so interpolation is exact
    // (up to a shared 2pi branch) even between the tabulated epochs.
    for (double t : {mjd0, mjd0 + 123.4, mjd0 + 0.37 * step, mjd0 + 1999.0 * DAYS_PER_YEAR}) {
        KeplerianElements a = m.elements("jupiter", t);
        KeplerianElements b = loaded.elements("jupiter", t);
        CHECK(std::fabs(a.a - b.a) < 1e-12);
        CHECK(std::fabs(a.e - b.e) < 1e-12);
        CHECK(std::fabs(wrap_pm_pi(a.ell - b.ell)) < 1e-9);
        CHECK(std::fabs(wrap_pm_pi(a.Omega - b.Omega)) < 1e-12);
    }
    double n_tab = loaded.mean_motion("jupiter", mjd0 + 400.0);
    CHECK(std::fabs(n_tab - m.mean_motion("jupiter", 0)) < 1e-12);

    CHECK_THROWS_AS(loaded.elements("jupiter", mjd0 - 1.0), OutOfRange);
    CHECK_THROWS_AS(loaded.elements("jupiter", loaded.t_max() + 1.0), OutOfRange);

    // Phase-shift overlay moves only the mean anomaly.
    loaded.set_phase_shift("jupiter", 0.25);
    KeplerianElements shifted = loaded.elements("jupiter", mjd0 + 100.0);
    KeplerianElements base = m.elements("jupiter", mjd0 + 100.0);
    CHECK(std::fabs(wrap_pm_pi(shifted.ell - base.ell - 0.25)) < 1e-9);
    CHECK(std::fabs(shifted.a - base.a) < 1e-12);
    std::remove("eph_test.csv");
}

TEST_CASE("table loader rejects malformed input") {
    auto write = [](const char* text) {
        std::ofstream out("eph_bad.csv");
        out << text;
    };
    write("wrong, header\n");
    CHECK_THROWS_AS(EphemerisTable::load("eph_bad.csv"), ParseError);

    write("mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg\n"
          "57600, mars, 1.52, 0.09, 1.8, 49.6, 286.5\n"); // 7 fields
    CHECK_THROWS_AS(EphemerisTable::load("eph_bad.csv"), ParseError);

    write("mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg\n"
          "57600, mars, 1.52, 0.09, 1.8, 49.6, 286.5, 19.4\n"
          "57500, mars, 1.52, 0.09, 1.8, 49.6, 286.5, 30.0\n"); // decreasing epoch
    CHECK_THROWS_AS(EphemerisTable::load("eph_bad.csv"), ParseError);

    write("mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg\n"
          "57600, mars, 1.52, 0.09, 1.8, 49.6, 286.5, 19.4\n"); // single epoch
    CHECK_THROWS_AS(EphemerisTable::load("eph_bad.csv"), ParseError);

    write("mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg\n"
          "57600, xenon, 1.52, 0.09, 1.8, 49.6, 286.5, 19.4\n"
          "57700, xenon, 1.52, 0.09, 1.8, 49.6, 286.5, 30.0\n"); // unknown mu
    CHECK_THROWS_AS(EphemerisTable::load("eph_bad.csv"), ConfigError);
    std::map<std::string, double> mu{{"xenon", 1e-7}};
    EphemerisTable ok = EphemerisTable::load("eph_bad.csv", mu);
    CHECK(ok.mu("xenon") == 1e-7);
    std::remove("eph_bad.csv");
}
