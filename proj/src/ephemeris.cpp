#include "resorb/ephemeris.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resorb/angles.hpp"
#include "resorb/constants.hpp"
#include "resorb/config.hpp"
#include "resorb/errors.hpp"

namespace resorb {

void EphemerisSource::set_phase_shift(const std::string& name, double delta_ell) {
    phase_[name] = delta_ell;
}

double EphemerisSource::phase_shift(const std::string& name) const {
    auto it = phase_.find(name);
    return it == phase_.end() ? 0.0 : it->second;
}

double default_mu(const std::string& name) {
    // Planet/Sun mass ratios (fixture values).
    static const std::map<std::string, double> cat = {
        {"mercury", 1.6601e-7},  {"venus", 2.4478383e-6}, {"earth", 3.0034896e-6},
        {"mars", 3.227151e-7},   {"jupiter", 9.5479194e-4}, {"saturn", 2.858860e-4},
        {"uranus", 4.366244e-5}, {"neptune", 5.151389e-5}};
    auto it = cat.find(name);
    if (it == cat.end())
        throw ConfigError("unknown planet '" + name + "': no default mass ratio, provide mu");
    return it->second;
}

// ---------------------------------------------------------------- table

EphemerisTable EphemerisTable::load(const std::string& path,
                                    const std::map<std::string, double>& mu_overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ephemeris table: " + path);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty ephemeris table", 1);
    ++lineno;
    {
        std::string squashed;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) squashed += c;
        if (squashed != "mjd,planet,a,e,i_deg,Omega_deg,omega_deg,ell_deg")
            throw ParseError("unexpected header '" + line + "'", lineno);
    }
    EphemerisTable tab;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ls, field, ',')) f.push_back(field);
        if (f.size() != 8) throw ParseError("expected 8 fields", lineno);
        auto numf = [&](int i) {
            char* end = nullptr;
            double v = std::strtod(f[i].c_str(), &end);
            while (end && *end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
            if (end == f[i].c_str() || *end != '\0')
                throw ParseError("bad number '" + f[i] + "'", lineno);
            return v;
        };
        std::string name = f[1];
        name.erase(std::remove_if(name.begin(), name.end(),
                                  [](unsigned char c) { return std::isspace(c); }),
                   name.end());
        Series& s = tab.planets_[name];
        double t = numf(0);
        if (!s.t.empty() && t <= s.t.back())
            throw ParseError("epochs not strictly increasing for planet " + name, lineno);
        s.t.push_back(t);
        s.a.push_back(numf(2));
        s.e.push_back(numf(3));
        s.I.push_back(deg2rad(numf(4)));
        auto push_unwrapped = [](std::vector<double>& v, double raw) {
            v.push_back(v.empty() ? raw : unwrap_step(v.back(), raw));
        };
        push_unwrapped(s.Omega, deg2rad(numf(5)));
        push_unwrapped(s.omega, deg2rad(numf(6)));
        push_unwrapped(s.ell, deg2rad(numf(7)));
    }
    if (tab.planets_.empty()) throw ParseError("ephemeris table has no data rows", lineno);
    bool first = true;
    for (auto& [name, s] : tab.planets_) {
        if (s.t.size() < 2)
            throw ParseError("planet " + name + " needs at least two epochs");
        auto it = mu_overrides.find(name);
        s.mu = it != mu_overrides.end() ? it->second : default_mu(name);
        if (first) {
            tab.t_min_ = s.t.front();
            tab.t_max_ = s.t.back();
            first = false;
        } else {
            tab.t_min_ = std::fmax(tab.t_min_, s.t.front());
            tab.t_max_ = std::fmin(tab.t_max_, s.t.back());
        }
    }
    return tab;
}

EphemerisTable EphemerisTable::sample(const EphemerisSource& src,
                                      const std::vector<std::string>& names, double mjd0,
                                      double step_days, int rows) {
    EphemerisTable tab;
    for (const auto& name : names) {
        Series s;
        s.mu = src.mu(name);
        for (int i = 0; i < rows; ++i) {
            double t = mjd0 + i * step_days;
            KeplerianElements el = src.elements(name, t);
            s.t.push_back(t);
            s.a.push_back(el.a);
            s.e.push_back(el.e);
            s.I.push_back(el.I);
            s.Omega.push_back(el.Omega);
            s.omega.push_back(el.omega);
            s.ell.push_back(el.ell);
        }
        tab.planets_[name] = std::move(s);
    }
    tab.t_min_ = mjd0;
    tab.t_max_ = mjd0 + (rows - 1) * step_days;
    return tab;
}

void EphemerisTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write ephemeris table: " + path);
    out << "mjd, planet, a, e, i_deg, Omega_deg, omega_deg, ell_deg\n";
    char buf[320];
    for (const auto& [name, s] : planets_) {
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            std::snprintf(buf, sizeof buf,
                          "%.17g, %s, %.17g, %.17g, %.17g, %.17g, %.17g, %.17g\n",
                          s.t[i], name.c_str(), s.a[i], s.e[i], rad2deg(s.I[i]),
                          rad2deg(wrap_two_pi(s.Omega[i])), rad2deg(wrap_two_pi(s.omega[i])),
                          rad2deg(wrap_two_pi(s.ell[i])));
            out << buf;
        }
    }
}

const EphemerisTable::Series& EphemerisTable::series(const std::string& name) const {
    auto it = planets_.find(name);
    if (it == planets_.end()) throw ConfigError("planet not in ephemeris table: " + name);
    return it->second;
}

std::vector<std::string> EphemerisTable::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : planets_) out.push_back(k);
    return out;
}

bool EphemerisTable::has(const std::string& name) const { return planets_.count(name) != 0; }

double EphemerisTable::mu(const std::string& name) const { return series(name).mu; }

int EphemerisTable::rows(const std::string& name) const {
    return static_cast<int>(series(name).t.size());
}

KeplerianElements EphemerisTable::elements(const std::string& name, double t_mjd) const {
    const Series& s = series(name);
    if (t_mjd < s.t.front() - 1e-9 || t_mjd > s.t.back() + 1e-9)
        throw OutOfRange("time " + std::to_string(t_mjd) + " outside table span for " + name);
    auto hi = std::upper_bound(s.t.begin(), s.t.end(), t_mjd);
    std::size_t i1 = std::min<std::size_t>(
        std::max<std::ptrdiff_t>(hi - s.t.begin(), 1), s.t.size() - 1);
    std::size_t i0 = i1 - 1;
    double w = (t_mjd - s.t[i0]) / (s.t[i1] - s.t[i0]);
    auto lerp = [&](const std::vector<double>& v) { return v[i0] + w * (v[i1] - v[i0]); };
    KeplerianElements el;
    el.a = lerp(s.a);
    el.e = lerp(s.e);
    el.I = lerp(s.I);
    el.Omega = lerp(s.Omega);
    el.omega = lerp(s.omega);
    el.ell = lerp(s.ell) + phase_shift(name);
    return el;
}

double EphemerisTable::mean_motion(const std::string& name, double t_mjd) const {
    const Series& s = series(name);
    if (t_mjd < s.t.front() - 1e-9 || t_mjd > s.t.back() + 1e-9)
        throw OutOfRange("time outside table span for " + name);
    auto hi = std::upper_bound(s.t.begin(), s.t.end(), t_mjd);
    std::size_t i1 = std::min<std::size_t>(
        std::max<std::ptrdiff_t>(hi - s.t.begin(), 1), s.t.size() - 1);
    std::size_t i0 = i1 - 1;
    return (s.ell[i1] - s.ell[i0]) / (s.t[i1] - s.t[i0]);
}

// ---------------------------------------------------------------- model

void QuasiPeriodicModel::add(const std::string& name, const Planet& p_in) {
    Planet p = p_in;
    double n_kepler = GAUSS_K * std::pow(p.a, -1.5);
    if (p.n == 0) {
        p.n = n_kepler;
    } else if (std::fabs(p.n - n_kepler) > 1e-10 * n_kepler) {
        throw ConfigError("planet " + name + ": mean motion inconsistent with a (|n - k a^-3/2| > 1e-10 rel)");
    }
    if (!(p.a > 0) || !(p.e >= 0 && p.e < 1))
        throw ConfigError("planet " + name + ": invalid shape elements");
    for (auto& [nm, q] : planets_)
        if (nm == name) throw ConfigError("duplicate planet " + name);
    planets_.emplace_back(name, p);
}

const QuasiPeriodicModel::Planet& QuasiPeriodicModel::planet(const std::string& name) const {
    for (const auto& [nm, p] : planets_)
        if (nm == name) return p;
    throw ConfigError("planet not in model: " + name);
}

std::vector<std::string> QuasiPeriodicModel::names() const {
    std::vector<std::string> out;
    for (const auto& [nm, p] : planets_) out.push_back(nm);
    return out;
}

bool QuasiPeriodicModel::has(const std::string& name) const {
    for (const auto& [nm, p] : planets_)
        if (nm == name) return true;
    return false;
}

double QuasiPeriodicModel::mu(const std::string& name) const { return planet(name).mu; }

KeplerianElements QuasiPeriodicModel::elements(const std::string& name, double t_mjd) const {
    const Planet& p = planet(name);
    double dt = t_mjd - epoch_;
    KeplerianElements el;
    el.a = p.a;
    el.e = p.e;
    el.I = p.I;
    el.Omega = p.Omega0 + p.s_rate * dt;
    el.omega = p.omega0 + p.g_rate * dt;
    el.ell = p.ell0 + p.n * dt + phase_shift(name);
    return el;
}

double QuasiPeriodicModel::mean_motion(const std::string& name, double) const {
    return planet(name).n;
}

QuasiPeriodicModel QuasiPeriodicModel::load(const std::string& path) {
    TomlTable t = TomlTable::parse_file(path);
    QuasiPeriodicModel m(t.num_or("model.epoch_mjd", J2000_MJD));
    const double arcsec_yr = DEG / 3600.0 / DAYS_PER_YEAR; // to rad/day
    for (const auto& sec : t.sections()) {
        if (sec == "model") continue;
        Planet p;
        p.a = t.num(sec + ".a");
        p.e = t.num(sec + ".e");
        p.I = deg2rad(t.num(sec + ".i_deg"));
        p.Omega0 = deg2rad(t.num(sec + ".Omega_deg"));
        p.omega0 = deg2rad(t.num(sec + ".omega_deg"));
        p.ell0 = deg2rad(t.num(sec + ".ell0_deg"));
        p.n = t.num_or(sec + ".n", 0.0);
        p.g_rate = t.num_or(sec + ".g_arcsec_per_yr", 0.0) * arcsec_yr;
        p.s_rate = t.num_or(sec + ".s_arcsec_per_yr", 0.0) * arcsec_yr;
        p.mu = t.has(sec + ".mu") ? t.num(sec + ".mu") : default_mu(sec);
        m.add(sec, p);
    }
    return m;
}

QuasiPeriodicModel builtin_model() {
    // Nominal J2000 mean elements (fixture data, degrees converted here);
    // omega = pomega - Omega, ell = L - pomega from the standard tabulation.
    QuasiPeriodicModel m(J2000_MJD);
    struct Row {
        const char* name;
        double a, e, i_deg, Omega_deg, omega_deg, ell_deg;
    };
    const Row rows[] = {
        {"venus", 0.72333566, 0.00677672, 3.39467605, 76.67984255, 54.92262463, 50.37663232},
        {"earth", 1.00000261, 0.01671123, 0.00001531, 0.0, 102.93768193, 357.52688973},
        {"mars", 1.52371034, 0.09339410, 1.84969142, 49.55953891, 286.49683150, 19.39019754},
        {"jupiter", 5.20288700, 0.04838624, 1.30439695, 100.47390909, 274.25457074,
         19.66796068},
        {"saturn", 9.53667594, 0.05386179, 2.48599187, 113.66242448, 338.93645383,
         317.35536592},
    };
    for (const Row& r : rows) {
        QuasiPeriodicModel::Planet p;
        p.a = r.a;
        p.e = r.e;
        p.I = deg2rad(r.i_deg);
        p.Omega0 = deg2rad(r.Omega_deg);
        p.omega0 = deg2rad(r.omega_deg);
        p.ell0 = deg2rad(r.ell_deg);
        p.mu = default_mu(r.name);
        m.add(r.name, p);
    }
    return m;
}

} // namespace resorb
