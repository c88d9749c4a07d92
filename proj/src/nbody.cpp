#include "resorb/nbody.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "resorb/errors.hpp"
#include "resorb/kepler.hpp"

namespace resorb {

namespace {

constexpr double COLLISION_DIST = 1e-8; // au
constexpr double TWO_PI = 6.28318530717958647692;

// Planet provider with the trajectory shape cached between force evaluations;
// ephemeris shapes drift slowly compared to the integrator step, so the
// perifocal basis is rebuilt only when an element actually changes.
struct PlanetCache {
    std::string name;
    double mu = 0;
    KeplerianElements last{};
    OrbitShape shape;
    bool primed = false;

    Vec3 position(const EphemerisSource& eph, double t) {
        KeplerianElements el = eph.elements(name, t);
        if (!primed || el.a != last.a || el.e != last.e || el.I != last.I ||
            el.Omega != last.Omega || el.omega != last.omega) {
            shape = OrbitShape(el.a, el.e, el.I, el.Omega, el.omega);
            last = el;
            primed = true;
        }
        return shape.position(el.ell);
    }
};

Vec3 acceleration(const Vec3& r, const std::vector<Vec3>& rj,
                  const std::vector<double>& mu) {
    double rn = norm(r);
    if (rn < COLLISION_DIST) throw CollisionError("asteroid reaches the Sun");
    Vec3 a = r * (-GAUSS_K2 / (rn * rn * rn));
    for (size_t j = 0; j < rj.size(); ++j) {
        Vec3 d = rj[j] - r;
        double dn = norm(d);
        if (dn < COLLISION_DIST)
            throw CollisionError("asteroid reaches planet " + std::to_string(j));
        double pn = norm(rj[j]);
        a += (GAUSS_K2 * mu[j]) *
             (d / (dn * dn * dn) - rj[j] / (pn * pn * pn));
    }
    return a;
}

std::vector<PlanetCache> make_caches(const std::vector<std::string>& planets,
                                     const EphemerisSource& eph) {
    std::vector<PlanetCache> pc;
    pc.reserve(planets.size());
    for (const std::string& nm : planets) {
        if (!eph.has(nm))
            throw ConfigError("planet not present in the ephemeris: " + nm);
        PlanetCache c;
        c.name = nm;
        c.mu = eph.mu(nm);
        pc.push_back(std::move(c));
    }
    return pc;
}

Derivative eval_rhs(const CartesianState& y, double t,
                    std::vector<PlanetCache>& pc, const EphemerisSource& eph,
                    std::vector<Vec3>& rj, std::vector<double>& mu) {
    rj.clear();
    mu.clear();
    for (PlanetCache& c : pc) {
        rj.push_back(c.position(eph, t));
        mu.push_back(c.mu);
    }
    return {y.v, acceleration(y.r, rj, mu)};
}

CartesianState axpy(const CartesianState& y, double h, const Derivative& d) {
    return {y.r + h * d.v, y.v + h * d.a};
}

} // namespace

CartesianState cartesian_state(const KeplerianElements& el, double k) {
    OrbitShape sh(el.a, el.e, el.I, el.Omega, el.omega);
    AnomalyState st = sh.at(el.ell);
    double n = k / (el.a * std::sqrt(el.a));
    return {st.X, st.Xl * n};
}

KeplerianElements osculating_elements(const CartesianState& s, double k) {
    double k2 = k * k;
    double rn = norm(s.r);
    if (rn < COLLISION_DIST) throw OutOfRange("osculating state at the origin");
    double energy = 0.5 * norm2(s.v) - k2 / rn;
    if (energy >= 0.0) throw OutOfRange("osculating orbit is not elliptic");
    Vec3 h = cross(s.r, s.v);
    double hn = norm(h);
    if (hn < 1e-12 * k * std::sqrt(rn))
        throw OutOfRange("osculating orbit is rectilinear");
    Vec3 hhat = h / hn;

    KeplerianElements el;
    el.a = -k2 / (2.0 * energy);
    Vec3 evec = cross(s.v, h) / k2 - s.r / rn;
    el.e = norm(evec);
    el.I = std::acos(std::clamp(hhat.z, -1.0, 1.0));

    Vec3 node{-h.y, h.x, 0.0};
    double nn = norm(node);
    Vec3 nhat = nn > 1e-13 * hn ? node / nn : Vec3{1.0, 0.0, 0.0};
    el.Omega = nn > 1e-13 * hn ? std::atan2(nhat.y, nhat.x) : 0.0;
    if (el.Omega < 0) el.Omega += TWO_PI;

    Vec3 ehat = el.e > 1e-13 ? evec / el.e : nhat;
    el.omega = el.e > 1e-13
                   ? std::atan2(dot(cross(nhat, ehat), hhat), dot(nhat, ehat))
                   : 0.0;
    if (el.omega < 0) el.omega += TWO_PI;

    Vec3 rhat = s.r / rn;
    double nu = std::atan2(dot(cross(ehat, rhat), hhat), dot(ehat, rhat));
    double E = std::atan2(std::sqrt(std::fmax(1.0 - el.e * el.e, 0.0)) *
                              std::sin(nu),
                          el.e + std::cos(nu));
    el.ell = E - el.e * std::sin(E);
    return el;
}

Derivative full_rhs(const Vec3& r, const Vec3& v, double t_mjd,
                    const std::vector<std::string>& planets,
                    const EphemerisSource& eph) {
    std::vector<PlanetCache> pc = make_caches(planets, eph);
    std::vector<Vec3> rj;
    std::vector<double> mu;
    return eval_rhs({r, v}, t_mjd, pc, eph, rj, mu);
}

FullTrajectory integrate_full(const CartesianState& y0, double t0, double t1,
                              const FullIntegration& cfg,
                              const EphemerisSource& eph) {
    validate(cfg.spec);
    if (!(cfg.tol > 0) || !(cfg.out_step > 0))
        throw ConfigError("integration tolerance and output step must be positive");
    if (!eph.has(cfg.resonant_planet))
        throw ConfigError("resonant planet not present in the ephemeris: " +
                          cfg.resonant_planet);
    std::vector<PlanetCache> pc = make_caches(cfg.planets, eph);
    std::vector<Vec3> rj;
    std::vector<double> mu;
    auto f = [&](double t, const CartesianState& y) {
        return eval_rhs(y, t, pc, eph, rj, mu);
    };

    // Dormand-Prince 5(4): 5th-order propagating solution, embedded 4th-order
    // error estimate, first-same-as-last.
    static const double A[7][6] = {
        {0, 0, 0, 0, 0, 0},
        {1.0 / 5, 0, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
        {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
         -5103.0 / 18656, 0},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
    };
    static const double C[7] = {0,       1.0 / 5, 3.0 / 10, 4.0 / 5,
                                8.0 / 9, 1.0,     1.0};
    // b - b*: weights of the embedded error estimate
    static const double E[7] = {71.0 / 57600,      0.0,        -71.0 / 16695,
                                71.0 / 1920,       -17253.0 / 339200,
                                22.0 / 525,        -1.0 / 40};

    double dir = t1 >= t0 ? 1.0 : -1.0;
    double span = std::fabs(t1 - t0);
    long n_out = span > 0 ? (long)std::floor(span / cfg.out_step + 1e-9) : 0;

    FullTrajectory out;
    double ell_prev = 0.0;
    bool have_prev = false;
    double t_prev = 0.0;
    auto sample = [&](double t, const CartesianState& y) {
        KeplerianElements el = osculating_elements(y);
        if (have_prev) {
            // continue the unwrapped branch: predict the advance with the
            // two-body mean motion, then pick the nearest 2pi image
            double n = GAUSS_K / (el.a * std::sqrt(el.a));
            double pred = ell_prev + n * (t - t_prev);
            el.ell += TWO_PI * std::round((pred - el.ell) / TWO_PI);
        }
        ell_prev = el.ell;
        t_prev = t;
        have_prev = true;
        double ell_pl = eph.elements(cfg.resonant_planet, t).ell;
        out.t.push_back(t);
        out.rv.push_back(y);
        out.elements.push_back(el);
        out.sigma.push_back(cfg.spec.h_ast * el.ell + cfg.spec.h_pl * ell_pl);
    };

    CartesianState y = y0;
    double t = t0;
    sample(t, y);
    if (span == 0.0) {
        out.end = y;
        return out;
    }

    Derivative k[7];
    k[0] = f(t, y);
    double dt_nat = std::min(cfg.out_step, 4.0); // controller expands quickly
    long io = 1;
    while (dir * (t1 - t) > 1e-9) {
        double tn = io <= n_out ? t0 + dir * (double)io * cfg.out_step : t1;
        if (dir * (t1 - tn) < 0) tn = t1;
        bool clipped = std::fabs(tn - t) < dt_nat;
        double h = dir * (clipped ? std::fabs(tn - t) : dt_nat);

        CartesianState stage;
        for (int i = 1; i < 7; ++i) {
            stage = y;
            for (int j = 0; j < i; ++j)
                stage = axpy(stage, h * A[i][j], k[j]);
            k[i] = f(t + C[i] * h, stage);
        }
        const CartesianState& y1 = stage; // stage 7 uses the b-weights row

        Vec3 er{}, ev{};
        for (int i = 0; i < 7; ++i) {
            er += (h * E[i]) * k[i].v;
            ev += (h * E[i]) * k[i].a;
        }
        // the controller targets tol/64 per step: local truncation errors
        // accumulate over ~1e4..1e5 steps, and the deflation (costing only
        // 64^(1/5) ~ 2.3x in step count) keeps the accumulated drift near the
        // requested relative tolerance over kyr spans
        double tol_loc = cfg.tol / 64.0;
        double rs = std::fmax(norm(y.r), norm(y1.r)) + 1e-6;
        double vs = std::fmax(norm(y.v), norm(y1.v)) + 1e-9;
        double errn = std::fmax(norm(er) / (tol_loc * rs), norm(ev) / (tol_loc * vs));

        double fac = std::clamp(0.9 * std::pow(std::fmax(errn, 1e-10), -0.2),
                                0.2, 5.0);
        if (errn <= 1.0) {
            t = clipped ? tn : t + h;
            y = y1;
            k[0] = k[6];
            ++out.steps;
            if (!clipped) dt_nat *= fac;
            if (clipped && io <= n_out &&
                std::fabs(tn - (t0 + dir * (double)io * cfg.out_step)) < 1e-9) {
                sample(t, y);
                ++io;
            }
        } else {
            ++out.rejected;
            dt_nat = std::fabs(h) * fac;
        }
        if (dt_nat < 1e-8)
            throw NumericalFailure("adaptive step size underflow in the full model");
    }
    out.end = y;
    return out;
}

std::vector<EnsembleMember> ensemble_shifts(const KeplerianElements& base,
                                            const std::vector<double>& planet_ell,
                                            const EnsembleSpec& spec) {
    validate(spec.resonance);
    if (spec.count < 1) throw ContractViolation("ensemble count must be >= 1");
    double ratio = -(double)spec.resonance.h_pl / (double)spec.resonance.h_ast;
    std::vector<EnsembleMember> out;
    out.reserve((size_t)spec.count);
    for (int kk = 0; kk < spec.count; ++kk) {
        EnsembleMember m;
        m.shift = (double)kk * spec.phase_step;
        m.ast = base;
        m.ast.ell = base.ell + ratio * m.shift;
        m.planet_ell = planet_ell;
        for (double& L : m.planet_ell) L += m.shift;
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<FullTrajectory> run_ensemble(const KeplerianElements& base,
                                         double t0, double t1,
                                         const FullIntegration& cfg,
                                         EphemerisSource& eph,
                                         const EnsembleSpec& spec) {
    std::map<std::string, double> saved;
    for (const std::string& nm : cfg.planets) saved[nm] = eph.phase_shift(nm);
    std::vector<double> pl_ell;
    for (const std::string& nm : cfg.planets)
        pl_ell.push_back(eph.elements(nm, t0).ell);
    std::vector<EnsembleMember> members = ensemble_shifts(base, pl_ell, spec);

    std::vector<FullTrajectory> out;
    out.reserve(members.size());
    auto restore = [&] {
        for (const auto& kv : saved) eph.set_phase_shift(kv.first, kv.second);
    };
    try {
        for (const EnsembleMember& m : members) {
            for (const std::string& nm : cfg.planets)
                eph.set_phase_shift(nm, saved[nm] + m.shift);
            out.push_back(integrate_full(cartesian_state(m.ast), t0, t1, cfg, eph));
        }
    } catch (...) {
        restore();
        throw;
    }
    restore();
    return out;
}

EnsembleStats ensemble_stats(const std::vector<FullTrajectory>& members) {
    if (members.empty()) throw ContractViolation("ensemble is empty");
    const std::vector<double>& tg = members[0].t;
    for (const FullTrajectory& m : members) {
        if (m.t.size() != tg.size())
            throw ContractViolation("ensemble series do not share an output grid");
        for (size_t i = 0; i < tg.size(); ++i)
            if (std::fabs(m.t[i] - tg[i]) > 1e-6)
                throw ContractViolation("ensemble series do not share an output grid");
    }

    size_t n = tg.size();
    size_t M = members.size();
    // column order: a, e, I, Omega, omega, sigma; the last three live on the
    // circle and are unwrapped in time, then branch-aligned to member 0
    std::vector<std::array<std::vector<double>, 6>> cols(M);
    for (size_t m = 0; m < M; ++m)
        for (int c = 0; c < 6; ++c) {
            cols[m][c].resize(n);
            for (size_t i = 0; i < n; ++i) {
                const KeplerianElements& el = members[m].elements[i];
                double v[6] = {el.a, el.e, el.I, el.Omega, el.omega,
                               members[m].sigma[i]};
                cols[m][c][i] = v[c];
            }
        }
    for (size_t m = 0; m < M; ++m)
        for (int c = 3; c < 6; ++c) {
            std::vector<double>& x = cols[m][c];
            for (size_t i = 1; i < n; ++i)
                x[i] += TWO_PI * std::round((x[i - 1] - x[i]) / TWO_PI);
            double align = TWO_PI * std::round((cols[0][c][0] - x[0]) / TWO_PI);
            for (double& xv : x) xv += align;
        }

    EnsembleStats st;
    st.t = tg;
    st.mean.resize(n);
    st.stdev.resize(n);
    for (size_t i = 0; i < n; ++i)
        for (int c = 0; c < 6; ++c) {
            double s = 0;
            for (size_t m = 0; m < M; ++m) s += cols[m][c][i];
            double mean = s / (double)M;
            double q = 0;
            for (size_t m = 0; m < M; ++m) {
                double d = cols[m][c][i] - mean;
                q += d * d;
            }
            st.mean[i][c] = mean;
            st.stdev[i][c] = std::sqrt(q / (double)M);
        }
    return st;
}

} // namespace resorb
