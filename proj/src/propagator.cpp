#include "resorb/propagator.hpp"

#include <algorithm>
#include <cmath>

#include "resorb/angles.hpp"
#include "resorb/errors.hpp"

namespace resorb {

namespace {

// Raised only by the stage iteration itself, so the halving loop cannot
// swallow genuine evaluation failures coming from the field.
struct StageStall : NumericalFailure {
    using NumericalFailure::NumericalFailure;
};

struct Tableau {
    int s = 2;
    double c[3] = {0, 0, 0};
    double a[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double b[3] = {0, 0, 0};
};

Tableau gauss_tableau(int s) {
    Tableau tb;
    tb.s = s;
    if (s == 2) {
        double r = std::sqrt(3.0) / 6.0;
        tb.c[0] = 0.5 - r;
        tb.c[1] = 0.5 + r;
        tb.a[0][0] = 0.25;
        tb.a[0][1] = 0.25 - r;
        tb.a[1][0] = 0.25 + r;
        tb.a[1][1] = 0.25;
        tb.b[0] = tb.b[1] = 0.5;
    } else if (s == 3) {
        double r = std::sqrt(15.0);
        tb.c[0] = 0.5 - r / 10.0;
        tb.c[1] = 0.5;
        tb.c[2] = 0.5 + r / 10.0;
        tb.a[0][0] = 5.0 / 36.0;
        tb.a[0][1] = 2.0 / 9.0 - r / 15.0;
        tb.a[0][2] = 5.0 / 36.0 - r / 30.0;
        tb.a[1][0] = 5.0 / 36.0 + r / 24.0;
        tb.a[1][1] = 2.0 / 9.0;
        tb.a[1][2] = 5.0 / 36.0 - r / 24.0;
        tb.a[2][0] = 5.0 / 36.0 + r / 30.0;
        tb.a[2][1] = 2.0 / 9.0 + r / 15.0;
        tb.a[2][2] = 5.0 / 36.0;
        tb.b[0] = tb.b[2] = 5.0 / 18.0;
        tb.b[1] = 4.0 / 9.0;
    } else {
        throw ContractViolation("collocation supports 2 or 3 stages");
    }
    return tb;
}

// Lagrange basis on the stage abscissae: val[i] = L_i(th) and
// integ[i] = int_0^th L_i. Valid for any th, including extrapolation.
void lagrange_basis(const Tableau& tb, double th, double* integ, double* val) {
    for (int i = 0; i < tb.s; ++i) {
        double p[4] = {1, 0, 0, 0};
        int deg = 0;
        double den = 1.0;
        for (int j = 0; j < tb.s; ++j) {
            if (j == i) continue;
            den *= tb.c[i] - tb.c[j];
            double q[4] = {0, 0, 0, 0};
            for (int m = 0; m <= deg; ++m) {
                q[m + 1] += p[m];
                q[m] -= tb.c[j] * p[m];
            }
            ++deg;
            for (int m = 0; m <= deg; ++m) p[m] = q[m];
        }
        double v = 0.0, w = 0.0, pw = 1.0;
        for (int m = 0; m <= deg; ++m) {
            v += p[m] * pw;
            w += p[m] * pw * th / (m + 1);
            pw *= th;
        }
        val[i] = v / den;
        integ[i] = w / den;
    }
}

StageData step_with_halving(const FieldFn& f, double t, const Y6& y, double dt,
                            const StepControls& c, const std::array<Y6, 3>* guess) {
    double d = dt;
    for (int tries = 0; tries < 13; ++tries) {
        try {
            return collocation_stages(f, t, y, d, c, guess);
        } catch (const StageStall&) {
            d *= 0.5;
        }
    }
    throw NumericalFailure("stage iteration kept stalling after 12 step halvings");
}

} // namespace

Y6 to_y6(const ResonantState& y) { return {y.S, y.sigma, y.G, y.g, y.Z, y.z}; }

ResonantState from_y6(const Y6& v) {
    ResonantState y;
    y.S = v[0];
    y.sigma = v[1];
    y.G = v[2];
    y.g = v[3];
    y.Z = v[4];
    y.z = v[5];
    return y;
}

StageData collocation_stages(const FieldFn& f, double t, const Y6& y, double dt,
                             const StepControls& c, const std::array<Y6, 3>* guess) {
    Tableau tb = gauss_tableau(c.stages);
    StageData st;
    st.t0 = t;
    st.dt = dt;
    st.y0 = y;
    st.s = tb.s;
    if (guess) {
        st.g = *guess;
    } else {
        Y6 f0 = f(t, y);
        for (int i = 0; i < tb.s; ++i) st.g[i] = f0;
    }
    double adt = std::fabs(dt);
    for (int iter = 0; iter < c.fp_max_iter; ++iter) {
        double delta = 0.0;
        for (int i = 0; i < tb.s; ++i) {
            Y6 yi;
            for (int k = 0; k < 6; ++k) {
                double acc = 0.0;
                for (int j = 0; j < tb.s; ++j) acc += tb.a[i][j] * st.g[j][k];
                yi[k] = y[k] + dt * acc;
            }
            Y6 gi = f(t + tb.c[i] * dt, yi);
            for (int k = 0; k < 6; ++k) {
                delta = std::max(delta, std::fabs(gi[k] - st.g[i][k]) * adt / c.scale[k]);
                st.g[i][k] = gi[k];
            }
        }
        if (delta < c.fp_tol) return st;
    }
    throw StageStall("implicit stage iteration did not reach tolerance");
}

Y6 step_endpoint(const StageData& st) {
    Tableau tb = gauss_tableau(st.s);
    Y6 y1;
    for (int k = 0; k < 6; ++k) {
        double acc = 0.0;
        for (int i = 0; i < st.s; ++i) acc += tb.b[i] * st.g[i][k];
        y1[k] = st.y0[k] + st.dt * acc;
    }
    return y1;
}

Y6 dense_state(const StageData& st, double time) {
    Tableau tb = gauss_tableau(st.s);
    double th = (time - st.t0) / st.dt;
    double integ[3], val[3];
    lagrange_basis(tb, th, integ, val);
    Y6 y;
    for (int k = 0; k < 6; ++k) {
        double acc = 0.0;
        for (int i = 0; i < st.s; ++i) acc += integ[i] * st.g[i][k];
        y[k] = st.y0[k] + st.dt * acc;
    }
    return y;
}

Y6 dense_derivative(const StageData& st, double time) {
    Tableau tb = gauss_tableau(st.s);
    double th = (time - st.t0) / st.dt;
    double integ[3], val[3];
    lagrange_basis(tb, th, integ, val);
    Y6 g;
    for (int k = 0; k < 6; ++k) {
        double acc = 0.0;
        for (int i = 0; i < st.s; ++i) acc += val[i] * st.g[i][k];
        g[k] = acc;
    }
    return g;
}

const StageData& GeneralizedSolution::step_containing(double time) const {
    if (steps.empty()) throw ContractViolation("solution has no steps");
    double dir = steps.front().dt >= 0 ? 1.0 : -1.0;
    size_t lo = 0, hi = steps.size() - 1;
    while (lo < hi) {
        size_t mid = (lo + hi + 1) / 2;
        if (dir * (time - steps[mid].t0) >= 0)
            lo = mid;
        else
            hi = mid - 1;
    }
    return steps[lo];
}

Y6 GeneralizedSolution::at(double time) const {
    if (steps.empty()) {
        if (state.empty()) throw ContractViolation("empty solution");
        return to_y6(state.front());
    }
    double dir = t.back() >= t.front() ? 1.0 : -1.0;
    double tt = time;
    if (dir * (tt - t.front()) < 0) tt = t.front();
    if (dir * (tt - t.back()) > 0) tt = t.back();
    return dense_state(step_containing(tt), tt);
}

LongTermPropagator::LongTermPropagator(LongTermConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_.spec);
    if (!(cfg_.dt != 0.0) || !(cfg_.dt_min > 0.0))
        throw ContractViolation("step sizes must be positive");
    plans_.assign(cfg_.planets.size(), Plan{});
}

TwoOrbitConfig LongTermPropagator::pair_config(const ResonantState& y, int j) const {
    return TwoOrbitConfig{shape_from_resonant(y, cfg_.spec), cfg_.planets[j].shape};
}

void LongTermPropagator::prepare(const ResonantState& y) {
    plans_.assign(cfg_.planets.size(), Plan{});
    for (size_t j = 0; j < plans_.size(); ++j) census(y, (int)j);
}

void LongTermPropagator::flip_side(int planet, int branch) {
    plans_.at(planet).branches.at(branch).side *= -1;
}

void LongTermPropagator::census(const ResonantState& y, int j) {
    TwoOrbitConfig cj = pair_config(y, j);
    auto pts = critical_points(cj);
    Plan& pl = plans_[j];
    std::vector<Branch> out = pl.branches;
    std::vector<char> seen(out.size(), 0);
    std::vector<Branch> fresh;
    for (const CriticalPoint& p : pts) {
        if (p.morse_index != 0) continue;
        int match = -1;
        for (size_t b = 0; b < out.size(); ++b) {
            if (seen[b]) continue;
            double du = std::remainder(p.V.u - out[b].V.u, TWO_PI);
            double dv = std::remainder(p.V.v - out[b].V.v, TWO_PI);
            if (du * du + dv * dv < 0.09) {
                match = (int)b;
                break;
            }
        }
        if (match >= 0) {
            seen[match] = 1;
            out[match].V = p.V;
            out[match].d = p.d;
            out[match].d_tilde = p.d_tilde;
        } else {
            Branch nb;
            nb.V = p.V;
            nb.d = p.d;
            nb.d_tilde = p.d_tilde;
            nb.side = p.d_tilde >= 0 ? +1 : -1;
            fresh.push_back(nb);
        }
    }
    std::vector<Branch> kept;
    for (size_t b = 0; b < out.size(); ++b) {
        if (seen[b])
            kept.push_back(out[b]);
        else if (out[b].active)
            throw BifurcationNearby("an active minimum vanished between censuses");
    }
    for (const Branch& nb : fresh) kept.push_back(nb);
    pl.branches = kept;
    rebuild_policy(y, j);
}

void LongTermPropagator::refresh(const ResonantState& y, int j) {
    Plan& pl = plans_[j];
    TwoOrbitConfig cj = pair_config(y, j);
    bool lost = false;
    for (Branch& b : pl.branches) {
        CriticalPoint cp;
        try {
            cp = refine_critical_point(cj, b.V, 1e-13);
        } catch (const Error&) {
            if (b.active) throw BifurcationNearby("a tracked minimum bifurcated mid-flight");
            lost = true;
            continue;
        }
        double du = std::remainder(cp.V.u - b.V.u, TWO_PI);
        double dv = std::remainder(cp.V.v - b.V.v, TWO_PI);
        if (du * du + dv * dv > 0.09 || cp.morse_index != 0) {
            if (b.active) throw BifurcationNearby("a tracked minimum bifurcated mid-flight");
            lost = true;
            continue;
        }
        b.V = cp.V;
        b.d = cp.d;
        b.d_tilde = cp.d_tilde;
        if (!b.active) b.side = cp.d_tilde >= 0 ? +1 : -1;
    }
    if (lost) {
        census(y, j);
        return;
    }
    rebuild_policy(y, j);
}

void LongTermPropagator::rebuild_policy(const ResonantState& y, int j) {
    Plan& pl = plans_[j];
    double dmin = 1e30;
    for (const Branch& b : pl.branches) dmin = std::min(dmin, b.d);
    pl.d_min = dmin;
    if (cfg_.grid_override > 0) {
        pl.m = cfg_.grid_override;
        for (Branch& b : pl.branches) b.active = false;
        return;
    }
    TwoOrbitConfig cj = pair_config(y, j);
    pl.m = plain_grid_size(cj, dmin, cfg_.quad);
    double act = band_activation_distance(cj, cfg_.quad);
    for (Branch& b : pl.branches) b.active = (pl.m == 0) && (b.d < act);
}

void LongTermPropagator::audit_extraction(const ResonantState& y, int j) const {
    const Plan& pl = plans_[j];
    if (pl.m > 0 || pl.d_min < cfg_.check_lo || pl.d_min > cfg_.check_hi) return;
    const PlanetModel& pm = cfg_.planets[j];
    std::vector<ActiveMinimum> act;
    for (const Branch& b : pl.branches)
        if (b.active) act.push_back({b.V, b.side});
    PerturbationResult ex = planet_term_extracted(y, cfg_.spec, pm.shape, pm.mu, y.sigma,
                                                  pm.n_kernel, cfg_.quad, act, false);
    TwoOrbitConfig cj = pair_config(y, j);
    double need = band_activation_distance(cj, cfg_.quad) * cfg_.quad.m_band / pl.d_min;
    int m = std::min(4096, 32 * (int)std::ceil(need / 32.0));
    PerturbationResult ref = planet_term_plain(y, cfg_.spec, pm.shape, pm.mu, y.sigma,
                                               pm.n_kernel, m, cfg_.quad, false);
    if (std::fabs(ex.value - ref.value) > cfg_.check_tol * std::fabs(ref.value))
        throw NumericalFailure("extraction self-check failed in the overlap window");
}

Y6 LongTermPropagator::field(double, const Y6& yv) const {
    ResonantState st = from_y6(yv);
    double dy[5] = {0, 0, 0, 0, 0};
    double dsig = 0.0;
    for (size_t j = 0; j < cfg_.planets.size(); ++j) {
        const PlanetModel& pm = cfg_.planets[j];
        const Plan& pl = plans_[j];
        PerturbationResult r;
        if (pl.m > 0) {
            r = planet_term_plain(st, cfg_.spec, pm.shape, pm.mu, st.sigma, pm.n_kernel,
                                  pl.m, cfg_.quad, true);
        } else {
            std::vector<ActiveMinimum> act;
            for (const Branch& b : pl.branches)
                if (b.active) act.push_back({b.V, b.side});
            r = planet_term_extracted(st, cfg_.spec, pm.shape, pm.mu, st.sigma, pm.n_kernel,
                                      cfg_.quad, act, true);
        }
        for (int k = 0; k < 5; ++k) dy[k] += r.dy[k];
        dsig += r.dsigma;
    }
    double dS = h0_dS(st.S, cfg_.spec, cfg_.n_planet);
    return Y6{-dsig, dS + dy[0], -dy[3], dy[1], -dy[4], dy[2]};
}

double LongTermPropagator::energy(const Y6& yv) const {
    ResonantState st = from_y6(yv);
    double e = h0_value(st.S, cfg_.spec, cfg_.S5, cfg_.n_planet);
    for (size_t j = 0; j < cfg_.planets.size(); ++j) {
        const PlanetModel& pm = cfg_.planets[j];
        const Plan& pl = plans_[j];
        if (pl.m > 0) {
            e += planet_term_plain(st, cfg_.spec, pm.shape, pm.mu, st.sigma, pm.n_kernel,
                                   pl.m, cfg_.quad, false)
                     .value;
        } else {
            std::vector<ActiveMinimum> act;
            for (const Branch& b : pl.branches)
                if (b.active) act.push_back({b.V, b.side});
            e += planet_term_extracted(st, cfg_.spec, pm.shape, pm.mu, st.sigma, pm.n_kernel,
                                       cfg_.quad, act, false)
                     .value;
        }
    }
    return e;
}

bool LongTermPropagator::scan_events(const StageData& st, double& th_out, double& slope_out,
                                     int& planet_out, int& branch_out) const {
    bool found = false;
    th_out = 2.0;
    for (size_t j = 0; j < plans_.size(); ++j) {
        const Plan& pl = plans_[j];
        if (pl.m > 0) continue;
        for (size_t b = 0; b < pl.branches.size(); ++b) {
            const Branch& br = pl.branches[b];
            if (!br.active) continue;
            const int NS = 4;
            Vec2 vw = br.V;
            double dprev = br.d_tilde, thprev = 0.0;
            for (int q = 1; q <= NS; ++q) {
                double th = (double)q / NS;
                ResonantState ys = from_y6(dense_state(st, st.t0 + th * st.dt));
                CriticalPoint cp = refine_critical_point(pair_config(ys, (int)j), vw, 1e-13);
                vw = cp.V;
                double dv = cp.d_tilde;
                if ((double)br.side * dv < 0.0 && std::fabs(dv) > 1e-12) {
                    double lo = thprev, hi = th, dlo = dprev, dhi = dv;
                    for (int it = 0; it < 80 && (hi - lo) > 1e-13; ++it) {
                        double mid = 0.5 * (lo + hi);
                        double sc = lo - dlo * (hi - lo) / (dhi - dlo);
                        if (sc > lo + 0.05 * (hi - lo) && sc < hi - 0.05 * (hi - lo)) mid = sc;
                        ResonantState ym = from_y6(dense_state(st, st.t0 + mid * st.dt));
                        CriticalPoint cm = refine_critical_point(pair_config(ym, (int)j), vw, 1e-13);
                        vw = cm.V;
                        double dm = cm.d_tilde;
                        if (std::fabs(dm) < 1e-13) {
                            lo = hi = mid;
                            break;
                        }
                        if ((dm > 0) == (dhi > 0)) {
                            hi = mid;
                            dhi = dm;
                        } else {
                            lo = mid;
                            dlo = dm;
                        }
                    }
                    double th_c = 0.5 * (lo + hi);
                    if (th_c < th_out) {
                        th_out = th_c;
                        slope_out = (dv - dprev) / ((th - thprev) * st.dt);
                        planet_out = (int)j;
                        branch_out = (int)b;
                        found = true;
                    }
                    break;
                }
                dprev = dv;
                thprev = th;
            }
        }
    }
    return found;
}

GeneralizedSolution LongTermPropagator::run(const ResonantState& y0, double t0, double t1) {
    GeneralizedSolution sol;
    prepare(y0);
    Y6 y = to_y6(y0);
    double t = t0;
    sol.t.push_back(t0);
    sol.state.push_back(y0);
    if (t1 == t0) return sol;
    double dir = (t1 > t0) ? 1.0 : -1.0;

    StepControls ctl;
    ctl.stages = cfg_.stages;
    ctl.fp_tol = cfg_.fp_tol;
    ctl.fp_max_iter = cfg_.fp_max_iter;

    FieldFn f = [this](double tt, const Y6& yy) { return field(tt, yy); };
    Tableau tb = gauss_tableau(ctl.stages);

    bool have_prev = false, have_bias = false, any_event = false;
    StageData prev;
    Y6 bias{};
    double last_event_t = 0.0;
    int since_census = 0, since_audit = 0;

    while (dir * (t1 - t) > 1e-9) {
        double dt = dir * cfg_.dt;
        if (dir * (t1 - (t + dt)) < 0.0) dt = t1 - t;
        double sA = std::max({std::fabs(y[0]), std::fabs(y[2]), std::fabs(y[4]), 1e-6});
        ctl.scale = {sA, 1.0, sA, 1.0, sA, 1.0};

        std::array<Y6, 3> guess;
        const std::array<Y6, 3>* gp = nullptr;
        if (have_prev) {
            for (int i = 0; i < ctl.stages; ++i) {
                guess[i] = dense_derivative(prev, t + tb.c[i] * dt);
                if (have_bias)
                    for (int k = 0; k < 6; ++k) guess[i][k] += bias[k];
            }
            gp = &guess;
        }
        StageData st = step_with_halving(f, t, y, dt, ctl, gp);
        dt = st.dt;

        double th_c, slope;
        int ev_planet, ev_branch;
        if (scan_events(st, th_c, slope, ev_planet, ev_branch)) {
            double tc = t + th_c * dt;
            StageData land;
            double d_land = 0.0, tc_prev = 0.0, d_prev = 0.0;
            bool landed = false, have_secant = false;
            for (int round = 0; round < 6; ++round) {
                double dtl = tc - t;
                if (std::fabs(dtl) < 1e-10)
                    throw NumericalFailure("crossing collapses onto the step start");
                std::array<Y6, 3> lg;
                for (int i = 0; i < ctl.stages; ++i)
                    lg[i] = dense_derivative(st, t + tb.c[i] * dtl);
                land = collocation_stages(f, t, y, dtl, ctl, &lg);
                Y6 ye = step_endpoint(land);
                ResonantState ys = from_y6(ye);
                CriticalPoint cp = refine_critical_point(
                    pair_config(ys, ev_planet), plans_[ev_planet].branches[ev_branch].V, 1e-13);
                d_land = cp.d_tilde;
                if (std::fabs(d_land) < 1e-10) {
                    landed = true;
                    break;
                }
                double tn;
                if (have_secant && d_land != d_prev)
                    tn = tc - d_land * (tc - tc_prev) / (d_land - d_prev);
                else
                    tn = tc - d_land / slope;
                tc_prev = tc;
                d_prev = d_land;
                have_secant = true;
                tc = tn;
            }
            if (!landed) throw NumericalFailure("crossing time refinement did not converge");

            Y6 ye = step_endpoint(land);
            t = tc;
            y = ye;
            ResonantState ys = from_y6(ye);
            sol.t.push_back(t);
            sol.state.push_back(ys);
            sol.steps.push_back(land);
            for (size_t j = 0; j < plans_.size(); ++j) refresh(ys, (int)j);

            const PlanetModel& pm = cfg_.planets[ev_planet];
            Branch& br = plans_[ev_planet].branches[ev_branch];
            int side_in = br.side;
            GeometryGradients gg = geometry_gradients(ys, cfg_.spec, pm.shape, br.V);
            JumpResult jr = crossing_jump(gg, cfg_.spec, pm.mu, ys.sigma, pm.n_kernel);
            if (any_event && std::fabs(tc - last_event_t) < 10.0 * cfg_.dt_min)
                throw NumericalFailure("crossings closer than ten minimum steps; aborting");
            any_event = true;
            last_event_t = tc;

            CrossingEvent ev;
            ev.t = tc;
            ev.planet = ev_planet;
            ev.branch = ev_branch;
            ev.sigma_c = jr.sigma_c;
            ev.diff = jr.diff;
            ev.dsigma_jump = jr.dsigma;
            ev.state = ys;
            sol.events.push_back(ev);

            flip_side(ev_planet, ev_branch);
            for (size_t j = 0; j < plans_.size(); ++j) rebuild_policy(ys, (int)j);

            // warm-start correction: outgoing minus incoming derivative, frozen
            // at the crossing (the stage guesses past the surface need it)
            double sgn = side_in > 0 ? 1.0 : -1.0;
            bias = Y6{-sgn * jr.dsigma,  sgn * jr.diff[0], -sgn * jr.diff[3],
                      sgn * jr.diff[1], -sgn * jr.diff[4], sgn * jr.diff[2]};
            have_bias = true;
            prev = land;
            have_prev = true;
            ++since_census;
            ++since_audit;
            continue;
        }

        Y6 ye = step_endpoint(st);
        t = t + dt;
        y = ye;
        ResonantState ys = from_y6(ye);
        sol.t.push_back(t);
        sol.state.push_back(ys);
        sol.steps.push_back(st);
        prev = st;
        have_prev = true;
        have_bias = false;
        ++since_census;
        ++since_audit;

        bool full = since_census >= cfg_.census_stride;
        for (size_t j = 0; j < plans_.size(); ++j) {
            if (full)
                census(ys, (int)j);
            else
                refresh(ys, (int)j);
            for (const Branch& b : plans_[j].branches)
                if (b.active && b.side * b.d_tilde < 0.0 && std::fabs(b.d_tilde) > 1e-9)
                    throw NumericalFailure("missed crossing detected; reduce the step size");
        }
        if (full) since_census = 0;
        if (since_audit >= cfg_.check_stride) {
            since_audit = 0;
            for (size_t j = 0; j < plans_.size(); ++j) audit_extraction(ys, (int)j);
        }
    }
    return sol;
}

DistanceSeries distance_history(const GeneralizedSolution& sol, const LongTermConfig& cfg,
                                int planet, int per_step) {
    DistanceSeries out;
    if (sol.state.empty() || per_step < 1) return out;
    ResonantState y0 = sol.state.front();
    TwoOrbitConfig c0{shape_from_resonant(y0, cfg.spec), cfg.planets[planet].shape};
    auto pts = critical_points(c0);
    std::vector<Vec2> vw;
    for (const auto& p : pts)
        if (p.morse_index == 0) vw.push_back(p.V);
    out.branch_d.assign(vw.size(), {});

    auto sample = [&](double tt, const ResonantState& ys) -> bool {
        TwoOrbitConfig cj{shape_from_resonant(ys, cfg.spec), cfg.planets[planet].shape};
        std::vector<double> row(vw.size());
        for (size_t b = 0; b < vw.size(); ++b) {
            try {
                CriticalPoint cp = refine_critical_point(cj, vw[b], 1e-13);
                if (cp.morse_index != 0) return false;
                double du = std::remainder(cp.V.u - vw[b].u, TWO_PI);
                double dv = std::remainder(cp.V.v - vw[b].v, TWO_PI);
                if (du * du + dv * dv > 0.09) return false;
                vw[b] = cp.V;
                row[b] = cp.d_tilde;
            } catch (const Error&) {
                return false;
            }
        }
        out.t.push_back(tt);
        for (size_t b = 0; b < vw.size(); ++b) out.branch_d[b].push_back(row[b]);
        return true;
    };

    if (!sample(sol.t.front(), y0)) {
        out.truncated = true;
        return out;
    }
    for (const StageData& st : sol.steps) {
        for (int q = 1; q <= per_step; ++q) {
            double tt = st.t0 + ((double)q / per_step) * st.dt;
            ResonantState ys = from_y6(dense_state(st, tt));
            if (!sample(tt, ys)) {
                out.truncated = true;
                return out;
            }
        }
    }
    return out;
}

} // namespace resorb
