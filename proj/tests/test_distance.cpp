#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "resorb/angles.hpp"
#include "resorb/constants.hpp"
#include "resorb/distance.hpp"
#include "resorb/errors.hpp"

using namespace resorb;

namespace {

TwoOrbitConfig inclined_circles() {
    return {OrbitShape(1.0, 0.0, 0.0, 0.0, 0.0),
            OrbitShape(1.5, 0.0, deg2rad(20.0), deg2rad(30.0), 0.0)};
}

// Planet circle of radius equal to the asteroid's node distance: the orbits
// intersect at the ascending node of the asteroid plane.
TwoOrbitConfig node_crossing() {
    return {OrbitShape(2.0, 0.5, deg2rad(15.0), deg2rad(40.0), deg2rad(60.0)),
            OrbitShape(1.2, 0.0, 0.0, 0.0, 0.0)};
}

} // namespace

TEST_CASE("inclined circles: census matches the closed-form node geometry") {
    auto cfg = inclined_circles();
    auto pts = critical_points(cfg);

    int chi = 0, n_min = 0, n_max = 0;
    for (const auto& p : pts) {
        chi += (p.morse_index == 1) ? -1 : 1;
        n_min += p.morse_index == 0;
        n_max += p.morse_index == 2;
    }
    CHECK(chi == 0);
    CHECK(n_min == 2);
    CHECK(n_max == 2);

    // concentric circles: d is bounded by |r2 - r1| and r1 + r2, attained on
    // the mutual node line
    for (int i = 0; i < n_min; ++i) {
        CHECK(pts[i].morse_index == 0);
        CHECK(pts[i].d == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(std::fabs(pts[i].d_tilde) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(pts[i].signed_ok);
    }
    for (const auto& p : pts)
        if (p.morse_index == 2) CHECK(p.d == doctest::Approx(2.5).epsilon(1e-12));

    // the near-side minimum sits at asteroid longitude 30 deg, planet node
    const CriticalPoint& near =
        (pts[0].V.u < PI) ? pts[0] : pts[1];
    CHECK(near.V.u == doctest::Approx(PI / 6).epsilon(1e-9));
    CHECK(std::fabs(wrap_pm_pi(near.V.v)) < 1e-9);

    // metric at that minimum, worked out by hand for circle radii 1 and 1.5
    // meeting along the node at mutual inclination 20 deg
    double c = std::cos(deg2rad(20.0));
    CHECK(near.A.a11 == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(near.A.a22 == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(near.A.a12 == doctest::Approx(-1.5 * c).epsilon(1e-12));
    double s = std::sin(deg2rad(20.0));
    CHECK(std::sqrt(near.A.det()) == doctest::Approx(1.5 * s).epsilon(1e-12));
    CHECK_FALSE(near.degenerate);
}

TEST_CASE("census minima agree with a dense grid scan") {
    auto run = [](const TwoOrbitConfig& cfg) {
        auto pts = critical_points(cfg);
        auto f = [&](double u, double v) { return d_squared(cfg, {u, v}); };
        auto grid = oracle::polished_minima(f, 512);
        double match_tol = 1e-4;
        int found_minima = 0;
        for (const auto& p : pts) found_minima += p.morse_index == 0;
        CHECK((int)grid.size() == found_minima);
        for (const auto& g : grid) {
            bool matched = false;
            for (const auto& p : pts) {
                if (p.morse_index != 0) continue;
                if (std::fabs(wrap_pm_pi(g.u - p.V.u)) < match_tol &&
                    std::fabs(wrap_pm_pi(g.v - p.V.v)) < match_tol)
                    matched = true;
            }
            CHECK(matched);
        }
    };
    run(inclined_circles());
    run(node_crossing());
    run({OrbitShape(2.2, 0.45, deg2rad(12.0), deg2rad(70.0), deg2rad(200.0)),
         OrbitShape(1.0, 0.0167, deg2rad(0.3), deg2rad(10.0), deg2rad(100.0))});
}

TEST_CASE("a crossing configuration reaches zero distance at the node") {
    auto cfg = node_crossing();
    // asteroid mean anomaly at the ascending node: f = -60 deg for e = 0.5
    double E = 2.0 * std::atan(-1.0 / 3.0);
    double ell = E - 0.5 * std::sin(E);
    Vec2 seed{wrap_two_pi(ell), deg2rad(40.0)};
    auto cp = refine_critical_point(cfg, seed);
    CHECK(cp.morse_index == 0);
    CHECK(cp.d < 1e-9);
    CHECK(std::fabs(cp.d_tilde) < 1e-9);
    CHECK_FALSE(cp.degenerate);

    auto best = min_distance(cfg);
    CHECK(best.d < 1e-9);

    // the signed distance changes sign as the planet radius sweeps through
    // the node distance
    auto shrink = TwoOrbitConfig{cfg.ast, OrbitShape(1.15, 0.0, 0.0, 0.0, 0.0)};
    auto grow = TwoOrbitConfig{cfg.ast, OrbitShape(1.25, 0.0, 0.0, 0.0, 0.0)};
    double dt_in = refine_critical_point(shrink, seed).d_tilde;
    double dt_out = refine_critical_point(grow, seed).d_tilde;
    CHECK(dt_in * dt_out < 0.0);
    CHECK(std::fabs(std::fabs(dt_in) - refine_critical_point(shrink, seed).d) < 1e-12);
}

TEST_CASE("tangent contact degenerates the metric and the sign") {
    // coplanar ellipse with perihelion exactly on a circle of radius 1
    TwoOrbitConfig cfg{OrbitShape(5.0 / 3.0, 0.4, 0.0, 0.0, 0.0),
                      OrbitShape(1.0, 0.0, 0.0, 0.0, 0.0)};
    Vec2 touch{0.0, 0.0};
    CHECK(d_squared(cfg, touch) < 1e-28);
    CHECK(tangent_degenerate(a_matrix(cfg, touch)));
    CHECK_THROWS_AS(signed_distance(cfg, touch), SmoothingFails);
}

TEST_CASE("coplanar concentric circles are rejected as a continuum") {
    TwoOrbitConfig cfg{OrbitShape(1.0, 0.0, 0.0, 0.0, 0.0),
                      OrbitShape(1.5, 0.0, 0.0, 0.0, 0.0)};
    CHECK_THROWS_AS(critical_points(cfg), DegenerateConfig);
}

TEST_CASE("coplanar non-crossing pair: census works, sign is unavailable") {
    TwoOrbitConfig cfg{OrbitShape(2.0, 0.2, 0.0, 0.0, deg2rad(30.0)),
                      OrbitShape(1.0, 0.0, 0.0, 0.0, 0.0)};
    auto pts = critical_points(cfg);
    int chi = 0;
    bool saw_min = false;
    for (const auto& p : pts) {
        chi += (p.morse_index == 1) ? -1 : 1;
        if (p.morse_index == 0) {
            saw_min = true;
            CHECK_FALSE(p.signed_ok); // in-plane tangents are parallel at minima
            CHECK(p.d_tilde == doctest::Approx(p.d)); // magnitude fallback
        }
    }
    CHECK(saw_min);
    CHECK(chi == 0);
}

TEST_CASE("half Hessian matches finite differences of the squared distance") {
    std::mt19937 rng(20240517u);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        TwoOrbitConfig cfg{
            OrbitShape(0.8 + 3.2 * U(rng), 0.5 * U(rng), 0.5 * U(rng),
                       TWO_PI * U(rng), TWO_PI * U(rng)),
            OrbitShape(0.8 + 3.2 * U(rng), 0.5 * U(rng), 0.5 * U(rng),
                       TWO_PI * U(rng), TWO_PI * U(rng))};
        Vec2 V{TWO_PI * U(rng), TWO_PI * U(rng)};
        Sym2 A = a_matrix(cfg, V);

        const double h = 3e-4;
        auto f = [&](double u, double v) { return d_squared(cfg, {u, v}); };
        double h11 = (f(V.u + h, V.v) - 2 * f(V.u, V.v) + f(V.u - h, V.v)) / (h * h);
        double h22 = (f(V.u, V.v + h) - 2 * f(V.u, V.v) + f(V.u, V.v - h)) / (h * h);
        double h12 = (f(V.u + h, V.v + h) - f(V.u + h, V.v - h) - f(V.u - h, V.v + h) +
                      f(V.u - h, V.v - h)) /
                     (4 * h * h);
        CHECK(std::fabs(2 * A.a11 - h11) < 1e-4 * (1 + std::fabs(h11)));
        CHECK(std::fabs(2 * A.a22 - h22) < 1e-4 * (1 + std::fabs(h22)));
        CHECK(std::fabs(2 * A.a12 - h12) < 1e-4 * (1 + std::fabs(h12)));

        Vec2 g = d_squared_gradient(cfg, V);
        double gu = oracle::richardson_fd([&](double u) { return f(u, V.v); }, V.u, 1e-5);
        double gv = oracle::richardson_fd([&](double v) { return f(V.u, v); }, V.v, 1e-5);
        CHECK(g.u == doctest::Approx(gu).epsilon(1e-8));
        CHECK(g.v == doctest::Approx(gv).epsilon(1e-8));
    }
}

TEST_CASE("local distance model tracks the true distance near a minimum") {
    auto cfg = inclined_circles();
    auto mp = min_distance(cfg);
    CHECK(delta_h(mp, mp.V) == doctest::Approx(mp.d).epsilon(1e-14));
    for (int k = 0; k < 8; ++k) {
        double th = k * TWO_PI / 8;
        Vec2 V{mp.V.u + 1e-3 * std::cos(th), mp.V.v + 1e-3 * std::sin(th)};
        double dl = delta_h(mp, V);
        double dd = std::sqrt(d_squared(cfg, V));
        CHECK(std::fabs(dl * dl - dd * dd) < 1e-9); // cubic remainder at |w| = 1e-3
    }
}

TEST_CASE("geometry gradients agree with a cold global re-solve") {
    ResonanceSpec spec{1, -3};
    double L = GAUSS_K * std::sqrt(2.5);
    double e = 0.55, I = deg2rad(8.0);
    ResonantState y;
    y.S = L;
    y.G = L * std::sqrt(1 - e * e);
    y.Z = y.G * std::cos(I);
    y.sigma = 0.3;
    y.g = 1.0;
    y.z = 0.5;
    OrbitShape planet(5.2, 0.05, deg2rad(1.2), deg2rad(100.0), deg2rad(274.0));

    TwoOrbitConfig cfg{shape_from_resonant(y, spec), planet};
    auto mp = min_distance(cfg);
    auto gg = geometry_gradients(y, spec, planet, mp.V);
    CHECK(gg.base.d == doctest::Approx(mp.d).epsilon(1e-12));
    CHECK(gg.inv_sqrt_detA == doctest::Approx(1.0 / std::sqrt(mp.A.det())).epsilon(1e-12));

    // independent check: cold global census on displaced states, larger step
    auto cold_minimum = [&](int axis, double hh) {
        ResonantState yy = y;
        switch (axis) {
            case 0: yy.S += hh; break;
            case 1: yy.G += hh; break;
            case 2: yy.Z += hh; break;
            case 3: yy.g += hh; break;
            case 4: yy.z += hh; break;
        }
        TwoOrbitConfig c{shape_from_resonant(yy, spec), planet};
        auto pts = critical_points(c);
        double best = 1e300;
        CriticalPoint nearest;
        for (const auto& p : pts) {
            if (p.morse_index != 0) continue;
            double du = wrap_pm_pi(p.V.u - mp.V.u), dv = wrap_pm_pi(p.V.v - mp.V.v);
            double dist = du * du + dv * dv;
            if (dist < best) { best = dist; nearest = p; }
        }
        return nearest;
    };
    double scales[5] = {y.G, y.G, y.G, 1.0, 1.0};
    double refs[5], maxref = 0;
    for (int axis = 0; axis < 5; ++axis) {
        double h = 1e-5 * scales[axis];
        refs[axis] =
            (cold_minimum(axis, h).d_tilde - cold_minimum(axis, -h).d_tilde) / (2 * h);
        maxref = std::max(maxref, std::fabs(refs[axis]));
    }
    for (int axis = 0; axis < 5; ++axis)
        CHECK(std::fabs(gg.dtilde[axis] - refs[axis]) <
              1e-3 * std::fabs(refs[axis]) + 1e-6 * maxref);

    // one axis of the metric derivative against the same cold path
    double h_g = 1e-4;
    double ref_isd = (1.0 / std::sqrt(cold_minimum(3, h_g).A.det()) -
                      1.0 / std::sqrt(cold_minimum(3, -h_g).A.det())) /
                     (2 * h_g);
    CHECK(std::fabs(gg.d_inv_sqrt_detA[3] - ref_isd) <
          1e-3 * std::fabs(ref_isd) + 1e-6 * gg.inv_sqrt_detA);
}
