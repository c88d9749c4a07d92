#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "resorb/angles.hpp"
#include "resorb/constants.hpp"
#include "resorb/elements.hpp"
#include "resorb/errors.hpp"
#include "resorb/kepler.hpp"

using namespace resorb;

TEST_CASE("kepler solver reproduces bisection oracle on pinned cases") {
    // Expected values computed beforehand with a 30-digit bisection solver.
    double E1 = solve_kepler(0.2, PI / 2);
    CHECK(std::fabs(E1 - 1.7669606079827387685) < 1e-13);
    double E2 = solve_kepler(0.9, 0.05);
    CHECK(std::fabs(E2 - 0.40277793867378743073) < 1e-13);
    CHECK(std::fabs(E1 - oracle::bisect_kepler(0.2, PI / 2)) < 1e-13);
    CHECK(std::fabs(E2 - oracle::bisect_kepler(0.9, 0.05)) < 1e-13);
}

TEST_CASE("kepler residual below 1e-13 over a large random sweep") {
    std::mt19937_64 rng(20260823u);
    std::uniform_real_distribution<double> ue(0.0, 0.99);
    std::uniform_real_distribution<double> um(-10.0 * PI, 10.0 * PI);
    double worst = 0.0, worst_branch = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        double e = ue(rng), M = um(rng);
        double E = solve_kepler(e, M);
        worst = std::fmax(worst, std::fabs(E - e * std::sin(E) - M));
        double d = E - M;
        if (d <= -PI || d > PI) worst_branch = 1.0;
    }
    CHECK(worst < 1e-13);
    CHECK(worst_branch == 0.0);
}

TEST_CASE("kepler edge cases") {
    CHECK(solve_kepler(0.0, 2.7) == 2.7);
    // High eccentricity near the pericentre kink.
    for (double M : {1e-6, 1e-3, 0.03, 3.14, -3.14}) {
        double E = solve_kepler(0.99, M);
        CHECK(std::fabs(E - 0.99 * std::sin(E) - M) < 1e-13);
    }
    CHECK_THROWS_AS(solve_kepler(1.0, 0.3), ContractViolation);
    CHECK_THROWS_AS(solve_kepler(1.2, 0.3), ContractViolation);
    CHECK_THROWS_AS(solve_kepler(-0.1, 0.3), ContractViolation);
    // Branch preservation far from the principal interval.
    double M = 25.0;
    double E = solve_kepler(0.5, M);
    CHECK(E - M > -PI);
    CHECK(E - M <= PI);
}

TEST_CASE("circular zero-inclination trajectory is the unit circle") {
    OrbitShape shape(1.0, 0.0, 0.0, 0.0, 0.0);
    for (double ell : {0.0, 0.7, 2.0, 4.5}) {
        Vec3 X = shape.position(ell);
        CHECK(std::fabs(X.x - std::cos(ell)) < 1e-15);
        CHECK(std::fabs(X.y - std::sin(ell)) < 1e-15);
        CHECK(std::fabs(X.z) < 1e-15);
    }
}

TEST_CASE("anomaly derivatives match finite differences") {
    OrbitShape shape(2.3, 0.41, 0.3, 1.1, -0.7);
    double h = 1e-4;
    for (double ell : {0.1, 1.9, 3.3, 5.9}) {
        AnomalyState st = shape.at(ell, true);
        double r = norm(st.X);
        CHECK(std::fabs(r - shape.a() * (1.0 - shape.e() * std::cos(st.E))) < 1e-12);
        for (int c = 0; c < 3; ++c) {
            auto comp = [&](const Vec3& v) { return c == 0 ? v.x : (c == 1 ? v.y : v.z); };
            double d1 = oracle::richardson_fd(
                [&](double l) { return comp(shape.position(l)); }, ell, h);
            CHECK(std::fabs(comp(st.Xl) - d1) < 1e-9);
            double d2 = oracle::second_fd(
                [&](double l) { return comp(shape.position(l)); }, ell, 1e-4);
            CHECK(std::fabs(comp(st.Xll) - d2) < 1e-6);
        }
    }
}

TEST_CASE("shape partials match finite differences") {
    double base[5] = {2.3, 0.41, 0.3, 1.1, -0.7};
    OrbitShape shape(base[0], base[1], base[2], base[3], base[4]);
    double ell = 2.45;
    AnomalyState st = shape.at(ell);
    auto partials = shape.shape_partials(ell, st.E);
    for (int p = 0; p < 5; ++p) {
        for (int c = 0; c < 3; ++c) {
            auto comp = [&](const Vec3& v) { return c == 0 ? v.x : (c == 1 ? v.y : v.z); };
            double d = oracle::richardson_fd(
                [&](double x) {
                    double el[5] = {base[0], base[1], base[2], base[3], base[4]};
                    el[p] = x;
                    return comp(OrbitShape(el[0], el[1], el[2], el[3], el[4]).position(ell));
                },
                base[p], 1e-5);
            CHECK(std::fabs(comp(partials[p]) - d) < 1e-8);
        }
    }
}

TEST_CASE("delaunay chart roundtrip and invariants") {
    KeplerianElements el{2.5, 0.55, 0.15, 1.2, 2.2, 0.9};
    DelaunayElements d = keplerian_to_delaunay(el, GAUSS_K);
    CHECK(std::fabs(d.L - GAUSS_K * std::sqrt(2.5)) < 1e-16);
    CHECK(d.L >= d.G);
    CHECK(d.G >= std::fabs(d.Z));
    // n = k^4 / L^3 equals k a^(-3/2).
    double n = std::pow(GAUSS_K, 4) / (d.L * d.L * d.L);
    CHECK(std::fabs(n - GAUSS_K * std::pow(2.5, -1.5)) < 1e-18);
    KeplerianElements back = delaunay_to_keplerian(d, GAUSS_K);
    CHECK(std::fabs(back.a - el.a) < 1e-13);
    CHECK(std::fabs(back.e - el.e) < 1e-13);
    CHECK(std::fabs(back.I - el.I) < 1e-13);
    CHECK(back.omega == el.omega);
    CHECK(back.Omega == el.Omega);
    CHECK_THROWS_AS(keplerian_to_delaunay({-1.0, 0.1, 0, 0, 0, 0}, GAUSS_K),
                    ContractViolation);
    CHECK_THROWS_AS(keplerian_to_delaunay({1.0, 1.1, 0, 0, 0, 0}, GAUSS_K),
                    ContractViolation);
}

TEST_CASE("resonant chart: matrices, roundtrip, pinned example") {
    ResonanceSpec spec{3, -1};
    Mat2 A = resonant_angle_matrix(spec);
    Mat2 AmT = resonant_action_matrix(spec);
    // The action matrix really is the inverse transpose of the angle matrix.
    Mat2 prod = AmT * A.transpose();
    CHECK(std::fabs(prod.m11 - 1.0) < 1e-15);
    CHECK(std::fabs(prod.m12) < 1e-15);
    CHECK(std::fabs(prod.m21) < 1e-15);
    CHECK(std::fabs(prod.m22 - 1.0) < 1e-15);
    CHECK(std::fabs(A.det() - 1.0) < 1e-15);

    // L = 3k maps to S = k.
    DelaunayElements d{3.0 * GAUSS_K, 2.0 * GAUSS_K, 1.0 * GAUSS_K, 0.4, 0.5, 0.6};
    ResonantState r = delaunay_to_resonant(d, 0.25, spec);
    CHECK(std::fabs(r.S - GAUSS_K) < 1e-18);
    CHECK(std::fabs(r.sigma - (3 * 0.4 - 0.25)) < 1e-15);
    DelaunayElements back = resonant_to_delaunay(r, 0.25, spec);
    CHECK(std::fabs(back.L - d.L) < 1e-16);
    CHECK(std::fabs(back.ell - d.ell) < 1e-15);

    // Symplectic pairing through the chart: {sigma, S} = 1, {sigma, S5} = 0.
    // sigma = h ell + hp ell5, S-row of A^(-T) pairs with (L, L5).
    double h = spec.h_ast, hp = spec.h_pl;
    double pb_sigma_S = h * AmT.m11 + hp * AmT.m12;
    double pb_sigma_S5 = h * AmT.m21 + hp * AmT.m22;
    CHECK(std::fabs(pb_sigma_S - 1.0) < 1e-15);
    CHECK(std::fabs(pb_sigma_S5) < 1e-15);

    CHECK_THROWS_AS(validate(ResonanceSpec{2, -4}), ContractViolation);
    CHECK_THROWS_AS(validate(ResonanceSpec{0, 1}), ContractViolation);
}

TEST_CASE("s5 constant and resonant shape jacobian") {
    ResonanceSpec spec{8, -5};
    double L = 8 * 0.003, L5 = GAUSS_K;
    CHECK(std::fabs(s5_constant(L, L5, spec) - (5.0 * L + 8.0 * L5)) < 1e-18);

    ResonantState y{0.0031, 0.021, 0.019, 1.0, 0.3, 2.1};
    auto J = shape_jacobian(y, spec);
    OrbitShape s0 = shape_from_resonant(y, spec);
    double shape0[5] = {s0.a(), s0.e(), s0.I(), s0.Omega(), s0.omega()};
    double yv[5] = {y.S, y.G, y.Z, y.g, y.z};
    for (int col = 0; col < 5; ++col) {
        double hstep = 1e-7 * std::fmax(std::fabs(yv[col]), 1e-3);
        for (int row = 0; row < 5; ++row) {
            auto f = [&](double x) {
                double vals[5] = {y.S, y.G, y.Z, y.g, y.z};
                vals[col] = x;
                ResonantState ys{vals[0], vals[1], vals[2], y.sigma, vals[3], vals[4]};
                OrbitShape s = shape_from_resonant(ys, spec);
                double sh[5] = {s.a(), s.e(), s.I(), s.Omega(), s.omega()};
                return sh[row];
            };
            double fd = oracle::richardson_fd(f, yv[col], hstep);
            CHECK(std::fabs(J[row][col] - fd) <
                  1e-6 * std::fmax(1.0, std::fabs(J[row][col])) + 1e-8);
        }
        (void)shape0;
    }
    ResonantState flat{0.0031, 0.021, 0.021, 1.0, 0.3, 2.1}; // Z = G: zero inclination
    CHECK_THROWS_AS(shape_jacobian(flat, spec), ContractViolation);
}
