#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stel/quasirandom.hpp"
#include "stel/transport.hpp"
#include "test_util.hpp"

using namespace stel;

namespace {

TransportSolution<2> make_solution(const std::string& field_label,
                                   const std::string& datum_label, int steps,
                                   std::uint64_t seed = 11u, double theta = 0.5) {
    TransportSolution<2> sol;
    sol.drift = make_field(field_label, theta);
    sol.datum = make_datum<2>(datum_label);
    sol.grid = TimeGrid(1.0, steps);
    sol.seed = seed;
    return sol;
}

// Radial profile of the unit bump datum, peak value 1 at the origin.
double bump_radial(double r) {
    const double q = r * r;
    if (q >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - q));
}

}  // namespace

TEST_CASE("zero time index returns the datum bit for bit") {
    for (const char* label : {"rotation", "shear_holder", "zero"}) {
        auto sol = make_solution(label, "bump", 64);
        QuasiRandomSequence<2> qr;
        const std::uint64_t base = 192;
        for (int i = 0; i < 12; ++i) {
            const Vec<2> x = qr.box(base + i, Vec<2>::Zero(), 2.0);
            const BackwardBatch<2> batch(sol, 0, 0u);
            const Vec<2> y = batch.point(x);
            REQUIRE(y[0] == x[0]);
            REQUIRE(y[1] == x[1]);
            REQUIRE(solution_value(sol, 0, x, 5u) == sol.datum.value(x));
            const Vec<2> g = solution_gradient(sol, 0, x, 5u);
            const Vec<2> g0 = sol.datum.gradient(x);
            REQUIRE(g[0] == g0[0]);
            REQUIRE(g[1] == g0[1]);
        }
    }
}

TEST_CASE("zero drift transports by pure Brownian translation") {
    auto sol = make_solution("zero", "gaussian", 256, 77u);
    const int t = sol.grid.steps;
    for (std::uint64_t s : {0u, 3u, 9u}) {
        const auto path = sample_path<2>(sol.grid, sol.seed, s);
        const BackwardBatch<2> batch(sol, t, s);
        QuasiRandomSequence<2> qr;
        const std::uint64_t base = 512;
        for (int i = 0; i < 10; ++i) {
            const Vec<2> x = qr.box(base + i, Vec<2>::Zero(), 3.0);
            const Vec<2> expect = x - path.position(t);
            REQUIRE((batch.point(x) - expect).norm() < 1e-12);
            REQUIRE(solution_value(sol, t, x, s) ==
                    Catch::Approx(sol.datum.value(expect)).margin(1e-12));
            // DY is an exact identity product, so the chain rule is trivial.
            const Vec<2> g = solution_gradient(sol, t, x, s);
            const Vec<2> expect_g = sol.datum.gradient(batch.point(x));
            REQUIRE((g - expect_g).norm() == 0.0);
        }
    }
}

TEST_CASE("noiseless rotation matches the scaled rotation closed form") {
    auto sol = make_solution("rotation", "bump", 1024);
    sol.zero_noise = true;
    const double dt = sol.grid.dt();
    // Backward Euler steps compose to a similarity: radius grows by
    // (1 + dt^2)^(t/2) exactly, and the bump datum is radial.
    for (int t : {512, 1024}) {
        const double factor = std::pow(1.0 + dt * dt, t / 2.0);
        for (double r0 : {0.15, 0.4, 0.85}) {
            const Vec<2> x{r0 * 0.6, -r0 * 0.8};
            const double got = solution_value(sol, t, x, 0u);
            REQUIRE(got == Catch::Approx(bump_radial(factor * r0)).margin(1e-10));
        }
    }
}

TEST_CASE("affine batch reconstruction agrees with per node integration") {
    auto sol = make_solution("rotation", "bump", 64, 5u);
    const int t = sol.grid.steps;
    const auto path = sample_path<2>(sol.grid, sol.seed, 2u);
    const BackwardBatch<2> batch(sol, t, 2u);
    QuasiRandomSequence<2> qr;
    const std::uint64_t base = 1344;
    for (int i = 0; i < 20; ++i) {
        const Vec<2> x = qr.box(base + i, Vec<2>::Zero(), 4.0);
        const auto direct = jacobian_flow(sol.drift, path, 0, t, x,
                                          FlowDirection::backward);
        const auto [y, jac] = batch.point_jacobian(x);
        REQUIRE((y - direct.terminal).norm() < 1e-10 * (1.0 + x.norm()));
        REQUIRE((jac - direct.jacobian).norm() < 1e-10);
    }
}

TEST_CASE("solution gradient matches finite differences of the value") {
    auto sol = make_solution("rotation", "bump", 128, 19u);
    sol.drift = mollify_field(sol.drift, MollifierSpec{0.25, 7});
    const int t = sol.grid.steps;
    const double h = 1e-4;
    QuasiRandomSequence<2> qr;
    const std::uint64_t base = 832;
    int checked = 0;
    for (int i = 0; i < 48 && checked < 6; ++i) {
        const Vec<2> x = qr.box(base + i, Vec<2>::Zero(), 2.4);
        const Vec<2> g = solution_gradient(sol, t, x, 1u);
        if (g.norm() < 0.05) continue;  // flat spots make relative FD meaningless
        ++checked;
        for (int c = 0; c < 2; ++c) {
            Vec<2> xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            const double fd = (solution_value(sol, t, xp, 1u) -
                               solution_value(sol, t, xm, 1u)) / (2.0 * h);
            REQUIRE(g[c] == Catch::Approx(fd).margin(2e-5 + 1e-4 * std::abs(fd)));
        }
    }
    REQUIRE(checked >= 4);
}

TEST_CASE("lp norm at time zero reduces to plain quadrature") {
    auto sol = make_solution("shear_holder", "bump", 64);
    const QuadratureBox<2> box(Vec<2>::Zero(), 1.5, 40);
    double oracle = 0.0;
    for (std::int64_t i = 0; i < box.size(); ++i)
        oracle += box.weight(i) * std::pow(std::abs(sol.datum.value(box.node(i))), 2.0);
    const auto est = lp_norm(sol, 0, 2.0, box, 4);
    REQUIRE(est.value == Catch::Approx(oracle).epsilon(1e-14));
    REQUIRE(est.ci_halfwidth == 0.0);  // all samples see the identity map
    REQUIRE(est.samples == 4);
    REQUIRE(est.leakage < 1e-12);
    REQUIRE_FALSE(est.truncation_warning);
}

TEST_CASE("norm estimation validates arguments") {
    auto sol = make_solution("rotation", "bump", 64);
    const QuadratureBox<2> box(Vec<2>::Zero(), 2.0, 8);
    REQUIRE_THROWS_AS(lp_norm(sol, 0, 2.0, box, 0), ConfigError);
    REQUIRE_THROWS_AS(lp_norm(sol, 0, 0.5, box, 4), ConfigError);
    REQUIRE_THROWS_AS(BackwardBatch<2>(sol, -1, 0u), ConfigError);
    REQUIRE_THROWS_AS(BackwardBatch<2>(sol, 65, 0u), ConfigError);
}

TEST_CASE("rotation drift conserves Lp mass pathwise") {
    auto sol = make_solution("rotation", "bump", 256, 23u);
    const QuadratureBox<2> box(Vec<2>::Zero(), 5.0, 128);
    for (double p : {1.5, 2.0}) {
        const auto start = lp_norm(sol, 0, p, box, 16);
        const auto end = lp_norm(sol, sol.grid.steps, p, box, 16);
        REQUIRE(end.value ==
                Catch::Approx(start.value).epsilon(0.02));
        REQUIRE_FALSE(end.truncation_warning);
    }
}

TEST_CASE("rough shear drift conserves Lp mass") {
    auto sol = make_solution("shear_holder", "bump", 256, 31u, 0.5);
    const QuadratureBox<2> box(Vec<2>::Zero(), 4.0, 48);
    const auto start = lp_norm(sol, 0, 2.0, box, 8);
    const auto end = lp_norm(sol, sol.grid.steps, 2.0, box, 8);
    REQUIRE(end.value == Catch::Approx(start.value).epsilon(0.025));
}

TEST_CASE("sobolev seminorm at time zero and under zero noise transport") {
    auto sol = make_solution("rotation", "bump", 128);
    const QuadratureBox<2> box(Vec<2>::Zero(), 2.0, 64);
    double oracle = 0.0;
    for (std::int64_t i = 0; i < box.size(); ++i)
        oracle += box.weight(i) * std::pow(sol.datum.gradient(box.node(i)).norm(), 2.0);
    const auto at_zero = sobolev_seminorm(sol, 0, 2.0, box, 2);
    REQUIRE(at_zero.value == Catch::Approx(oracle).epsilon(1e-14));

    // Near-isometric rotation flow leaves the gradient mass nearly unchanged.
    sol.zero_noise = true;
    const auto moved = sobolev_seminorm(sol, sol.grid.steps, 2.0, box, 1);
    REQUIRE(moved.value == Catch::Approx(oracle).epsilon(0.02));
}

TEST_CASE("truncation warning fires when the box loses the support") {
    auto sol = make_solution("constant", "bump", 64);
    sol.zero_noise = true;
    const QuadratureBox<2> box(Vec<2>::Zero(), 1.5, 32);
    const auto est = lp_norm(sol, sol.grid.steps, 2.0, box, 2);
    // The drift sweeps the support three units to the right; almost all of
    // the mass is gone and the diagnostic must say so.
    REQUIRE(est.value < 1e-8);
    REQUIRE(est.leakage > 0.9);
    REQUIRE(est.truncation_warning);
}

TEST_CASE("default quadrature box follows the support scale rule") {
    auto sol = make_solution("rotation", "bump", 64);
    const auto box = default_quadrature_box(sol);
    REQUIRE(box.halfwidth() == Catch::Approx(6.0 * (1.0 + 1.0)));
    auto wide = make_solution("rotation", "gaussian", 64);
    REQUIRE(default_quadrature_box(wide).halfwidth() ==
            Catch::Approx(6.0 * (8.0 + 1.0)));
}
