#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "stel/field.hpp"
#include "stel/flow.hpp"
#include "test_util.hpp"

using stel::BrownianPath;
using stel::FlowDirection;
using stel::FlowOptions;
using stel::JacobianMethod;
using stel::Mat;
using stel::TimeGrid;
using stel::Vec;

namespace {
Mat<2> rotation_exp(double t) {
    Mat<2> r;
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
}
}  // namespace

TEST_CASE("drift-free flows translate by the noise and invert exactly") {
    const TimeGrid grid(1.0, 256);
    const auto path = stel::sample_path<2>(grid, 11, 0);
    const auto zero = stel::make_field("zero");
    const Vec<2> x{0.7, -1.3};
    const auto fwd = stel::forward_flow(zero, path, 0, grid.steps, x);
    REQUIRE((fwd.terminal - (x + path.position(grid.steps))).norm() < 1e-12);
    const auto bwd = stel::backward_flow(zero, path, 0, grid.steps, x);
    REQUIRE((bwd.terminal - (x - path.position(grid.steps))).norm() < 1e-12);
    // Partial spans use B_t - B_s.
    const auto mid = stel::forward_flow(zero, path, 64, 192, x);
    REQUIRE((mid.terminal - (x + path.position(192) - path.position(64))).norm() < 1e-12);
    // Roundtrip is exact for zero drift.
    const auto round = stel::backward_flow(zero, path, 0, grid.steps, fwd.terminal);
    REQUIRE((round.terminal - x).norm() < 1e-12);
    // Jacobian is exactly the identity.
    const auto jac = stel::jacobian_flow(zero, path, 0, grid.steps, x, FlowDirection::forward);
    REQUIRE(jac.jacobian_valid);
    REQUIRE((jac.jacobian - Mat<2>::Identity()).norm() == 0.0);
}

TEST_CASE("rotation flow matches the linear-SDE solution") {
    // Oracle: X_t = e^{At} x + sum_k e^{A(T - t_{k+1})} dB_k with the exact
    // matrix exponential, evaluated on the same increments. Euler differs
    // from it by O(dt).
    const TimeGrid grid(1.0, 1024);
    const auto rot = stel::make_field("rotation");
    const Vec<2> x{1.0, 0.5};
    for (std::uint64_t sample : {0ull, 3ull}) {
        const auto path = stel::sample_path<2>(grid, 2024, sample);
        Vec<2> oracle = rotation_exp(grid.horizon) * x;
        for (int k = 0; k < grid.steps; ++k)
            oracle += rotation_exp(grid.horizon - grid.time(k + 1)) * path.increment(k);
        const auto got = stel::forward_flow(rot, path, 0, grid.steps, x);
        REQUIRE((got.terminal - oracle).norm() < 5e-3);
    }
    // Deterministic part alone: first-order accuracy bound T*dt*|x|.
    FlowOptions quiet;
    quiet.zero_noise = true;
    const auto path = stel::sample_path<2>(grid, 2024, 0);
    const auto det = stel::forward_flow(rot, path, 0, grid.steps, x, quiet);
    REQUIRE((det.terminal - rotation_exp(1.0) * x).norm() <
            grid.horizon * grid.dt() * x.norm() * 1.5);
}

TEST_CASE("rotation roundtrip deviation follows the closed form") {
    // With commuting steps the zero-noise roundtrip map is exactly
    // ((1+dt^2)^n) * I, so the deviation is ((1+dt^2)^n - 1)|x|.
    const auto rot = stel::make_field("rotation");
    const Vec<2> x{2.0, -1.0};
    FlowOptions quiet;
    quiet.zero_noise = true;
    for (int n : {256, 1024}) {
        const TimeGrid grid(1.0, n);
        const auto path = stel::sample_path<2>(grid, 5, 0);
        const auto fwd = stel::forward_flow(rot, path, 0, n, x, quiet);
        const auto back = stel::backward_flow(rot, path, 0, n, fwd.terminal, quiet);
        const double predicted = (std::pow(1.0 + grid.dt() * grid.dt(), n) - 1.0) * x.norm();
        const double got = (back.terminal - x).norm();
        REQUIRE(got == Catch::Approx(predicted).epsilon(1e-9));
    }
}

TEST_CASE("noisy roundtrip error decays with order about one") {
    const auto rot = stel::make_field("rotation");
    const Vec<2> x{1.5, 0.25};
    std::vector<double> errors;
    for (int sample = 0; sample < 4; ++sample) {
        auto path = stel::sample_path<2>(TimeGrid(1.0, 64), 77, static_cast<std::uint64_t>(sample));
        std::vector<double> per_level;
        for (int level = 0; level < 5; ++level) {
            const int n = path.grid().steps;
            const auto fwd = stel::forward_flow(rot, path, 0, n, x);
            const auto back = stel::backward_flow(rot, path, 0, n, fwd.terminal);
            per_level.push_back((back.terminal - x).norm());
            if (level < 4) path = stel::refine(path);
        }
        if (errors.empty()) errors.assign(per_level.size(), 0.0);
        for (std::size_t i = 0; i < per_level.size(); ++i) errors[i] += per_level[i] / 4.0;
    }
    REQUIRE(log2_slope(errors) > 0.8);
}

TEST_CASE("shear flow and jacobian match the closed form without noise") {
    const double theta = 0.3;
    const auto shear = stel::make_field("shear_holder", theta);
    const TimeGrid grid(1.0, 512);
    const auto path = stel::sample_path<2>(grid, 9, 0);
    FlowOptions quiet;
    quiet.zero_noise = true;
    const Vec<2> x{0.5, 2.0};
    const auto fwd = stel::forward_flow(shear, path, 0, grid.steps, x, quiet);
    const Vec<2> want{0.5 + std::pow(2.0, theta), 2.0};
    REQUIRE((fwd.terminal - want).norm() < 1e-12);
    // Rough field has no Jacobian evaluator: variational must refuse, bump works.
    REQUIRE_THROWS_AS(stel::jacobian_flow(shear, path, 0, grid.steps, x, FlowDirection::forward,
                                          JacobianMethod::variational),
                      stel::ConfigError);
    const auto jac = stel::jacobian_flow(shear, path, 0, grid.steps, x, FlowDirection::forward,
                                         JacobianMethod::bump, quiet);
    Mat<2> want_j = Mat<2>::Identity();
    want_j(0, 1) = grid.horizon * theta * std::pow(2.0, theta - 1.0);
    REQUIRE((jac.jacobian - want_j).norm() < 1e-5);
    REQUIRE(std::abs(jac.jacobian.determinant() - 1.0) < 1e-6);
}

TEST_CASE("volume preservation for divergence-free drifts") {
    const TimeGrid grid(1.0, 1024);
    const double tol = stel::tol_jac(grid.dt());
    const Vec<2> x{0.4, -0.8};
    for (const char* label : {"rotation", "saddle", "linear_shear", "constant"}) {
        const auto f = stel::make_field(label);
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 8; ++s) {
            const auto path = stel::sample_path<2>(grid, 31, s);
            const auto r = stel::jacobian_flow(f, path, 0, grid.steps, x, FlowDirection::forward);
            REQUIRE(r.jacobian.determinant() > 0.0);
            worst = std::max(worst, std::abs(r.jacobian.determinant() - 1.0));
        }
        INFO(label);
        REQUIRE(worst <= tol);
    }
    // Rotation determinant is exactly (1+dt^2)^n under Euler.
    const auto path = stel::sample_path<2>(grid, 31, 0);
    const auto rot = stel::jacobian_flow(stel::make_field("rotation"), path, 0, grid.steps, x,
                                         FlowDirection::forward);
    const double want = std::pow(1.0 + grid.dt() * grid.dt(), grid.steps);
    REQUIRE(rot.jacobian.determinant() == Catch::Approx(want).epsilon(1e-12));
    // Negative control: the non-solenoidal field inflates volume by e^T.
    const auto bad = stel::jacobian_flow(stel::make_field("nonsolenoidal"), path, 0, grid.steps, x,
                                         FlowDirection::forward);
    REQUIRE(bad.jacobian.determinant() > 2.0);
}

TEST_CASE("variational and bump jacobians agree on smooth fields") {
    const TimeGrid grid(1.0, 128);
    const auto path = stel::sample_path<2>(grid, 17, 2);
    const Vec<2> x{0.2, 0.6};
    // Mollified linear field: kernel quadrature is exact, so the two methods
    // agree to finite-difference truncation.
    const auto mrot = stel::mollify_field(stel::make_field("rotation"), stel::MollifierSpec{0.2, 9});
    const auto var_r = stel::jacobian_flow(mrot, path, 0, grid.steps, x, FlowDirection::backward,
                                           JacobianMethod::variational);
    const auto fd_r = stel::jacobian_flow(mrot, path, 0, grid.steps, x, FlowDirection::backward,
                                          JacobianMethod::bump);
    REQUIRE((var_r.jacobian - fd_r.jacobian).norm() < 1e-6);
    REQUIRE((var_r.terminal - fd_r.terminal).norm() == 0.0);
    // Mollified Hoelder field: the gradient channel integrates b * grad(rho)
    // across a kink, so agreement is limited by kernel quadrature error.
    const auto rough = stel::make_field("shear_holder", 0.3);
    const auto msh = stel::mollify_field(rough, stel::MollifierSpec{0.4, 9});
    const auto var_s = stel::jacobian_flow(msh, path, 0, grid.steps, x, FlowDirection::backward,
                                           JacobianMethod::variational);
    const auto fd_s = stel::jacobian_flow(msh, path, 0, grid.steps, x, FlowDirection::backward,
                                          JacobianMethod::bump);
    REQUIRE((var_s.jacobian - fd_s.jacobian).norm() < 2e-2);
}

TEST_CASE("cofactor inverse is the adjugate") {
    Mat<2> a;
    a << 1.3, -0.4, 2.2, 0.9;
    const Mat<2> c2 = stel::cofactor_inverse<2>(a);
    REQUIRE((c2 * a - a.determinant() * Mat<2>::Identity()).norm() < 1e-12);
    Eigen::Matrix3d b;
    b << 2, -1, 0, 0.5, 3, 1, -2, 0.25, 1.5;
    const auto c3 = stel::cofactor_inverse<3>(b);
    REQUIRE((c3 * b - b.determinant() * Eigen::Matrix3d::Identity()).norm() < 1e-12);
    // Singular input stays finite.
    Mat<2> s;
    s << 1, 2, 2, 4;
    const auto cs = stel::cofactor_inverse<2>(s);
    REQUIRE(cs.allFinite());
    REQUIRE((cs * s).norm() < 1e-12);
}

TEST_CASE("flows report the noise they consumed") {
    const TimeGrid grid(1.0, 64);
    const auto path = stel::sample_path<2>(grid, 3, 1);
    const auto rot = stel::make_field("rotation");
    const Vec<2> x{1.0, 0.0};
    const auto f = stel::forward_flow(rot, path, 8, 40, x);
    const auto b = stel::backward_flow(rot, path, 8, 40, x);
    REQUIRE(f.consumed_noise_checksum == b.consumed_noise_checksum);
    const auto other_span = stel::forward_flow(rot, path, 8, 41, x);
    REQUIRE(f.consumed_noise_checksum != other_span.consumed_noise_checksum);
    const auto other_path = stel::forward_flow(rot, stel::sample_path<2>(grid, 3, 2), 8, 40, x);
    REQUIRE(f.consumed_noise_checksum != other_path.consumed_noise_checksum);
    // Another field on the same span consumes identical noise.
    const auto saddle = stel::forward_flow(stel::make_field("saddle"), path, 8, 40, x);
    REQUIRE(f.consumed_noise_checksum == saddle.consumed_noise_checksum);
}

TEST_CASE("span validation and trajectory storage") {
    const TimeGrid grid(1.0, 32);
    const auto path = stel::sample_path<2>(grid, 1, 0);
    const auto zero = stel::make_field("zero");
    const Vec<2> x = Vec<2>::Zero();
    REQUIRE_THROWS_AS(stel::forward_flow(zero, path, -1, 10, x), stel::ConfigError);
    REQUIRE_THROWS_AS(stel::forward_flow(zero, path, 4, 33, x), stel::ConfigError);
    REQUIRE_THROWS_AS(stel::forward_flow(zero, path, 20, 10, x), stel::ConfigError);
    FlowOptions opt;
    opt.store_trajectory = true;
    const auto r = stel::forward_flow(zero, path, 4, 20, x, opt);
    REQUIRE(r.trajectory.size() == 17);
    REQUIRE(r.trajectory.front() == x);
    REQUIRE(r.trajectory.back() == r.terminal);
}
