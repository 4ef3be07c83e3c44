#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "stel/brownian.hpp"
#include "stel/errors.hpp"
#include "stel/field.hpp"
#include "stel/parallel.hpp"

namespace stel {

// Coupled-flow convergence statistics for a drift sequence b_n -> b:
//   est1: E[ sup_t |D phi^n - D phi|^p ]
//   est2: E[ sup_t |(phi^n - phi)/(1+|x|)|^p ]
//   est3: E[ sup_t |D phi^n|^p ]
// evaluated per (x, s) cell on finite panels, reported as the panel maximum
// with the confidence half-width of the maximizing cell.
template <int D>
struct FlowStatsSpec {
    TimeGrid grid;
    double p = 2.0;
    int samples = 64;
    std::vector<Vec<D>> x_panel;
    std::vector<int> s_indices;
    double bump_scale = 1e-3;  // FD step for drifts without a Jacobian evaluator
    std::uint64_t seed = 0;
    int workers = 1;
};

struct LevelStats {
    double est1 = 0.0, est1_halfwidth = 0.0;
    double est2 = 0.0, est2_halfwidth = 0.0;
    double est3 = 0.0, est3_halfwidth = 0.0;
    int samples = 0;
};

struct FlowStats {
    std::vector<LevelStats> levels;
    double p = 2.0;
    int samples = 0;
};

// Nine points covering [-2,2]^2 plus two far points probing the (1+|x|) weight.
template <int D>
std::vector<Vec<D>> default_stats_panel() {
    static_assert(D == 2, "default panel is two-dimensional");
    std::vector<Vec<D>> panel;
    for (double x : {-2.0, 0.0, 2.0})
        for (double y : {-2.0, 0.0, 2.0}) panel.push_back(Vec<D>{x, y});
    panel.push_back(Vec<D>{10.0, 0.0});
    panel.push_back(Vec<D>{100.0, 0.0});
    return panel;
}

namespace detail {

// One forward integration of both flows on a shared path, tracking the three
// running suprema over grid times in [s, n]. Fields without a Jacobian
// evaluator carry 2D satellite trajectories, so the finite-difference
// Jacobian is available at every node from a single pass.
template <int D>
std::array<double, 3> coupled_cell_sups(const VectorField<D>& fn, const VectorField<D>& fl,
                                        const BrownianPath<D>& path, int s, const Vec<D>& x,
                                        double h) {
    const int n = path.grid().steps;
    const double dt = path.grid().dt();
    const bool var_n = fn.has_jacobian();
    const bool var_l = fl.has_jacobian();

    Vec<D> xn = x, xl = x;
    Mat<D> jn = Mat<D>::Identity(), jl = Mat<D>::Identity();
    std::array<Vec<D>, 2 * D> sat_n, sat_l;
    for (int c = 0; c < D; ++c) {
        Vec<D> e = Vec<D>::Zero();
        e[c] = h;
        sat_n[2 * c] = x + e;
        sat_n[2 * c + 1] = x - e;
        sat_l[2 * c] = sat_n[2 * c];
        sat_l[2 * c + 1] = sat_n[2 * c + 1];
    }

    const double weight = 1.0 / (1.0 + x.norm());
    double sup1 = 0.0, sup2 = 0.0, sup3 = jn.norm();

    for (int k = s; k < n; ++k) {
        const Vec<D> db = path.increment(k);
        if (var_n) jn = (Mat<D>::Identity() + dt * fn.jacobian(xn)) * jn;
        if (var_l) jl = (Mat<D>::Identity() + dt * fl.jacobian(xl)) * jl;
        xn += fn.value(xn) * dt + db;
        xl += fl.value(xl) * dt + db;
        if (!var_n)
            for (auto& y : sat_n) y += fn.value(y) * dt + db;
        if (!var_l)
            for (auto& y : sat_l) y += fl.value(y) * dt + db;
        if (!var_n)
            for (int c = 0; c < D; ++c)
                jn.col(c) = (sat_n[2 * c] - sat_n[2 * c + 1]) / (2.0 * h);
        if (!var_l)
            for (int c = 0; c < D; ++c)
                jl.col(c) = (sat_l[2 * c] - sat_l[2 * c + 1]) / (2.0 * h);
        if (!(xn.allFinite() && xl.allFinite()))
            throw NumericsError("flow stats: non-finite state at step " + std::to_string(k));
        sup1 = std::max(sup1, (jn - jl).norm());
        sup2 = std::max(sup2, (xn - xl).norm() * weight);
        sup3 = std::max(sup3, jn.norm());
    }
    return {sup1, sup2, sup3};
}

}  // namespace detail

template <int D>
FlowStats flow_convergence_stats(const std::vector<VectorField<D>>& sequence,
                                 const VectorField<D>& limit, FlowStatsSpec<D> spec) {
    if (spec.samples < 16) throw ConfigError("flow_convergence_stats: need >= 16 samples");
    if (spec.p < 1.0) throw ConfigError("flow_convergence_stats: need p >= 1");
    if (spec.x_panel.empty()) spec.x_panel = default_stats_panel<D>();
    if (spec.s_indices.empty())
        spec.s_indices = {0, spec.grid.steps / 4, spec.grid.steps / 2};
    for (int s : spec.s_indices)
        if (s < 0 || s >= spec.grid.steps)
            throw ConfigError("flow_convergence_stats: s index outside [0, steps)");
    if (spec.bump_scale <= 0.0)
        throw ConfigError("flow_convergence_stats: bump scale must be positive");

    const int cells = static_cast<int>(spec.x_panel.size() * spec.s_indices.size());
    FlowStats stats;
    stats.p = spec.p;
    stats.samples = spec.samples;

    for (const auto& fn : sequence) {
        // slot[sample * cells + cell] = {sup1^p, sup2^p, sup3^p}
        std::vector<std::array<double, 3>> slot(
            static_cast<std::size_t>(spec.samples) * cells);
        parallel_for_index(spec.samples, spec.workers, [&](int i) {
            const auto path =
                sample_path<D>(spec.grid, spec.seed, static_cast<std::uint64_t>(i));
            int cell = 0;
            for (int s : spec.s_indices)
                for (const Vec<D>& x : spec.x_panel) {
                    const auto sups =
                        detail::coupled_cell_sups(fn, limit, path, s, x, spec.bump_scale);
                    slot[static_cast<std::size_t>(i) * cells + cell] = {
                        std::pow(sups[0], spec.p), std::pow(sups[1], spec.p),
                        std::pow(sups[2], spec.p)};
                    ++cell;
                }
        });

        LevelStats level;
        level.samples = spec.samples;
        for (int quantity = 0; quantity < 3; ++quantity) {
            double best_mean = -1.0, best_hw = 0.0;
            for (int cell = 0; cell < cells; ++cell) {
                double mean = 0.0;
                for (int i = 0; i < spec.samples; ++i)
                    mean += slot[static_cast<std::size_t>(i) * cells + cell][quantity];
                mean /= spec.samples;
                double var = 0.0;
                for (int i = 0; i < spec.samples; ++i) {
                    const double d =
                        slot[static_cast<std::size_t>(i) * cells + cell][quantity] - mean;
                    var += d * d;
                }
                var /= (spec.samples - 1);
                const double hw = 1.96 * std::sqrt(var / spec.samples);
                if (mean > best_mean) {
                    best_mean = mean;
                    best_hw = hw;
                }
            }
            if (quantity == 0) {
                level.est1 = best_mean;
                level.est1_halfwidth = best_hw;
            } else if (quantity == 1) {
                level.est2 = best_mean;
                level.est2_halfwidth = best_hw;
            } else {
                level.est3 = best_mean;
                level.est3_halfwidth = best_hw;
            }
        }
        stats.levels.push_back(level);
    }
    return stats;
}

}  // namespace stel
