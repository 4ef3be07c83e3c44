#pragma once

#include <cstdint>
#include <vector>

#include "stel/errors.hpp"
#include "stel/linalg.hpp"
#include "stel/rng.hpp"

namespace stel {

// Uniform grid on [0, T] with a power-of-two step count, so dyadic refinement
// and time lookups stay exact in floating point.
struct TimeGrid {
    double horizon = 1.0;
    int steps = 2;

    TimeGrid() = default;
    TimeGrid(double T, int n) : horizon(T), steps(n) {
        if (!(T > 0.0)) throw ConfigError("TimeGrid: horizon must be positive");
        if (n < 2 || (n & (n - 1)) != 0 || n > (1 << 24))
            throw ConfigError("TimeGrid: steps must be a power of two in [2, 2^24]");
    }

    [[nodiscard]] double dt() const { return horizon / steps; }
    [[nodiscard]] double time(int k) const {
        return horizon * (static_cast<double>(k) / steps);
    }
};

// Brownian sample path identified by (seed, sample_index). Grid positions are
// the ground truth; increments are differences of positions. Bridge
// refinement copies every coarse position bitwise into the fine path, which is
// what makes dt-ladder comparisons couple exactly instead of approximately.
template <int D>
class BrownianPath {
public:
    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t sample_index() const { return sample_; }
    [[nodiscard]] int refinement_level() const { return level_; }

    [[nodiscard]] Vec<D> position(int k) const {
        if (k < 0 || k > grid_.steps)
            throw ConfigError("BrownianPath::position: index outside [0, steps]");
        return positions_[static_cast<std::size_t>(k)];
    }

    [[nodiscard]] Vec<D> increment(int k) const {
        if (k < 0 || k >= grid_.steps)
            throw ConfigError("BrownianPath::increment: index outside [0, steps)");
        return positions_[static_cast<std::size_t>(k) + 1] - positions_[static_cast<std::size_t>(k)];
    }

    // Bit-level digest of all positions; equal digests mean equal paths.
    [[nodiscard]] std::uint64_t checksum() const {
        Checksum c;
        for (const auto& p : positions_) c.add<D>(p);
        return c.value();
    }

    template <int E>
    friend BrownianPath<E> sample_path(const TimeGrid&, std::uint64_t, std::uint64_t);
    template <int E>
    friend BrownianPath<E> refine(const BrownianPath<E>&);

private:
    TimeGrid grid_;
    std::uint64_t seed_ = 0;
    std::uint64_t sample_ = 0;
    int level_ = 0;
    std::vector<Vec<D>> positions_;
};

template <int D>
BrownianPath<D> sample_path(const TimeGrid& grid, std::uint64_t seed, std::uint64_t sample_index) {
    BrownianPath<D> path;
    path.grid_ = grid;
    path.seed_ = seed;
    path.sample_ = sample_index;
    path.level_ = 0;
    path.positions_.resize(static_cast<std::size_t>(grid.steps) + 1);
    path.positions_[0] = Vec<D>::Zero();
    NormalStream draws(seed, sample_index, 0);
    const double root_dt = std::sqrt(grid.dt());
    for (int k = 0; k < grid.steps; ++k) {
        Vec<D> step;
        for (int c = 0; c < D; ++c)
            step[c] = root_dt * draws.at(static_cast<std::uint64_t>(k) * D + c);
        path.positions_[static_cast<std::size_t>(k) + 1] =
            path.positions_[static_cast<std::size_t>(k)] + step;
    }
    return path;
}

// Conditional midpoint insertion: B(mid) | endpoints ~ N(average, dt_coarse/4).
// Refinement draws live on stream = level, so every level refines the same
// underlying randomness regardless of how many times refine() is called.
template <int D>
BrownianPath<D> refine(const BrownianPath<D>& coarse) {
    const int n = coarse.grid_.steps;
    if (2 * n > (1 << 24)) throw ConfigError("refine: step count beyond 2^24");
    BrownianPath<D> fine;
    fine.grid_ = TimeGrid(coarse.grid_.horizon, 2 * n);
    fine.seed_ = coarse.seed_;
    fine.sample_ = coarse.sample_;
    fine.level_ = coarse.level_ + 1;
    fine.positions_.resize(static_cast<std::size_t>(2 * n) + 1);
    NormalStream draws(coarse.seed_, coarse.sample_, static_cast<std::uint64_t>(fine.level_));
    const double half_sd = 0.5 * std::sqrt(coarse.grid_.dt());
    for (int j = 0; j < n; ++j) {
        const Vec<D>& left = coarse.positions_[static_cast<std::size_t>(j)];
        const Vec<D>& right = coarse.positions_[static_cast<std::size_t>(j) + 1];
        fine.positions_[static_cast<std::size_t>(2 * j)] = left;
        Vec<D> mid;
        for (int c = 0; c < D; ++c) {
            const double xi = draws.at(static_cast<std::uint64_t>(j) * D + c);
            mid[c] = 0.5 * (left[c] + right[c]) + half_sd * xi;
        }
        fine.positions_[static_cast<std::size_t>(2 * j) + 1] = mid;
    }
    fine.positions_[static_cast<std::size_t>(2 * n)] = coarse.positions_[static_cast<std::size_t>(n)];
    return fine;
}

template <int D>
Vec<D> increment(const BrownianPath<D>& path, int k) {
    return path.increment(k);
}

template <int D>
Vec<D> position(const BrownianPath<D>& path, int k) {
    return path.position(k);
}

}  // namespace stel
