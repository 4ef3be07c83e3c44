#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "stel/brownian.hpp"
#include "stel/errors.hpp"
#include "stel/field.hpp"
#include "stel/linalg.hpp"

namespace stel {

enum class FlowDirection { forward, backward };
enum class JacobianMethod { automatic, variational, bump };

struct FlowOptions {
    bool store_trajectory = false;
    bool zero_noise = false;     // debug: drop the noise term entirely
    double bump_scale = -1.0;    // FD step; < 0 means sqrt(eps_mach) * (1 + |x|)
};

template <int D>
struct FlowResult {
    Vec<D> terminal = Vec<D>::Zero();
    Mat<D> jacobian = Mat<D>::Identity();
    bool jacobian_valid = false;
    std::vector<Vec<D>> trajectory;  // filled only when requested
    std::uint64_t consumed_noise_checksum = 0;
};

// Jacobian tolerance used by the volume-preservation checks: |det - 1| for a
// divergence-free drift may drift by O(dt) per unit time under Euler stepping.
inline double tol_jac(double dt) { return std::max(5e-3, 5.0 * dt); }

namespace detail {

template <int D>
void check_span(const TimeGrid& grid, int s, int t) {
    if (s < 0 || t > grid.steps || s > t)
        throw ConfigError("flow: need 0 <= s_index <= t_index <= steps");
}

template <int D>
std::uint64_t span_checksum(const BrownianPath<D>& path, int s, int t, bool zero_noise) {
    Checksum c;
    if (!zero_noise)
        for (int k = s; k < t; ++k) c.add<D>(path.increment(k));
    return c.value();
}

// One Euler-Maruyama sweep. Forward marches s -> t accumulating +b dt + dB;
// backward marches t -> s accumulating -b dt - dB. When jac is non-null the
// variational factor (I +/- Db dt) is applied at every step, evaluated at the
// same state the drift uses.
template <int D>
FlowResult<D> integrate(const VectorField<D>& f, const BrownianPath<D>& path, int s, int t,
                        const Vec<D>& x0, FlowDirection dir, const FlowOptions& opt,
                        Mat<D>* jac) {
    check_span<D>(path.grid(), s, t);
    if (jac && !f.has_jacobian())
        throw ConfigError("flow: variational Jacobian requires a field Jacobian evaluator");
    const double dt = path.grid().dt();
    FlowResult<D> out;
    Vec<D> x = x0;
    Mat<D> j = Mat<D>::Identity();
    if (opt.store_trajectory) out.trajectory.push_back(x);
    const int steps = t - s;
    for (int i = 0; i < steps; ++i) {
        const int k = (dir == FlowDirection::forward) ? s + i : t - 1 - i;
        if (jac) {
            const Mat<D> db = f.jacobian(x);
            if (dir == FlowDirection::forward)
                j = (Mat<D>::Identity() + dt * db) * j;
            else
                j = (Mat<D>::Identity() - dt * db) * j;
        }
        Vec<D> step = f.value(x) * dt;
        if (!opt.zero_noise) step += path.increment(k);
        x += (dir == FlowDirection::forward) ? step : Vec<D>(-step);
        for (int c = 0; c < D; ++c)
            if (!std::isfinite(x[c])) throw NumericsError("flow: non-finite state at step " + std::to_string(k));
        if (opt.store_trajectory) out.trajectory.push_back(x);
    }
    out.terminal = x;
    if (jac) *jac = j;
    out.consumed_noise_checksum = span_checksum(path, s, t, opt.zero_noise);
    return out;
}

}  // namespace detail

// X_{s,t}(x): state at index t of the forward SDE started at index s.
template <int D>
FlowResult<D> forward_flow(const VectorField<D>& f, const BrownianPath<D>& path, int s_index,
                           int t_index, const Vec<D>& x, const FlowOptions& opt = {}) {
    return detail::integrate<D>(f, path, s_index, t_index, x, FlowDirection::forward, opt, nullptr);
}

// Y_{s,t}(x): backward characteristic through (t, x), reported at index s.
// Consumes exactly the increments of [s, t), in reverse order.
template <int D>
FlowResult<D> backward_flow(const VectorField<D>& f, const BrownianPath<D>& path, int s_index,
                            int t_index, const Vec<D>& x, const FlowOptions& opt = {}) {
    return detail::integrate<D>(f, path, s_index, t_index, x, FlowDirection::backward, opt, nullptr);
}

// Flow map plus its spatial Jacobian. "automatic" picks the variational
// equation when the field carries a Jacobian evaluator and the bump
// (central-difference ensemble on the same noise) otherwise.
template <int D>
FlowResult<D> jacobian_flow(const VectorField<D>& f, const BrownianPath<D>& path, int s_index,
                            int t_index, const Vec<D>& x, FlowDirection dir,
                            JacobianMethod method = JacobianMethod::automatic,
                            const FlowOptions& opt = {}) {
    if (method == JacobianMethod::automatic)
        method = f.has_jacobian() ? JacobianMethod::variational : JacobianMethod::bump;
    if (method == JacobianMethod::variational) {
        Mat<D> j;
        FlowResult<D> out = detail::integrate<D>(f, path, s_index, t_index, x, dir, opt, &j);
        out.jacobian = j;
        out.jacobian_valid = true;
        return out;
    }
    FlowResult<D> center = detail::integrate<D>(f, path, s_index, t_index, x, dir, opt, nullptr);
    const double h = (opt.bump_scale > 0.0)
                         ? opt.bump_scale
                         : std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
    FlowOptions inner = opt;
    inner.store_trajectory = false;
    Mat<D> j;
    for (int i = 0; i < D; ++i) {
        Vec<D> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const Vec<D> fp = detail::integrate<D>(f, path, s_index, t_index, xp, dir, inner, nullptr).terminal;
        const Vec<D> fm = detail::integrate<D>(f, path, s_index, t_index, xm, dir, inner, nullptr).terminal;
        j.col(i) = (fp - fm) / (2.0 * h);
    }
    center.jacobian = j;
    center.jacobian_valid = true;
    return center;
}

// det(J) * J^{-1} in cofactor form; finite even for singular J.
template <int D>
Mat<D> cofactor_inverse(const Mat<D>& j) {
    return cofactor_transpose<D>(j);
}

}  // namespace stel
