#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "stel/brownian.hpp"
#include "stel/errors.hpp"
#include "stel/field.hpp"
#include "stel/flow.hpp"
#include "stel/parallel.hpp"
#include "stel/quadrature.hpp"

namespace stel {

// u(t, x) = u0(Y_{0,t}(x)) along backward characteristics of dX = b dt + dB.
template <int D>
struct TransportSolution {
    VectorField<D> drift;
    ScalarDatum<D> datum;
    TimeGrid grid;
    std::uint64_t seed = 0;
    bool zero_noise = false;
    JacobianMethod gradient_method = JacobianMethod::automatic;
    double bump_scale = -1.0;  // FD step for bump gradients; < 0 -> default
};

// Evaluates Y_{0,t}(.) and DY_{0,t}(.) for one (sample, t) pair, amortizing
// the Brownian path across many spatial arguments. For affine drifts the
// Euler map itself is affine, so a single trajectory plus the variational
// Jacobian reconstructs every point exactly; otherwise each point integrates
// its own backward characteristic on the shared path.
template <int D>
class BackwardBatch {
public:
    BackwardBatch(const TransportSolution<D>& sol, int t_index, std::uint64_t sample)
        : sol_(&sol), t_(t_index) {
        validate();
        if (t_ == 0) return;
        path_ = sample_path<D>(sol.grid, sol.seed, sample);
        prepare();
    }

    // Same batch driven by an externally supplied path (e.g. a bridge
    // refinement); the path must live on the solution's grid.
    BackwardBatch(const TransportSolution<D>& sol, int t_index, const BrownianPath<D>& path)
        : sol_(&sol), t_(t_index) {
        validate();
        if (t_ == 0) return;
        if (path.grid().steps != sol.grid.steps ||
            path.grid().horizon != sol.grid.horizon)
            throw ConfigError("BackwardBatch: path grid does not match the solution grid");
        path_ = path;
        prepare();
    }

    [[nodiscard]] Vec<D> point(const Vec<D>& x) const {
        if (identity_) return x;
        if (affine_) return offset_ + linear_ * x;
        return backward_flow(sol_->drift, path_, 0, t_, x, options_).terminal;
    }

    [[nodiscard]] std::pair<Vec<D>, Mat<D>> point_jacobian(const Vec<D>& x) const {
        if (identity_) return {x, Mat<D>::Identity()};
        if (affine_) return {Vec<D>(offset_ + linear_ * x), linear_};
        const auto r = jacobian_flow(sol_->drift, path_, 0, t_, x, FlowDirection::backward,
                                     sol_->gradient_method, options_);
        return {r.terminal, r.jacobian};
    }

private:
    void validate() {
        if (t_ < 0 || t_ > sol_->grid.steps)
            throw ConfigError("BackwardBatch: t_index outside [0, steps]");
        identity_ = (t_ == 0);
    }

    void prepare() {
        options_.zero_noise = sol_->zero_noise;
        options_.bump_scale = sol_->bump_scale;
        if (sol_->drift.affine) {
            const Vec<D> origin = Vec<D>::Zero();
            const auto r = jacobian_flow(sol_->drift, path_, 0, t_, origin,
                                         FlowDirection::backward, JacobianMethod::variational,
                                         options_);
            offset_ = r.terminal;
            linear_ = r.jacobian;
            affine_ = true;
        }
    }

    const TransportSolution<D>* sol_;
    int t_;
    bool identity_ = false;
    bool affine_ = false;
    Vec<D> offset_ = Vec<D>::Zero();
    Mat<D> linear_ = Mat<D>::Identity();
    BrownianPath<D> path_;
    FlowOptions options_;
};

template <int D>
double solution_value(const TransportSolution<D>& sol, int t_index, const Vec<D>& x,
                      std::uint64_t sample) {
    const BackwardBatch<D> batch(sol, t_index, sample);
    return sol.datum.value(batch.point(x));
}

// grad u(t, x) = DY^T grad u0 (Y), by the chain rule along characteristics.
template <int D>
Vec<D> solution_gradient(const TransportSolution<D>& sol, int t_index, const Vec<D>& x,
                         std::uint64_t sample) {
    const BackwardBatch<D> batch(sol, t_index, sample);
    const auto [y, jac] = batch.point_jacobian(x);
    return jac.transpose() * sol.datum.gradient(y);
}

// Default quadrature box, halfwidth L = 6 (support + sqrt(T)): six noise
// standard deviations past the datum support, with an 8-unit stand-in for
// infinite-support data.
template <int D>
QuadratureBox<D> default_quadrature_box(const TransportSolution<D>& sol, int m = 64) {
    const double support = std::isfinite(sol.datum.support_radius)
                               ? sol.datum.support_radius
                               : 8.0;
    return QuadratureBox<D>(Vec<D>::Zero(), 6.0 * (support + std::sqrt(sol.grid.horizon)), m);
}

struct NormEstimate {
    double value = 0.0;
    double ci_halfwidth = 0.0;
    double leakage = 0.0;            // estimated fraction of mass outside the box
    bool truncation_warning = false; // leakage above 5 percent
    int samples = 0;
};

namespace detail {

// Conservative leakage bound. The box certainly captures the datum mass whose
// preimage lies inside it; the ball around the center preimage y_c with radius
// equal to the nearest boundary preimage is a computable inner region, so
//   leakage <= 1 - mass(ball(y_c, r_inner)) / mass(R^d),
// evaluated on the time-zero density (|u0| or |grad u0|). Worst case over a
// few noise samples; diagnostic only, exact for near-affine flows.
template <int D>
double leakage_fraction(const TransportSolution<D>& sol, int t_index,
                        const QuadratureBox<D>& box, int samples, bool gradient_mass,
                        double p) {
    const double support = std::isfinite(sol.datum.support_radius)
                               ? sol.datum.support_radius
                               : 8.0;
    const QuadratureBox<D> ref(Vec<D>::Zero(), support, 96);
    std::vector<double> mass(static_cast<std::size_t>(ref.size()));
    double total = 0.0;
    for (std::int64_t i = 0; i < ref.size(); ++i) {
        const Vec<D> y = ref.node(i);
        const double density = gradient_mass ? sol.datum.gradient(y).norm()
                                             : std::abs(sol.datum.value(y));
        mass[static_cast<std::size_t>(i)] = ref.weight(i) * std::pow(density, p);
        total += mass[static_cast<std::size_t>(i)];
    }
    if (total <= 1e-300) return 0.0;

    const int probes = 16;
    double leak = 0.0;
    for (int s = 0; s < std::min(samples, 4); ++s) {
        const BackwardBatch<D> batch(sol, t_index, static_cast<std::uint64_t>(s));
        const Vec<D> y_c = batch.point(box.center());
        double r_inner = std::numeric_limits<double>::infinity();
        for (int face = 0; face < 2 * D; ++face) {
            const int axis = face / 2;
            const double side = (face % 2 == 0) ? -1.0 : 1.0;
            for (int i = 0; i < probes; ++i) {
                Vec<D> x = box.center();
                x[axis] += side * box.halfwidth();
                for (int c = 0; c < D; ++c) {
                    if (c == axis) continue;
                    x[c] += box.halfwidth() * ((i + 0.5) / probes * 2.0 - 1.0);
                }
                r_inner = std::min(r_inner, (batch.point(x) - y_c).norm());
            }
        }
        double captured = 0.0;
        for (std::int64_t i = 0; i < ref.size(); ++i)
            if ((ref.node(i) - y_c).norm() < r_inner)
                captured += mass[static_cast<std::size_t>(i)];
        leak = std::max(leak, 1.0 - captured / total);
    }
    return leak;
}

template <int D, typename Integrand>
NormEstimate mc_quadrature_norm(const TransportSolution<D>& sol, int t_index, double p,
                                const QuadratureBox<D>& box, int samples, int workers,
                                bool gradient_mass, Integrand&& integrand) {
    if (samples < 1) throw ConfigError("norm estimate: need at least one sample");
    if (p < 1.0) throw ConfigError("norm estimate: need p >= 1");
    std::vector<double> slot(static_cast<std::size_t>(samples), 0.0);
    parallel_for_index(samples, workers, [&](int s) {
        const BackwardBatch<D> batch(sol, t_index, static_cast<std::uint64_t>(s));
        double acc = 0.0;
        for (std::int64_t i = 0; i < box.size(); ++i)
            acc += box.weight(i) * integrand(batch, box.node(i));
        slot[static_cast<std::size_t>(s)] = acc;
    });
    NormEstimate est;
    est.samples = samples;
    double mean = 0.0;
    for (double v : slot) mean += v;
    mean /= samples;
    est.value = mean;
    if (samples > 1) {
        double var = 0.0;
        for (double v : slot) var += (v - mean) * (v - mean);
        var /= (samples - 1);
        est.ci_halfwidth = 1.96 * std::sqrt(var / samples);
    }
    est.leakage = leakage_fraction(sol, t_index, box, samples, gradient_mass, p);
    est.truncation_warning = est.leakage > 0.05;
    return est;
}

}  // namespace detail

// Monte Carlo / quadrature estimate of E integral |u(t, .)|^p over the box.
template <int D>
NormEstimate lp_norm(const TransportSolution<D>& sol, int t_index, double p,
                     const QuadratureBox<D>& box, int samples, int workers = 1) {
    return detail::mc_quadrature_norm(sol, t_index, p, box, samples, workers, false,
                                      [&sol, p](const BackwardBatch<D>& batch, const Vec<D>& x) {
                                          const double v = sol.datum.value(batch.point(x));
                                          return std::pow(std::abs(v), p);
                                      });
}

// E integral |grad u(t, .)|^p over the box (first-order Sobolev seminorm).
template <int D>
NormEstimate sobolev_seminorm(const TransportSolution<D>& sol, int t_index, double p,
                              const QuadratureBox<D>& box, int samples, int workers = 1) {
    return detail::mc_quadrature_norm(
        sol, t_index, p, box, samples, workers, true,
        [&sol, p](const BackwardBatch<D>& batch, const Vec<D>& x) {
            const auto [y, jac] = batch.point_jacobian(x);
            const Vec<D> g = jac.transpose() * sol.datum.gradient(y);
            return std::pow(g.norm(), p);
        });
}

struct NormPair {
    NormEstimate lp;
    NormEstimate sobolev;
};

// L^p norm and Sobolev seminorm from a single backward sweep per sample, so
// each characteristic is integrated once instead of twice.
template <int D>
NormPair norm_pair(const TransportSolution<D>& sol, int t_index, double p,
                   const QuadratureBox<D>& box, int samples, int workers = 1) {
    if (samples < 1) throw ConfigError("norm estimate: need at least one sample");
    if (p < 1.0) throw ConfigError("norm estimate: need p >= 1");
    std::vector<double> slot_lp(static_cast<std::size_t>(samples), 0.0);
    std::vector<double> slot_w(static_cast<std::size_t>(samples), 0.0);
    parallel_for_index(samples, workers, [&](int s) {
        const BackwardBatch<D> batch(sol, t_index, static_cast<std::uint64_t>(s));
        double acc_lp = 0.0;
        double acc_w = 0.0;
        for (std::int64_t i = 0; i < box.size(); ++i) {
            const auto [y, jac] = batch.point_jacobian(box.node(i));
            const double v = sol.datum.value(y);
            const Vec<D> g = jac.transpose() * sol.datum.gradient(y);
            acc_lp += box.weight(i) * std::pow(std::abs(v), p);
            acc_w += box.weight(i) * std::pow(g.norm(), p);
        }
        slot_lp[static_cast<std::size_t>(s)] = acc_lp;
        slot_w[static_cast<std::size_t>(s)] = acc_w;
    });
    auto finish = [&](const std::vector<double>& slot, bool gradient_mass) {
        NormEstimate est;
        est.samples = samples;
        double mean = 0.0;
        for (double v : slot) mean += v;
        mean /= samples;
        est.value = mean;
        if (samples > 1) {
            double var = 0.0;
            for (double v : slot) var += (v - mean) * (v - mean);
            var /= (samples - 1);
            est.ci_halfwidth = 1.96 * std::sqrt(var / samples);
        }
        est.leakage = detail::leakage_fraction(sol, t_index, box, samples, gradient_mass, p);
        est.truncation_warning = est.leakage > 0.05;
        return est;
    };
    return NormPair{finish(slot_lp, false), finish(slot_w, true)};
}

}  // namespace stel
