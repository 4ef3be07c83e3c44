#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stel/errors.hpp"
#include "stel/linalg.hpp"
#include "stel/profiles.hpp"
#include "stel/quadrature.hpp"
#include "stel/quasirandom.hpp"

namespace stel {

enum class Smoothness { compactly_smooth, sobolev_only };

// Drift field b : R^D -> R^D. The Jacobian evaluator may be absent for rough
// (Hölder) fields; integrators that need it fall back to finite differences.
// Affine fields additionally carry their (A, c) representation so bulk
// estimators can reconstruct whole flow maps from a single trajectory.
template <int D>
struct VectorField {
    static constexpr int dimension = D;
    std::function<Vec<D>(const Vec<D>&)> value;
    std::function<Mat<D>(const Vec<D>&)> jacobian;  // empty when unavailable
    double holder_exponent = 1.0;
    bool divergence_free = false;
    std::string label;

    bool affine = false;  // b(x) = affine_matrix * x + affine_shift, exactly
    Mat<D> affine_matrix = Mat<D>::Zero();
    Vec<D> affine_shift = Vec<D>::Zero();

    [[nodiscard]] bool has_jacobian() const { return static_cast<bool>(jacobian); }
};

template <int D>
struct ScalarDatum {
    static constexpr int dimension = D;
    std::function<double(const Vec<D>&)> value;
    std::function<Vec<D>(const Vec<D>&)> gradient;
    double support_radius = std::numeric_limits<double>::infinity();
    Smoothness smoothness = Smoothness::sobolev_only;
    std::string label;
};

// Mollifier rho_eps, a fixed C_c^infty bump scaled to support eps, applied by
// tensor Gauss-Legendre quadrature with nodes_per_axis points per axis. The
// kernel is normalized against this same rule, so convolving a constant
// reproduces it exactly rather than up to quadrature error.
struct MollifierSpec {
    double epsilon = 0.1;
    int nodes_per_axis = 9;
};

// Radial cutoff eta_R: identically 1 on |x| <= R, 0 beyond 2R.
struct CutoffSpec {
    double radius = 1.0;
};

namespace detail {

template <int D>
struct KernelRule {
    std::vector<Vec<D>> nodes;          // in [-1, 1]^D
    std::vector<double> weights;        // quadrature weight x kernel value, sum = 1
    std::vector<Vec<D>> grad_weights;   // discrete grad-rho weights, before 1/eps
};

// Both channels are normalized against this same discrete rule: the value
// weights sum to exactly 1 and the gradient weights reproduce derivatives of
// affine fields exactly (discrete integration-by-parts identity enforced).
template <int D>
KernelRule<D> kernel_rule(int m) {
    if (m < 3) throw ConfigError("mollifier: need at least 3 quadrature nodes per axis");
    const QuadratureBox<D> box(Vec<D>::Zero(), 1.0, m, BoxRule::gauss);
    KernelRule<D> rule;
    rule.nodes.reserve(box.size());
    rule.weights.reserve(box.size());
    rule.grad_weights.reserve(box.size());
    double norm = 0.0;
    double grad_norm = 0.0;
    for (std::int64_t i = 0; i < box.size(); ++i) {
        const Vec<D> u = box.node(i);
        const auto prof = bump_profile(u.squaredNorm());
        const double w = box.weight(i) * prof.value;
        if (w == 0.0) continue;
        rule.nodes.push_back(u);
        rule.weights.push_back(w);
        rule.grad_weights.push_back(box.weight(i) * prof.d1 * 2.0 * u);
        norm += w;
        grad_norm -= box.weight(i) * prof.d1 * 2.0 * u[0] * u[0];
    }
    for (double& w : rule.weights) w /= norm;
    for (auto& g : rule.grad_weights) g /= grad_norm;
    return rule;
}

inline std::string format_eps(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", eps);
    return buf;
}

}  // namespace detail

template <int D>
Vec<D> evaluate_field(const VectorField<D>& f, const Vec<D>& x) {
    return f.value(x);
}

// Central-difference divergence.
template <int D>
double divergence_estimate(const VectorField<D>& f, const Vec<D>& x, double h = 1e-4) {
    double div = 0.0;
    for (int i = 0; i < D; ++i) {
        Vec<D> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        div += (f.value(xp)[i] - f.value(xm)[i]) / (2.0 * h);
    }
    return div;
}

struct HolderSamplerSpec {
    int centers = 64;        // quasi-random centers in the sampling box
    int scales = 21;         // pair separations 2^{-k}, k = 0 .. scales-1
    double box_halfwidth = 5.0;
};

// Weighted Hölder norm estimate: sup |b(x)|/(1+|x|) plus the theta-seminorm
// over pairs at most distance 1 apart. Each (center, scale) cell contributes
// two pairs: one anchored at the fixed center, one at the center shrunk to the
// pair scale. The shrunk family is what lets the estimate diverge when the
// test exponent exceeds the field's true regularity at a small-scale feature.
// Sample sets are prefix-nested, so the estimate is monotone nondecreasing in
// both centers and scales.
struct HolderNormEstimate {
    double weighted_sup = 0.0;
    double seminorm = 0.0;
    [[nodiscard]] double total() const { return weighted_sup + seminorm; }
};

template <int D>
HolderNormEstimate holder_norm_estimate(const VectorField<D>& f, double theta,
                                        const HolderSamplerSpec& spec = {}) {
    if (theta <= 0.0 || theta > 1.0) throw ConfigError("holder_norm_estimate: theta outside (0,1]");
    if (spec.centers < 1 || spec.scales < 1)
        throw ConfigError("holder_norm_estimate: empty sampler");
    const QuasiRandomSequence<D> seq;
    const QuasiRandomSequence<D> dir_seq;  // same sequence, offset indices for directions
    HolderNormEstimate est;
    for (int j = 0; j < spec.centers; ++j) {
        const Vec<D> x = seq.box(static_cast<std::uint64_t>(j), Vec<D>::Zero(), spec.box_halfwidth);
        est.weighted_sup = std::max(est.weighted_sup, f.value(x).norm() / (1.0 + x.norm()));
        Vec<D> u = dir_seq.unit(static_cast<std::uint64_t>(j) + 4096) * 2.0 - Vec<D>::Ones();
        if (u.norm() < 1e-12) u = Vec<D>::Unit(0);
        u.normalize();
        const Vec<D> unit_center = x / spec.box_halfwidth;
        for (int k = 0; k < spec.scales; ++k) {
            const double r = std::ldexp(1.0, -k);
            const Vec<D> y = x + r * u;
            est.weighted_sup = std::max(est.weighted_sup, f.value(y).norm() / (1.0 + y.norm()));
            const double scale_pow = std::pow(r, theta);
            est.seminorm = std::max(est.seminorm, (f.value(x) - f.value(y)).norm() / scale_pow);
            const Vec<D> xs = r * unit_center;
            const Vec<D> ys = xs + r * u;
            est.seminorm = std::max(est.seminorm, (f.value(xs) - f.value(ys)).norm() / scale_pow);
        }
    }
    return est;
}

// b * rho_eps by quadrature; the Jacobian channel convolves with the kernel
// gradient, so mollified fields always carry an exact-derivative evaluator.
template <int D>
VectorField<D> mollify_field(const VectorField<D>& f, const MollifierSpec& spec) {
    if (spec.epsilon <= 0.0) throw ConfigError("mollify_field: epsilon must be positive");
    const auto rule = detail::kernel_rule<D>(spec.nodes_per_axis);
    const double eps = spec.epsilon;
    const auto base = f.value;

    VectorField<D> out;
    out.value = [base, rule, eps](const Vec<D>& x) {
        Vec<D> acc = Vec<D>::Zero();
        for (std::size_t j = 0; j < rule.nodes.size(); ++j)
            acc += rule.weights[j] * base(x - eps * rule.nodes[j]);
        return acc;
    };
    // d/dx_k (b_i * rho)(x) = (b_i * d_k rho)(x), using the discretely
    // normalized gradient weights.
    out.jacobian = [base, rule, eps](const Vec<D>& x) {
        Mat<D> acc = Mat<D>::Zero();
        for (std::size_t j = 0; j < rule.nodes.size(); ++j)
            acc += base(x - eps * rule.nodes[j]) * (rule.grad_weights[j] / eps).transpose();
        return acc;
    };
    out.holder_exponent = f.holder_exponent;
    out.divergence_free = f.divergence_free;
    out.label = f.label + "*rho(" + detail::format_eps(eps) + ")";
    return out;
}

// eta(eps x) * (u0 * rho_eps): mollify, then cut off at the widening radius
// 2/eps. The gradient uses the product rule with (grad u0) * rho_eps.
template <int D>
ScalarDatum<D> mollify_datum(const ScalarDatum<D>& u0, const MollifierSpec& spec) {
    if (spec.epsilon <= 0.0) throw ConfigError("mollify_datum: epsilon must be positive");
    const auto rule = detail::kernel_rule<D>(spec.nodes_per_axis);
    const double eps = spec.epsilon;
    const auto value = u0.value;
    const auto gradient = u0.gradient;

    ScalarDatum<D> out;
    out.value = [value, rule, eps](const Vec<D>& x) {
        const double cut = smooth_step(2.0 - eps * x.norm()).g;
        if (cut == 0.0) return 0.0;
        double acc = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j)
            acc += rule.weights[j] * value(x - eps * rule.nodes[j]);
        return cut * acc;
    };
    out.gradient = [value, gradient, rule, eps](const Vec<D>& x) {
        const double r = x.norm();
        const auto step = smooth_step(2.0 - eps * r);
        Vec<D> g = Vec<D>::Zero();
        if (step.g == 0.0) return g;
        double conv = 0.0;
        Vec<D> conv_grad = Vec<D>::Zero();
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const Vec<D> y = x - eps * rule.nodes[j];
            conv += rule.weights[j] * value(y);
            conv_grad += rule.weights[j] * gradient(y);
        }
        if (r > 1e-300) g = step.dg * (-eps / r) * conv * x;
        g += step.g * conv_grad;
        return g;
    };
    const double conv_support = u0.support_radius + eps;
    out.support_radius = std::min(conv_support, 2.0 / eps);
    out.smoothness = Smoothness::compactly_smooth;
    out.label = u0.label + "*rho(" + detail::format_eps(eps) + ")";
    return out;
}

namespace detail {
inline void check_cutoff(const CutoffSpec& spec) {
    if (spec.radius < 1.0) throw ConfigError("cutoff: radius must be >= 1");
}
}  // namespace detail

template <int D>
double cutoff_value(const CutoffSpec& spec, const Vec<D>& x) {
    detail::check_cutoff(spec);
    return smooth_step(2.0 - x.norm() / spec.radius).g;
}

template <int D>
Vec<D> cutoff_gradient(const CutoffSpec& spec, const Vec<D>& x) {
    detail::check_cutoff(spec);
    const double r = x.norm();
    if (r < 1e-300) return Vec<D>::Zero();
    const auto step = smooth_step(2.0 - r / spec.radius);
    return step.dg * (-1.0 / (spec.radius * r)) * x;
}

template <int D>
double cutoff_laplacian(const CutoffSpec& spec, const Vec<D>& x) {
    detail::check_cutoff(spec);
    const double r = x.norm();
    if (r < 1e-300) return 0.0;
    const auto step = smooth_step(2.0 - r / spec.radius);
    const double R = spec.radius;
    return step.d2g / (R * R) - step.dg * (D - 1) / (R * r);
}

// ---- catalog ----

namespace detail {
inline Vec<2> shear_value(double y, double theta, double scale) {
    const double s = (y > 0.0) ? 1.0 : ((y < 0.0) ? -1.0 : 0.0);
    return {scale * s * std::pow(std::abs(y), theta), 0.0};
}
}  // namespace detail

// Drift catalog (d = 2). Labels: zero, constant, rotation, saddle,
// linear_shear, shear_holder, nonsolenoidal. theta only affects shear_holder;
// scale multiplies the field. nonsolenoidal is the negative control with
// divergence equal to scale.
inline VectorField<2> make_field(const std::string& label, double theta = 0.3,
                                 double scale = 1.0) {
    VectorField<2> f;
    f.label = label;
    auto affine = [&f, scale](double a00, double a01, double a10, double a11) {
        Mat<2> a;
        a << a00, a01, a10, a11;
        a *= scale;
        f.affine = true;
        f.affine_matrix = a;
        f.value = [a](const Vec<2>& x) { return Vec<2>(a * x); };
        f.jacobian = [a](const Vec<2>&) { return a; };
    };
    if (label == "zero") {
        affine(0, 0, 0, 0);
        f.divergence_free = true;
    } else if (label == "constant") {
        const Vec<2> c{3.0 * scale, 0.0};
        f.affine = true;
        f.affine_shift = c;
        f.value = [c](const Vec<2>&) { return c; };
        f.jacobian = [](const Vec<2>&) { return Mat<2>::Zero(); };
        f.divergence_free = true;
    } else if (label == "rotation") {
        affine(0, -1, 1, 0);
        f.divergence_free = true;
    } else if (label == "saddle") {
        affine(1, 0, 0, -1);
        f.divergence_free = true;
    } else if (label == "linear_shear") {
        affine(0, 1, 0, 0);
        f.divergence_free = true;
    } else if (label == "shear_holder") {
        if (theta <= 0.0 || theta > 1.0)
            throw ConfigError("shear_holder: theta outside (0,1]");
        f.value = [theta, scale](const Vec<2>& x) { return detail::shear_value(x[1], theta, scale); };
        f.holder_exponent = theta;
        f.divergence_free = true;
    } else if (label == "nonsolenoidal") {
        affine(1, 0, 0, 0);
        f.divergence_free = false;
    } else {
        throw ConfigError("unknown field label: " + label);
    }
    return f;
}

// Datum catalog. Labels: bump (C_c^infty, peak 1, support = radius), gaussian
// (standard deviation = radius), hat (Lipschitz cone, support = radius), zero.
template <int D>
ScalarDatum<D> make_datum(const std::string& label, double radius = 1.0) {
    if (radius <= 0.0) throw ConfigError("make_datum: radius must be positive");
    ScalarDatum<D> u0;
    u0.label = label;
    if (label == "bump") {
        const double r2 = radius * radius;
        u0.value = [r2](const Vec<D>& x) {
            const double q = x.squaredNorm() / r2;
            return M_E * bump_profile(q).value;
        };
        u0.gradient = [r2](const Vec<D>& x) {
            const double q = x.squaredNorm() / r2;
            return Vec<D>(M_E * bump_profile(q).d1 * (2.0 / r2) * x);
        };
        u0.support_radius = radius;
        u0.smoothness = Smoothness::compactly_smooth;
    } else if (label == "gaussian") {
        const double s2 = radius * radius;
        u0.value = [s2](const Vec<D>& x) { return std::exp(-0.5 * x.squaredNorm() / s2); };
        u0.gradient = [s2](const Vec<D>& x) {
            return Vec<D>(std::exp(-0.5 * x.squaredNorm() / s2) * (-x / s2));
        };
        u0.smoothness = Smoothness::sobolev_only;
    } else if (label == "hat") {
        u0.value = [radius](const Vec<D>& x) {
            return std::max(0.0, 1.0 - x.norm() / radius);
        };
        u0.gradient = [radius](const Vec<D>& x) {
            const double r = x.norm();
            if (r < 1e-300 || r >= radius) return Vec<D>(Vec<D>::Zero());
            return Vec<D>(-x / (radius * r));
        };
        u0.support_radius = radius;
        u0.smoothness = Smoothness::sobolev_only;
    } else if (label == "zero") {
        u0.value = [](const Vec<D>&) { return 0.0; };
        u0.gradient = [](const Vec<D>&) { return Vec<D>(Vec<D>::Zero()); };
        u0.support_radius = radius;
        u0.smoothness = Smoothness::compactly_smooth;
    } else {
        throw ConfigError("unknown datum label: " + label);
    }
    return u0;
}

}  // namespace stel
