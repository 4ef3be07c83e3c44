#pragma once

#include <memory>
#include <vector>

#include "stel/errors.hpp"
#include "stel/field.hpp"

namespace stel {

// Lookup-table acceleration for fields that depend on a single coordinate
// (shear-type drifts, mollified or not). Values and Jacobians are sampled on
// a uniform 1D grid along the chosen axis and linearly interpolated; points
// beyond the table fall back to the exact base evaluators. Mollified drifts
// cost microseconds per call, the table costs nanoseconds, which is what
// makes dense space-time experiments with mollification ladders feasible.
struct TabulationSpec {
    int axis = 1;
    double halfwidth = 12.0;
    double spacing = 1.0 / 1024.0;
};

inline VectorField<2> tabulate_axis_field(const VectorField<2>& base,
                                          const TabulationSpec& spec = {}) {
    if (spec.axis < 0 || spec.axis >= 2)
        throw ConfigError("tabulate_axis_field: axis outside [0, 2)");
    if (spec.halfwidth <= 0.0 || spec.spacing <= 0.0 ||
        spec.halfwidth < 4.0 * spec.spacing)
        throw ConfigError("tabulate_axis_field: bad halfwidth/spacing");

    const int axis = spec.axis;
    const int other = 1 - axis;
    auto probe = [&](double s, double off) {
        Vec<2> x = Vec<2>::Zero();
        x[axis] = s;
        x[other] = off;
        return x;
    };
    for (double s : {-spec.halfwidth * 0.7, -0.31, 0.17, spec.halfwidth * 0.9}) {
        const Vec<2> a = base.value(probe(s, 0.0));
        const Vec<2> b = base.value(probe(s, 2.7));
        if ((a - b).norm() > 1e-12 * (1.0 + a.norm()))
            throw ConfigError("tabulate_axis_field: base field varies off-axis");
    }

    const int count = static_cast<int>(std::ceil(2.0 * spec.halfwidth / spec.spacing)) + 1;
    const double lo = -spec.halfwidth;
    const double h = 2.0 * spec.halfwidth / (count - 1);
    auto values = std::make_shared<std::vector<Vec<2>>>();
    values->reserve(count);
    for (int i = 0; i < count; ++i) values->push_back(base.value(probe(lo + h * i, 0.0)));
    std::shared_ptr<std::vector<Mat<2>>> jacobians;
    if (base.has_jacobian()) {
        jacobians = std::make_shared<std::vector<Mat<2>>>();
        jacobians->reserve(count);
        for (int i = 0; i < count; ++i)
            jacobians->push_back(base.jacobian(probe(lo + h * i, 0.0)));
    }

    VectorField<2> f;
    f.label = base.label + "#tab";
    f.holder_exponent = base.holder_exponent;
    f.divergence_free = base.divergence_free;
    const auto base_value = base.value;
    f.value = [values, base_value, axis, lo, h, count](const Vec<2>& x) {
        const double t = (x[axis] - lo) / h;
        if (t < 0.0 || t > count - 1) return base_value(x);
        const int i = std::min(static_cast<int>(t), count - 2);
        const double frac = t - i;
        return Vec<2>((1.0 - frac) * (*values)[i] + frac * (*values)[i + 1]);
    };
    if (base.has_jacobian()) {
        const auto base_jac = base.jacobian;
        f.jacobian = [jacobians, base_jac, axis, lo, h, count](const Vec<2>& x) {
            const double t = (x[axis] - lo) / h;
            if (t < 0.0 || t > count - 1) return base_jac(x);
            const int i = std::min(static_cast<int>(t), count - 2);
            const double frac = t - i;
            return Mat<2>((1.0 - frac) * (*jacobians)[i] + frac * (*jacobians)[i + 1]);
        };
    }
    return f;
}

}  // namespace stel
