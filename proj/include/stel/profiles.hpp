#pragma once

#include <cmath>

namespace stel {

// Flat bump profile in the variable q = (scaled radius)^2:
//   beta(q) = exp(-1/(1-q)) for q < 1, 0 otherwise.
// d1/d2 are derivatives with respect to q; all three vanish smoothly at q = 1.
struct BumpEval {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

inline BumpEval bump_profile(double q) {
    BumpEval out;
    if (q >= 1.0) return out;
    const double w = 1.0 / (1.0 - q);
    const double v = std::exp(-w);
    out.value = v;
    out.d1 = -v * w * w;
    out.d2 = v * w * w * w * (w - 2.0);
    return out;
}

// Monotone C-infinity step: 0 on t <= 0, 1 on t >= 1, built from f(t) = e^{-1/t}
// as g = f(t) / (f(t) + f(1-t)). dg/d2g are exact derivatives of the same
// expression, not finite differences.
struct SmoothStepEval {
    double g = 0.0;
    double dg = 0.0;
    double d2g = 0.0;
};

inline SmoothStepEval smooth_step(double t) {
    SmoothStepEval out;
    if (t <= 0.0) return out;
    if (t >= 1.0) {
        out.g = 1.0;
        return out;
    }
    const double s = 1.0 - t;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / s);
    const double da = a / (t * t);
    const double db = -b / (s * s);
    const double d2a = a * (1.0 - 2.0 * t) / (t * t * t * t);
    const double d2b = b * (2.0 * t - 1.0) / (s * s * s * s);
    const double sum = a + b;
    const double num = da * b - a * db;
    out.g = a / sum;
    out.dg = num / (sum * sum);
    out.d2g = (d2a * b - a * d2b) / (sum * sum) - 2.0 * num * (da + db) / (sum * sum * sum);
    return out;
}

}  // namespace stel
