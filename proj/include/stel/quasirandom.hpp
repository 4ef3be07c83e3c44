#pragma once

#include <cmath>

#include "stel/linalg.hpp"

namespace stel {

// Additive-recurrence (Kronecker) low-discrepancy sequence based on the
// generalized golden ratio. Deterministic and prefix-nested: the first n
// points of a longer enumeration are always the same, which is what makes
// "adding samples never decreases a sup-estimate" a provable property.
template <int D>
class QuasiRandomSequence {
public:
    QuasiRandomSequence() {
        double phi = 2.0;
        for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (D + 1));
        double a = 1.0 / phi;
        for (int i = 0; i < D; ++i) {
            alpha_[i] = a;
            a /= phi;
        }
    }

    // k-th point of the unit cube [0,1)^D.
    [[nodiscard]] Vec<D> unit(std::uint64_t k) const {
        Vec<D> p;
        for (int i = 0; i < D; ++i) {
            const double v = 0.5 + alpha_[i] * static_cast<double>(k + 1);
            p[i] = v - std::floor(v);
        }
        return p;
    }

    // k-th point of the box center + [-h, h]^D.
    [[nodiscard]] Vec<D> box(std::uint64_t k, const Vec<D>& center, double halfwidth) const {
        Vec<D> p = unit(k);
        for (int i = 0; i < D; ++i) p[i] = center[i] + halfwidth * (2.0 * p[i] - 1.0);
        return p;
    }

private:
    Vec<D> alpha_;
};

}  // namespace stel
