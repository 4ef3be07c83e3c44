#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>

namespace stel {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

template <int D>
using Mat = Eigen::Matrix<double, D, D>;

// Transposed cofactor matrix (adjugate): cof(A)^T * A = det(A) * I.
// For an invertible A this equals det(A) * A^{-1}, but the cofactor form is
// polynomial in the entries and stays finite for singular input.
template <int D>
Mat<D> cofactor_transpose(const Mat<D>& a) {
    if constexpr (D == 1) {
        return Mat<1>::Constant(1.0);
    } else if constexpr (D == 2) {
        Mat<2> c;
        c << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
        return c;
    } else {
        Mat<D> c;
        Eigen::Matrix<double, D - 1, D - 1> minor;
        for (int i = 0; i < D; ++i) {
            for (int j = 0; j < D; ++j) {
                int mr = 0;
                for (int r = 0; r < D; ++r) {
                    if (r == i) continue;
                    int mc = 0;
                    for (int cidx = 0; cidx < D; ++cidx) {
                        if (cidx == j) continue;
                        minor(mr, mc) = a(r, cidx);
                        ++mc;
                    }
                    ++mr;
                }
                const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
                // (j, i): cofactor matrix transposed in place.
                c(j, i) = sign * minor.determinant();
            }
        }
        return c;
    }
}

// FNV-1a over the raw bytes of a double sequence. Used for noise-consumption
// checksums; bit-level, so it certifies exact (not approximate) agreement.
class Checksum {
public:
    void add(double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            state_ ^= (bits >> (8 * i)) & 0xffu;
            state_ *= 0x100000001b3ull;
        }
    }

    template <int D>
    void add(const Vec<D>& v) {
        for (int i = 0; i < D; ++i) add(v[i]);
    }

    [[nodiscard]] std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace stel
