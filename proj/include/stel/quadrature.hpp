#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stel/errors.hpp"
#include "stel/linalg.hpp"

namespace stel {

struct Rule1D {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule by the Golub-Welsch method: nodes are eigenvalues of the
// Jacobi matrix with off-diagonal k/sqrt(4k^2-1), weights 2*(first eigenvector
// component)^2. Output is symmetrized so node/weight pairs mirror exactly.
inline Rule1D gauss_legendre(int m) {
    if (m < 1) throw ConfigError("gauss_legendre: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k) {
        const double beta = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = beta;
        jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    Rule1D rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (int i = 0; i < m; ++i) {
        rule.nodes[i] = es.eigenvalues()[i];
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = 2.0 * v0 * v0;
    }
    for (int i = 0; i < m / 2; ++i) {
        const int j = m - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
    return rule;
}

enum class BoxRule { midpoint, gauss };

// Tensor-product quadrature over center + [-L, L]^D.
template <int D>
class QuadratureBox {
public:
    QuadratureBox(const Vec<D>& center, double halfwidth, int m, BoxRule rule = BoxRule::midpoint)
        : center_(center), halfwidth_(halfwidth), m_(m), rule_(rule) {
        if (halfwidth <= 0.0) throw ConfigError("QuadratureBox: halfwidth must be positive");
        if (m < 1) throw ConfigError("QuadratureBox: need at least one node per axis");
        if (rule == BoxRule::gauss) axis_ = gauss_legendre(m);
        size_ = 1;
        for (int i = 0; i < D; ++i) size_ *= m;
    }

    [[nodiscard]] std::int64_t size() const { return size_; }
    [[nodiscard]] const Vec<D>& center() const { return center_; }
    [[nodiscard]] double halfwidth() const { return halfwidth_; }
    [[nodiscard]] int nodes_per_axis() const { return m_; }
    [[nodiscard]] BoxRule rule() const { return rule_; }

    [[nodiscard]] Vec<D> node(std::int64_t flat) const {
        Vec<D> x;
        for (int i = 0; i < D; ++i) {
            const int j = static_cast<int>(flat % m_);
            flat /= m_;
            if (rule_ == BoxRule::midpoint) {
                x[i] = center_[i] - halfwidth_ + (2.0 * halfwidth_ / m_) * (j + 0.5);
            } else {
                x[i] = center_[i] + halfwidth_ * axis_.nodes[j];
            }
        }
        return x;
    }

    [[nodiscard]] double weight(std::int64_t flat) const {
        if (rule_ == BoxRule::midpoint) {
            double w = 1.0;
            for (int i = 0; i < D; ++i) w *= 2.0 * halfwidth_ / m_;
            return w;
        }
        double w = 1.0;
        for (int i = 0; i < D; ++i) {
            w *= halfwidth_ * axis_.weights[static_cast<int>(flat % m_)];
            flat /= m_;
        }
        return w;
    }

    [[nodiscard]] double total_weight() const {
        double s = 0.0;
        for (std::int64_t i = 0; i < size_; ++i) s += weight(i);
        return s;
    }

private:
    Vec<D> center_;
    double halfwidth_;
    int m_;
    BoxRule rule_;
    Rule1D axis_;
    std::int64_t size_ = 0;
};

}  // namespace stel
