#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stel/profiles.hpp"
#include "stel/transport.hpp"

namespace stel {

// Compactly supported test function with analytic gradient and laplacian.
template <int D>
struct TestFunction {
    std::function<double(const Vec<D>&)> value;
    std::function<Vec<D>(const Vec<D>&)> gradient;
    std::function<double(const Vec<D>&)> laplacian;
    double support_radius = 1.0;
    Vec<D> center = Vec<D>::Zero();
    std::string label;
};

// Radial bump phi(x) = e * exp(-1/(1 - q)), q = |x - c|^2 / r^2, peak 1.
template <int D>
TestFunction<D> make_test_function(const std::string& label, const Vec<D>& center,
                                   double radius) {
    if (label != "bump") throw ConfigError("make_test_function: unknown label " + label);
    if (radius <= 0.0) throw ConfigError("make_test_function: radius must be positive");
    TestFunction<D> phi;
    phi.label = label;
    phi.center = center;
    phi.support_radius = radius;
    const double e = std::exp(1.0);
    const double r2 = radius * radius;
    phi.value = [center, r2, e](const Vec<D>& x) {
        const double q = (x - center).squaredNorm() / r2;
        return q < 1.0 ? e * bump_profile(q).value : 0.0;
    };
    phi.gradient = [center, r2, e](const Vec<D>& x) {
        const Vec<D> z = x - center;
        const double q = z.squaredNorm() / r2;
        if (q >= 1.0) return Vec<D>(Vec<D>::Zero());
        return Vec<D>(e * bump_profile(q).d1 * (2.0 / r2) * z);
    };
    phi.laplacian = [center, r2, e](const Vec<D>& x) {
        const double q = (x - center).squaredNorm() / r2;
        if (q >= 1.0) return 0.0;
        const auto prof = bump_profile(q);
        return e * (prof.d2 * 4.0 * q + prof.d1 * 2.0 * D) / r2;
    };
    return phi;
}

namespace detail {

template <int D>
void check_box_covers(const QuadratureBox<D>& box, const TestFunction<D>& phi) {
    for (int i = 0; i < D; ++i) {
        const double reach = std::abs(phi.center[i] - box.center()[i]) + phi.support_radius;
        if (reach > box.halfwidth() + 1e-12)
            throw ConfigError("weak pairing: box does not cover the test function support");
    }
}

}  // namespace detail

// Per-path record of every discrete pairing entering the weak formulation,
// truncated at t_index:
//   pairing[k]   = <u(t_k), phi>          grad_pairing[k] = <u(t_k), grad phi>
//   laplace[k]   = <u(t_k), lap phi>      drift[k]        = <b . grad u(t_k), phi>
// All quadratures share one node set; gradients of u use the chain rule.
template <int D>
struct WeakLedger {
    int t_index = 0;
    double dt = 0.0;
    std::vector<double> pairing;
    std::vector<Vec<D>> grad_pairing;
    std::vector<double> laplace;
    std::vector<double> drift;
    std::vector<Vec<D>> increments;
};

template <int D>
WeakLedger<D> weak_ledger(const TransportSolution<D>& sol, const TestFunction<D>& phi,
                          const QuadratureBox<D>& box, int t_index,
                          const BrownianPath<D>& path) {
    detail::check_box_covers(box, phi);
    if (t_index < 0 || t_index > sol.grid.steps)
        throw ConfigError("weak_ledger: t_index outside [0, steps]");

    struct Node {
        Vec<D> x;
        double w, phi, lap;
        Vec<D> grad, b;
    };
    std::vector<Node> nodes;
    bool drift_active = false;
    for (std::int64_t i = 0; i < box.size(); ++i) {
        Node nd;
        nd.x = box.node(i);
        nd.w = box.weight(i);
        nd.phi = phi.value(nd.x);
        nd.grad = phi.gradient(nd.x);
        nd.lap = phi.laplacian(nd.x);
        if (nd.phi == 0.0 && nd.grad.norm() == 0.0 && nd.lap == 0.0) continue;
        nd.b = sol.drift.value(nd.x);
        if (nd.b.norm() > 0.0) drift_active = true;
        nodes.push_back(nd);
    }

    WeakLedger<D> ledger;
    ledger.t_index = t_index;
    ledger.dt = sol.grid.dt();
    ledger.pairing.resize(t_index + 1, 0.0);
    ledger.grad_pairing.resize(t_index + 1, Vec<D>::Zero());
    ledger.laplace.resize(t_index + 1, 0.0);
    ledger.drift.resize(t_index + 1, 0.0);
    for (int k = 0; k <= t_index; ++k) {
        const BackwardBatch<D> batch(sol, k, path);
        double p = 0.0, l = 0.0, a = 0.0;
        Vec<D> g = Vec<D>::Zero();
        for (const Node& nd : nodes) {
            double u;
            if (drift_active) {
                const auto [y, jac] = batch.point_jacobian(nd.x);
                u = sol.datum.value(y);
                const Vec<D> grad_u = jac.transpose() * sol.datum.gradient(y);
                a += nd.w * nd.b.dot(grad_u) * nd.phi;
            } else {
                u = sol.datum.value(batch.point(nd.x));
            }
            p += nd.w * u * nd.phi;
            g += nd.w * u * nd.grad;
            l += nd.w * u * nd.lap;
        }
        ledger.pairing[k] = p;
        ledger.grad_pairing[k] = g;
        ledger.laplace[k] = l;
        ledger.drift[k] = a;
    }
    ledger.increments.reserve(t_index);
    for (int k = 0; k < t_index; ++k) ledger.increments.push_back(path.increment(k));
    return ledger;
}

template <int D>
WeakLedger<D> weak_ledger(const TransportSolution<D>& sol, const TestFunction<D>& phi,
                          const QuadratureBox<D>& box, int t_index, std::uint64_t sample) {
    return weak_ledger(sol, phi, box, t_index, sample_path<D>(sol.grid, sol.seed, sample));
}

template <int D>
double pairing(const TransportSolution<D>& sol, const TestFunction<D>& phi, int t_index,
               std::uint64_t sample, const QuadratureBox<D>& box) {
    detail::check_box_covers(box, phi);
    const BackwardBatch<D> batch(sol, t_index, sample);
    double acc = 0.0;
    for (std::int64_t i = 0; i < box.size(); ++i) {
        const Vec<D> x = box.node(i);
        const double ph = phi.value(x);
        if (ph == 0.0) continue;
        acc += box.weight(i) * sol.datum.value(batch.point(x)) * ph;
    }
    return acc;
}

// R_I(t) = P(t) - P(0) + sum_k A_k dt - sum_k G_k . dB_k - 1/2 sum_k L_k dt,
// all time sums left-point (Ito) evaluated.
template <int D>
double ito_residual_from(const WeakLedger<D>& ledger) {
    double r = ledger.pairing[ledger.t_index] - ledger.pairing[0];
    for (int k = 0; k < ledger.t_index; ++k) {
        r += ledger.drift[k] * ledger.dt;
        r -= ledger.grad_pairing[k].dot(ledger.increments[k]);
        r -= 0.5 * ledger.laplace[k] * ledger.dt;
    }
    return r;
}

// Stratonovich form: endpoint-averaged stochastic sum, no laplacian term.
template <int D>
double stratonovich_residual_from(const WeakLedger<D>& ledger) {
    double r = ledger.pairing[ledger.t_index] - ledger.pairing[0];
    for (int k = 0; k < ledger.t_index; ++k) {
        r += ledger.drift[k] * ledger.dt;
        const Vec<D> mid = 0.5 * (ledger.grad_pairing[k] + ledger.grad_pairing[k + 1]);
        r -= mid.dot(ledger.increments[k]);
    }
    return r;
}

// Discrete cross variation 1/2 sum (G_{k+1} - G_k) . dB_k; converges to the
// same limit as the laplace compensator below.
template <int D>
double compensator_quadratic(const WeakLedger<D>& ledger) {
    double c = 0.0;
    for (int k = 0; k < ledger.t_index; ++k)
        c += 0.5 * (ledger.grad_pairing[k + 1] - ledger.grad_pairing[k])
                 .dot(ledger.increments[k]);
    return c;
}

// Discrete 1/2 sum <u, lap phi> dt compensator of the Ito form.
template <int D>
double compensator_laplace(const WeakLedger<D>& ledger) {
    double c = 0.0;
    for (int k = 0; k < ledger.t_index; ++k) c += 0.5 * ledger.laplace[k] * ledger.dt;
    return c;
}

template <int D>
double ito_residual(const TransportSolution<D>& sol, const TestFunction<D>& phi,
                    int t_index, std::uint64_t sample, const QuadratureBox<D>& box) {
    return ito_residual_from(weak_ledger(sol, phi, box, t_index, sample));
}

template <int D>
double stratonovich_residual(const TransportSolution<D>& sol, const TestFunction<D>& phi,
                             int t_index, std::uint64_t sample, const QuadratureBox<D>& box) {
    return stratonovich_residual_from(weak_ledger(sol, phi, box, t_index, sample));
}

// One Brownian sample of t -> <u(t), phi>, with the gradient pairings kept
// for quadratic-variation prediction.
template <int D>
struct PairingSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<Vec<D>> grad_values;
    double dt = 0.0;
};

template <int D>
PairingSeries<D> pairing_series(const TransportSolution<D>& sol, const TestFunction<D>& phi,
                                const QuadratureBox<D>& box, std::uint64_t sample) {
    const auto ledger = weak_ledger(sol, phi, box, sol.grid.steps, sample);
    PairingSeries<D> series;
    series.dt = ledger.dt;
    series.values = ledger.pairing;
    series.grad_values = ledger.grad_pairing;
    series.times.reserve(ledger.pairing.size());
    for (int k = 0; k <= sol.grid.steps; ++k) series.times.push_back(sol.grid.time(k));
    return series;
}

struct SemimartingaleReport {
    double max_jump_ratio = 0.0;     // max |dP| / sqrt(dt) over all series
    double realized_qv_mean = 0.0;   // mean sum (dP)^2
    double predicted_qv_mean = 0.0;  // mean sum |G|^2 dt
    double qv_ratio_mean = 0.0;
    double qv_ratio_halfwidth = 0.0;
    int samples = 0;
};

// Continuity and quadratic-variation diagnostics over a series ensemble.
template <int D>
SemimartingaleReport semimartingale_check(const std::vector<PairingSeries<D>>& ensemble) {
    if (ensemble.size() < 64)
        throw ConfigError("semimartingale_check: need at least 64 series");
    SemimartingaleReport rep;
    rep.samples = static_cast<int>(ensemble.size());
    std::vector<double> ratios;
    double realized_sum = 0.0, predicted_sum = 0.0;
    for (const auto& s : ensemble) {
        const int n = static_cast<int>(s.values.size()) - 1;
        double realized = 0.0, predicted = 0.0;
        for (int k = 0; k < n; ++k) {
            const double jump = s.values[k + 1] - s.values[k];
            realized += jump * jump;
            predicted += s.grad_values[k].squaredNorm() * s.dt;
            rep.max_jump_ratio =
                std::max(rep.max_jump_ratio, std::abs(jump) / std::sqrt(s.dt));
        }
        realized_sum += realized;
        predicted_sum += predicted;
        if (predicted > 1e-300) ratios.push_back(realized / predicted);
    }
    rep.realized_qv_mean = realized_sum / rep.samples;
    rep.predicted_qv_mean = predicted_sum / rep.samples;
    if (!ratios.empty()) {
        double mean = 0.0;
        for (double r : ratios) mean += r;
        mean /= ratios.size();
        rep.qv_ratio_mean = mean;
        if (ratios.size() > 1) {
            double var = 0.0;
            for (double r : ratios) var += (r - mean) * (r - mean);
            var /= (ratios.size() - 1);
            rep.qv_ratio_halfwidth = 1.96 * std::sqrt(var / ratios.size());
        }
    }
    return rep;
}

}  // namespace stel
