#include "nesskit/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace nesskit {

namespace {

// Newton iteration on P_n starting from the Chebyshev-like guess.
QuadratureRule compute_gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0;
        double p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<QuadratureRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<QuadratureRule>(compute_gauss_legendre(n));
    return *slot;
}

QuadratureRule composite_gauss_legendre(double lo, double hi, int nodes_per_panel, int panels) {
    const QuadratureRule& base = gauss_legendre(nodes_per_panel);
    QuadratureRule out;
    out.nodes.reserve(static_cast<std::size_t>(nodes_per_panel) * panels);
    out.weights.reserve(out.nodes.capacity());
    const double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
        const double left = lo + p * width;
        for (int i = 0; i < nodes_per_panel; ++i) {
            out.nodes.push_back(left + 0.5 * width * (base.nodes[i] + 1.0));
            out.weights.push_back(0.5 * width * base.weights[i]);
        }
    }
    return out;
}

SpectralGrid build_spectral_grid(double v_b, double v_a, double lambda_max, int nodes_per_panel, int panels) {
    if (!(v_a >= v_b)) throw std::invalid_argument("build_spectral_grid: v_a must be >= v_b");
    if (!(lambda_max > v_a)) throw std::invalid_argument("build_spectral_grid: lambda_max must exceed v_a");
    SpectralGrid grid;
    grid.v_a = v_a;
    grid.v_b = v_b;
    grid.lambda_max = lambda_max;

    if (v_a > v_b) {
        const double width = v_a - v_b;
        const QuadratureRule theta = composite_gauss_legendre(0.0, 0.5 * std::numbers::pi, nodes_per_panel, panels);
        for (std::size_t i = 0; i < theta.nodes.size(); ++i) {
            const double s = std::sin(theta.nodes[i]);
            grid.nodes.push_back(v_b + width * s * s);
            grid.weights.push_back(width * std::sin(2.0 * theta.nodes[i]) * theta.weights[i]);
            grid.channels.push_back(1);
        }
    }
    const QuadratureRule s = composite_gauss_legendre(0.0, std::sqrt(lambda_max - v_a), nodes_per_panel, panels);
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        grid.nodes.push_back(v_a + s.nodes[i] * s.nodes[i]);
        grid.weights.push_back(2.0 * s.nodes[i] * s.weights[i]);
        grid.channels.push_back(2);
    }
    return grid;
}

}  // namespace nesskit
