#pragma once

#include <vector>

namespace nesskit {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(int n);

// Composite Gauss-Legendre rule on [lo, hi] with `panels` equal panels.
QuadratureRule composite_gauss_legendre(double lo, double hi, int nodes_per_panel, int panels);

// Energy quadrature over [v_b, lambda_max].
//
// The range splits at v_a into a one-channel band [v_b, v_a) and a two-channel
// band [v_a, lambda_max]. Eigenfunction densities behave like 1/sqrt(lambda - v_p)
// at a threshold, so each band is integrated in a variable that is smooth there:
//   [v_b, v_a):          lambda = v_b + (v_a - v_b) sin^2(theta),  theta in [0, pi/2]
//   [v_a, lambda_max]:   lambda = v_a + s^2,                        s in [0, sqrt(lambda_max - v_a)]
// Nodes never coincide with v_a or v_b.
struct SpectralGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<int> channels;  // 1 below v_a, 2 above
    double v_a = 0.0;
    double v_b = 0.0;
    double lambda_max = 0.0;

    std::size_t size() const { return nodes.size(); }
};

SpectralGrid build_spectral_grid(double v_b, double v_a, double lambda_max, int nodes_per_panel = 32,
                                 int panels = 8);

}  // namespace nesskit
