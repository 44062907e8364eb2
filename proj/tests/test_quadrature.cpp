#include <doctest.h>

#include <cmath>

#include "nesskit/quadrature.hpp"

using namespace nesskit;

TEST_CASE("Gauss-Legendre is exact up to degree 2n-1") {
    for (int n : {1, 2, 5, 16, 32}) {
        const QuadratureRule& r = gauss_legendre(n);
        REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
        for (int degree = 0; degree <= 2 * n - 1; ++degree) {
            double sum = 0.0;
            for (int i = 0; i < n; ++i) sum += r.weights[i] * std::pow(r.nodes[i], degree);
            const double exact = degree % 2 ? 0.0 : 2.0 / (degree + 1);
            CHECK(sum == doctest::Approx(exact).epsilon(1e-13));
        }
    }
}

TEST_CASE("composite rule integrates smooth functions") {
    const QuadratureRule r = composite_gauss_legendre(0.0, 3.0, 8, 5);
    double weights = 0.0, integral = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        weights += r.weights[i];
        integral += r.weights[i] * std::exp(-r.nodes[i]) * std::cos(2.0 * r.nodes[i]);
    }
    CHECK(weights == doctest::Approx(3.0).epsilon(1e-14));
    // int_0^3 e^{-x} cos 2x dx
    const double exact = (1.0 + std::exp(-3.0) * (2.0 * std::sin(6.0) - std::cos(6.0))) / 5.0;
    CHECK(integral == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("spectral grid") {
    const SpectralGrid g = build_spectral_grid(-0.5, 1.0, 12.0);
    CHECK(g.size() >= 64);
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        total += g.weights[i];
        CHECK(g.weights[i] > 0.0);
        CHECK(g.nodes[i] != -0.5);
        CHECK(g.nodes[i] != 1.0);
        CHECK(g.channels[i] == (g.nodes[i] < 1.0 ? 1 : 2));
    }
    CHECK(total == doctest::Approx(12.5).epsilon(1e-12));

    SUBCASE("threshold singularities are integrated exactly") {
        double lower = 0.0, upper = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.channels[i] == 1) lower += g.weights[i] / std::sqrt(g.nodes[i] + 0.5);
            else upper += g.weights[i] / std::sqrt(g.nodes[i] - 1.0);
        }
        CHECK(lower == doctest::Approx(2.0 * std::sqrt(1.5)).epsilon(1e-12));
        CHECK(upper == doctest::Approx(2.0 * std::sqrt(11.0)).epsilon(1e-12));
    }
    SUBCASE("equal thresholds give a single two-channel band") {
        const SpectralGrid flat = build_spectral_grid(0.0, 0.0, 5.0);
        for (int c : flat.channels) CHECK(c == 2);
    }
}
