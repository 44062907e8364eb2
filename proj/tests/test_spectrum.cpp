#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nesskit/quadrature.hpp"
#include "nesskit/spectrum.hpp"
#include "nesskit_verify/oracles.hpp"

using namespace nesskit;

namespace {

constexpr double kPi = std::numbers::pi;

DeviceProfile stepped_well() {
    DeviceProfile d;
    d.a = 0.0;
    d.b = 2.0;
    d.m_a = 0.9;
    d.m_b = 1.2;
    d.v_a = 0.4;
    d.v_b = 0.0;
    d.breakpoints = {0.0, 0.7, 1.3, 2.0};
    d.masses = {1.0, 0.6, 1.5};
    d.potentials = {-4.0, -14.0, -3.0};
    d.validate();
    return d;
}

int interior_sign_changes(const Wavefunction& f, double a, double b) {
    int changes = 0;
    double prev = 0.0;
    for (int i = 1; i < 4000; ++i) {
        const double v = std::real(f(a + (b - a) * i / 4000.0));
        if (prev != 0.0 && (v < 0.0) != (prev < 0.0)) ++changes;
        if (v != 0.0) prev = v;
    }
    return changes;
}

}  // namespace

TEST_CASE("flat device has no bound states") {
    CHECK(find_bound_states(DeviceProfile::uniform(0.0, 1.0, 1.0, 0.0, 1.0, 0.0)).empty());
    CHECK(find_bound_states(DeviceProfile::uniform(0.0, 1.0, 1.0, 2.0, 1.0, 0.0)).empty());
}

TEST_CASE("square well bound energies match the transcendental oracle") {
    for (double depth : {0.5, 4.0, 10.0, 30.0}) {
        const auto found = find_bound_states(DeviceProfile::uniform(0.0, 1.0, 1.0, -depth, 1.0, 0.0));
        const auto expected = verify::square_well_bound_energies(depth, 1.0, 1.0);
        REQUIRE(found.size() == expected.size());
        for (std::size_t j = 0; j < found.size(); ++j) CHECK(found[j].lambda == doctest::Approx(expected[j]).epsilon(1e-11));
    }
}

TEST_CASE("deep narrow well ground state has no interior zeros") {
    const DeviceProfile d = DeviceProfile::uniform(0.0, 0.2, 1.0, -200.0, 1.0, 0.0);
    const auto found = find_bound_states(d);
    REQUIRE(!found.empty());
    CHECK(interior_sign_changes(found[0].psi, -3.0, 3.2) == 0);
}

TEST_CASE("bound states are normalized, orthogonal, decaying eigenfunctions") {
    const DeviceProfile d = stepped_well();
    const auto bound = find_bound_states(d);
    REQUIRE(bound.size() >= 2);
    const double h = 1e-4;
    std::vector<double> x;
    for (double v = -12.0; v <= 14.0; v += h) x.push_back(v);
    std::vector<std::vector<double>> samples;
    for (const BoundState& b : bound) {
        CHECK(b.lambda < d.v_b);
        CHECK(b.kappa_a == doctest::Approx(std::sqrt(2.0 * d.m_a * (d.v_a - b.lambda))));
        CHECK(b.kappa_b == doctest::Approx(std::sqrt(2.0 * d.m_b * (d.v_b - b.lambda))));
        samples.push_back(b.sample(x));
    }
    // Piecewise Gauss-Legendre over the smooth segments.
    const std::vector<double> cuts{-40.0, 0.0, 0.7, 1.3, 2.0, 42.0};
    for (std::size_t i = 0; i < bound.size(); ++i) {
        for (std::size_t j = 0; j < bound.size(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                const QuadratureRule rule = composite_gauss_legendre(cuts[c], cuts[c + 1], 16, 80);
                for (std::size_t n = 0; n < rule.nodes.size(); ++n) {
                    s += rule.weights[n] * std::real(bound[i].psi(rule.nodes[n])) * std::real(bound[j].psi(rule.nodes[n]));
                }
            }
            CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-8);
        }
    }
    SUBCASE("residual of the discrete H on a dense grid") {
        for (std::size_t j = 0; j < bound.size(); ++j) {
            double residual = 0.0, norm = 0.0;
            for (std::size_t n = 1; n + 1 < x.size(); ++n) {
                const Coefficients left = coefficients_at(d, x[n - 1]);
                const Coefficients right = coefficients_at(d, x[n + 1]);
                const Coefficients here = coefficients_at(d, x[n]);
                if (left.mass != right.mass || left.potential != right.potential || here.mass != left.mass) continue;
                const auto& p = samples[j];
                const double hp = -(p[n + 1] - 2.0 * p[n] + p[n - 1]) / (2.0 * here.mass * h * h) + here.potential * p[n];
                residual += std::pow(hp - bound[j].lambda * p[n], 2) * h;
                norm += p[n] * p[n] * h;
            }
            CHECK(std::sqrt(residual / norm) < 1e-6);
        }
    }
    SUBCASE("leads decay at kappa") {
        const BoundState& b = bound[0];
        CHECK(std::abs(b.psi(-6.0) / b.psi(-5.0)) == doctest::Approx(std::exp(-b.kappa_a)).epsilon(1e-9));
        CHECK(std::abs(b.psi(8.0) / b.psi(7.0)) == doctest::Approx(std::exp(-b.kappa_b)).epsilon(1e-9));
    }
    SUBCASE("finer scan finds the same states") {
        BoundStateSearch fine;
        fine.verify_scan = true;
        CHECK(find_bound_states(d, fine).size() == bound.size());
    }
}

TEST_CASE("closed well with constant coefficients") {
    const double m = 0.7, v = 1.3, length = 2.0;
    const auto modes = closed_well_spectrum(DeviceProfile::uniform(0.0, length, m, v, 1.0, 0.0), 15);
    REQUIRE(modes.size() == 15);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const double n = static_cast<double>(k + 1);
        CHECK(modes[k].xi == doctest::Approx(v + kPi * kPi * n * n / (2.0 * m * length * length)).epsilon(1e-12));
    }
}

TEST_CASE("well modes of a stepped well") {
    const DeviceProfile d = stepped_well();
    const auto modes = closed_well_spectrum(d, 8);
    REQUIRE(modes.size() == 8);
    SUBCASE("match a dense finite-difference eigensolve") {
        const auto fd = verify::fd_dirichlet_eigenvalues(d, 4000, 8);
        for (std::size_t k = 0; k < modes.size(); ++k) CHECK(std::abs(modes[k].xi - fd[k]) < 1e-4 * std::max(1.0, std::abs(fd[k])));
    }
    SUBCASE("increasing, Dirichlet, orthonormal") {
        for (std::size_t k = 1; k < modes.size(); ++k) CHECK(modes[k].xi > modes[k - 1].xi);
        for (std::size_t j = 0; j < modes.size(); ++j) {
            CHECK(std::abs(modes[j].chi(d.a)) < 1e-12);
            CHECK(std::abs(modes[j].chi(d.b)) < 1e-10);
            CHECK(std::abs(modes[j].chi(d.b + 1.0)) == 0.0);
            for (std::size_t k = 0; k < modes.size(); ++k) {
                CHECK(std::abs(modes[j].chi.interior_overlap(modes[k].chi) - (j == k ? 1.0 : 0.0)) < 1e-8);
            }
        }
    }
    SUBCASE("k-th mode has k-1 interior zeros") {
        for (std::size_t k = 0; k < 4; ++k) CHECK(interior_sign_changes(modes[k].chi, d.a, d.b) == static_cast<int>(k));
    }
    SUBCASE("zero counting brackets the eigenvalues") {
        for (std::size_t k = 0; k < modes.size(); ++k) {
            CHECK(dirichlet_zero_count(d, modes[k].xi - 1e-6) == static_cast<int>(k));
            CHECK(dirichlet_zero_count(d, modes[k].xi + 1e-6) == static_cast<int>(k + 1));
        }
    }
    SUBCASE("modes below a cutoff") {
        const auto below = closed_well_spectrum_below(d, modes[4].xi + 1e-9);
        CHECK(below.size() == 5);
    }
}
