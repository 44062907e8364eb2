#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nesskit/errors.hpp"
#include "nesskit/ness.hpp"
#include "nesskit/scattering.hpp"
#include "nesskit_verify/oracles.hpp"

using namespace nesskit;

namespace {

SystemConfig biased(const DeviceProfile& device) {
    SystemConfig c;
    c.device = device;
    c.reservoir_left = {3.0, 1.6, 1.0};
    c.reservoir_right = {2.5, 0.9, 0.8};
    c.reservoir_well = {3.0, 1.2, 1.0};
    c.spectral.lambda_max = c.default_lambda_max();
    return c;
}

SystemConfig equilibrium(const DeviceProfile& device, ReservoirState r) {
    SystemConfig c;
    c.device = device;
    c.reservoir_left = c.reservoir_right = c.reservoir_well = r;
    c.spectral.lambda_max = c.default_lambda_max();
    return c;
}

DeviceProfile well_with_barriers() {
    DeviceProfile d;
    d.a = 0.0;
    d.b = 1.5;
    d.breakpoints = {0.0, 0.4, 1.1, 1.5};
    d.masses = {1.0, 1.0, 1.0};
    d.potentials = {1.5, -3.0, 1.5};
    d.v_a = 0.3;
    return d;
}

}  // namespace

TEST_CASE("occupation") {
    CHECK(occupation(1.0, {1.0, 1.0, 1.0}) == doctest::Approx(std::log(2.0)));
    CHECK(occupation(-5.0, {1.0, 0.0, 1.0}) == doctest::Approx(5.0067153).epsilon(1e-8));
    CHECK(occupation(1e4, {1.0, 0.0, 1.0}) == 0.0);
    CHECK(occupation(-1e4, {1.0, 0.0, 2.0}) == doctest::Approx(2e4));
    CHECK(std::isfinite(occupation(-1e300, {1.0, 0.0, 1.0})));
}

TEST_CASE("distribution of the decoupled state") {
    DeviceProfile d = DeviceProfile::uniform(0.0, 1.0, 1.0, -1.0, 1.0, 0.0);
    d.v_a = 0.5;
    SystemConfig c = biased(d);
    c.reservoir_right = {1.0, 1.0, 1.0};
    const DistributionFunction dist = distribution_D(c);
    CHECK(dist.basis == DistributionFunction::Basis::decoupled);
    for (std::size_t i = 0; i < dist.grid.size(); ++i) {
        CHECK(dist.grid.nodes[i] > d.v_b);
        if (dist.grid.channels[i] == 1) CHECK(dist.occupation_a[i] == 0.0);
    }
    CHECK(occupation(0.0, c.reservoir_right) == doctest::Approx(1.313262).epsilon(1e-6));
    const auto modes = closed_well_spectrum_below(d, c.spectral.lambda_max);
    REQUIRE(dist.points.size() == modes.size());
    CHECK(dist.points[0].weight == doctest::Approx(occupation(modes[0].xi, c.reservoir_well)));

    SUBCASE("identical reservoirs occupy both channels equally") {
        const DistributionFunction eq = distribution_D(equilibrium(d, {2.0, 0.7, 1.0}));
        for (std::size_t i = 0; i < eq.grid.size(); ++i) {
            if (eq.grid.channels[i] == 2) CHECK(eq.occupation_a[i] == eq.occupation_b[i]);
        }
    }
}

TEST_CASE("distribution of the steady state") {
    const DeviceProfile barrier = DeviceProfile::uniform(0.0, 1.0, 1.0, 2.0, 1.0, 0.0);
    SUBCASE("no bound states: continuum equals the decoupled one") {
        const SystemConfig c = biased(barrier);
        const DistributionFunction ness = distribution_ness(c);
        const DistributionFunction dd = distribution_D(c);
        CHECK(ness.points.empty());
        CHECK(ness.occupation_a == dd.occupation_a);
        CHECK(ness.occupation_b == dd.occupation_b);
    }
    SUBCASE("simulated weights must match the bound-state count") {
        const SystemConfig c = biased(well_with_barriers());
        CHECK_THROWS_AS(distribution_ness(c, BoundWeightSource::simulated({})), NumericalError);
        const auto bound = find_bound_states(c.device);
        const DistributionFunction ness = distribution_ness(c, BoundWeightSource::simulated(std::vector<double>(bound.size(), 0.25)));
        for (const auto& p : ness.points) CHECK(p.weight == 0.25);
    }
}

TEST_CASE("sudden bound weights match a finite-box mode expansion") {
    SystemConfig c = biased(well_with_barriers());
    c.reservoir_right = c.reservoir_left;
    const auto bound = find_bound_states(c.device);
    REQUIRE(!bound.empty());
    const auto weights = sudden_bound_weights(c, bound);
    for (std::size_t j = 0; j < bound.size(); ++j) {
        const auto psi = [&](double x) { return std::real(bound[j].psi(x)); };
        const double oracle = verify::block_mode_weight(c, psi, -15.0, 16.5, 0.01);
        CHECK(weights[j] == doctest::Approx(oracle).epsilon(2e-3));
        CHECK(weights[j] > 0.0);
    }
}

TEST_CASE("carrier density") {
    SUBCASE("zero occupations give zero density") {
        const SystemConfig c = biased(well_with_barriers());
        DistributionFunction dist = distribution_ness(c);
        std::fill(dist.occupation_a.begin(), dist.occupation_a.end(), 0.0);
        std::fill(dist.occupation_b.begin(), dist.occupation_b.end(), 0.0);
        for (auto& p : dist.points) p.weight = 0.0;
        for (double u : carrier_density(c, dist, std::vector<double>{0.2, 0.7}).total) CHECK(u == 0.0);
    }
    SUBCASE("mirror-symmetric device in equilibrium") {
        const SystemConfig c = equilibrium(well_with_barriers(), {2.0, 0.5, 1.0});
        SystemConfig sym = c;
        sym.device.v_a = 0.0;
        const DistributionFunction dist = distribution_ness(sym);
        const std::vector<double> x{0.1, 0.3, 0.6, 0.9, 1.2, 1.4};
        const CarrierDensity u = carrier_density(sym, dist, x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(u.total[i] == doctest::Approx(u.total[x.size() - 1 - i]).epsilon(1e-8));
            CHECK(u.continuum[i] >= 0.0);
            CHECK(u.total[i] == doctest::Approx(u.bound[i] + u.continuum[i]));
        }
    }
    SUBCASE("flat device equals the large-box eigenmode sum") {
        const ReservoirState r{2.0, 1.0, 1.0};
        const SystemConfig c = equilibrium(DeviceProfile::uniform(0.0, 1.0, 1.0, 0.0, 1.0, 0.0), r);
        const CarrierDensity u = carrier_density(c, distribution_ness(c), std::vector<double>{0.25, 0.5, 0.75});
        const double oracle = verify::box_mode_density(r, 1.0, 0.0, 3000.0, 0.5);
        for (double v : u.total) CHECK(v == doctest::Approx(oracle).epsilon(0.01));
    }
    SUBCASE("raising an occupation never lowers the density") {
        const SystemConfig c = biased(well_with_barriers());
        DistributionFunction dist = distribution_ness(c);
        const std::vector<double> x{0.2, 0.75, 1.3};
        const CarrierDensity before = carrier_density(c, dist, x);
        for (auto& f : dist.occupation_b) f *= 1.5;
        const CarrierDensity after = carrier_density(c, dist, x);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(after.total[i] >= before.total[i]);
    }
    SUBCASE("decoupled density uses well modes and lead modes") {
        const SystemConfig c = biased(well_with_barriers());
        const DistributionFunction dist = distribution_D(c);
        const CarrierDensity u = carrier_density(c, dist, std::vector<double>{-1.0, 0.7, 3.0});
        for (double v : u.total) CHECK(v > 0.0);
    }
}

TEST_CASE("current density") {
    SUBCASE("equilibrium carries no current") {
        const SystemConfig c = equilibrium(well_with_barriers(), {2.0, 1.1, 1.0});
        for (double j : current_density(c, distribution_ness(c), current_sample_points(c.device))) CHECK(std::abs(j) < 1e-12);
        CHECK(std::abs(landauer_current(c)) < 1e-12);
    }
    SUBCASE("independent of x and equal to Landauer") {
        const SystemConfig c = biased(well_with_barriers());
        const auto j = current_density(c, distribution_ness(c), current_sample_points(c.device));
        const double landauer = landauer_current(c);
        for (double v : j) CHECK(v == doctest::Approx(landauer).epsilon(1e-9));
        CHECK(landauer > 0.0);
    }
    SUBCASE("decoupled state carries no current") {
        const SystemConfig c = biased(well_with_barriers());
        for (double v : current_density(c, distribution_D(c), std::vector<double>{2.0})) CHECK(v == 0.0);
    }
    SUBCASE("flat device equals the occupation-difference integral") {
        SystemConfig c = biased(DeviceProfile::uniform(0.0, 1.0, 1.0, 0.0, 1.0, 0.0));
        c.spectral.lambda_max = 40.0;
        const double oracle = verify::flat_current_integral(c.reservoir_left, c.reservoir_right, 0.0);
        CHECK(current_density(c, distribution_ness(c), std::vector<double>{3.0})[0] == doctest::Approx(oracle).epsilon(1e-8));
    }
    SUBCASE("monotone bias gives a non-negative current") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 10; ++i) {
            SystemConfig c = verify::random_biased_config(rng);
            c.reservoir_right.beta = c.reservoir_left.beta;
            c.reservoir_right.c = c.reservoir_left.c;
            CHECK(landauer_current(c) >= 0.0);
        }
    }
    SUBCASE("truncation bound") {
        const SystemConfig c = biased(well_with_barriers());
        const double bound = current_truncation_bound(c);
        CHECK(bound > 0.0);
        CHECK(bound < 1e-8 * landauer_current(c));
    }
}
