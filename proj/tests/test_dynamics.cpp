#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nesskit/dynamics.hpp"
#include "nesskit/errors.hpp"
#include "nesskit/ness.hpp"
#include "nesskit/parallel.hpp"
#include "nesskit/spectrum.hpp"

using namespace nesskit;

namespace {

constexpr double kPi = std::numbers::pi;

SystemConfig small_config() {
    SystemConfig c;
    c.device = DeviceProfile::uniform(0.0, 1.0, 1.0, 0.5, 1.0, 0.0);
    c.reservoir_left = {4.0, 1.2, 1.0};
    c.reservoir_right = {4.0, 0.6, 1.0};
    c.reservoir_well = {4.0, 0.9, 1.0};
    c.spectral.lambda_max = c.default_lambda_max();
    c.box = {-15.0, 16.0, 0.05, 1e-8};
    c.schedule = CouplingSchedule::sudden();
    return c;
}

std::vector<complex> gaussian(const BoxDiscretization& box, double centre, double width, double k) {
    std::vector<complex> psi(box.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double y = box.x[i] - centre;
        psi[i] = std::exp(-y * y / (4.0 * width * width)) * std::exp(complex(0.0, k * y));
    }
    const double n = std::sqrt(box.norm_squared(psi));
    for (auto& v : psi) v /= n;
    return psi;
}

double centroid(const BoxDiscretization& box, const std::vector<complex>& psi) {
    double s = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) s += box.x[i] * std::norm(psi[i]) * box.h;
    return s / box.norm_squared(psi);
}

}  // namespace

TEST_CASE("box discretization") {
    const SystemConfig c = small_config();
    const BoxDiscretization box = build_box(c);
    CHECK(box.size() == 619);
    CHECK(box.x.front() == doctest::Approx(-14.95));
    CHECK(box.snap_a <= 0.5 * box.h);
    CHECK(box.snap_b <= 0.5 * box.h);
    CHECK(box.x[box.site_a] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(box.x[box.site_b] == doctest::Approx(1.0));
    CHECK(box.nearest_site(0.52) == box.site_a + 10);
    CHECK(box.diagonal(box.site_a, 2.0) - box.diagonal(box.site_a, 0.0) == doctest::Approx(2.0 / box.h));

    SUBCASE("too coarse a grid is rejected") {
        SystemConfig coarse = c;
        coarse.box.h = 0.2;
        coarse.spectral.lambda_max = 40.0;
        CHECK_THROWS_AS(build_box(coarse), NumericalError);
    }
    SUBCASE("apply_hamiltonian is symmetric") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> n;
        std::vector<complex> u(box.size()), v(box.size()), hu(box.size()), hv(box.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = {n(rng), n(rng)};
            v[i] = {n(rng), n(rng)};
        }
        box.apply_hamiltonian(u, 3.0, hu);
        box.apply_hamiltonian(v, 3.0, hv);
        const complex lhs = box.inner(v, hu);
        const complex rhs = box.inner(hv, u);
        CHECK(std::abs(lhs - rhs) < 1e-9 * std::abs(lhs));
    }
}

TEST_CASE("decoupled ensemble") {
    const SystemConfig c = small_config();
    const BoxDiscretization box = build_box(c);
    const EnsembleState ens = decoupled_modes(box, c);
    REQUIRE(!ens.members.empty());

    SUBCASE("well block matches the discrete and continuum well spectrum") {
        SystemConfig all = c;
        all.box.weight_floor = 0.0;
        std::vector<double> well;
        for (const auto& m : decoupled_modes(box, all).members) {
            if (m.origin == EnsembleMember::Origin::well) well.push_back(m.energy);
        }
        std::sort(well.begin(), well.end());
        REQUIRE(well.size() >= 3);
        const auto exact = closed_well_spectrum(c.device, 3);
        const double intervals = 1.0 / box.h;
        for (std::size_t k = 0; k < 3; ++k) {
            const double n = static_cast<double>(k + 1);
            const double discrete = 0.5 + 2.0 / (box.h * box.h) * std::pow(std::sin(n * kPi / (2.0 * intervals)), 2);
            CHECK(well[k] == doctest::Approx(discrete).epsilon(1e-10));
            CHECK(well[k] == doctest::Approx(exact[k].xi).epsilon(std::pow(n * kPi * box.h, 2) / 10.0));
        }
    }
    SUBCASE("weights are reservoir occupations of normalized modes") {
        for (const auto& m : ens.members) {
            const ReservoirState& r = m.origin == EnsembleMember::Origin::left_lead ? c.reservoir_left
                                      : m.origin == EnsembleMember::Origin::well    ? c.reservoir_well
                                                                                    : c.reservoir_right;
            CHECK(m.weight == doctest::Approx(occupation(m.energy, r)));
            CHECK(box.norm_squared(m.psi) == doctest::Approx(1.0).epsilon(1e-12));
        }
        CHECK(ens.dropped_weight <= 1e-6 * ens.retained_weight);
    }
    SUBCASE("cold reservoirs occupy only modes below mu") {
        SystemConfig cold = c;
        cold.reservoir_left.beta = cold.reservoir_right.beta = cold.reservoir_well.beta = 200.0;
        cold.spectral.lambda_max = cold.default_lambda_max();
        const EnsembleState e = decoupled_modes(build_box(cold), cold);
        for (const auto& m : e.members) CHECK(m.energy < 1.2 + 0.15);
    }
    SUBCASE("initial density matches the decoupled state") {
        const DistributionFunction dist = distribution_D(c);
        for (double x : {-3.0, 0.5, 4.0}) {
            const std::size_t i = box.nearest_site(x);
            double u = 0.0;
            for (const auto& m : ens.members) u += m.weight * std::norm(m.psi[i]);
            const double expected = carrier_density(c, dist, std::vector<double>{box.x[i]}).total[0];
            CHECK(u == doctest::Approx(expected).epsilon(0.01));
        }
    }
}

TEST_CASE("Crank-Nicolson") {
    const SystemConfig c = small_config();
    const BoxDiscretization box = build_box(c);
    const double dt = 0.01;

    SUBCASE("eigenvector acquires the Cayley phase") {
        SystemConfig deep = c;
        deep.device.potentials = {-4.0};
        const BoxDiscretization dbox = build_box(deep);
        const auto bound = find_bound_states(deep.device);
        REQUIRE(bound.size() == 1);
        const std::vector<double> sampled = bound[0].sample(dbox.x);
        const std::vector<complex> guess(sampled.begin(), sampled.end());
        double lambda = 0.0;
        std::vector<complex> v = discrete_eigenvector(dbox, 0.0, bound[0].lambda, guess, &lambda);
        CHECK(lambda == doctest::Approx(bound[0].lambda).epsilon(1e-2));
        std::vector<complex> hv(v.size());
        dbox.apply_hamiltonian(v, 0.0, hv);
        double residual = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) residual += std::norm(hv[i] - lambda * v[i]) * dbox.h;
        CHECK(std::sqrt(residual) < 1e-10);

        const std::vector<complex> before = v;
        CrankNicolson cn(dbox, 0.0, dt);
        cn.step(v);
        const complex expected = (1.0 - complex(0.0, 0.5 * dt * lambda)) / (1.0 + complex(0.0, 0.5 * dt * lambda));
        for (std::size_t i = 0; i < v.size(); i += 37) CHECK(std::abs(v[i] - expected * before[i]) < 1e-12);
    }
    SUBCASE("norm is conserved") {
        std::vector<complex> psi = gaussian(box, -5.0, 1.0, 2.0);
        CrankNicolson cn(box, 0.7, dt);
        for (int s = 0; s < 2000; ++s) cn.step(psi);
        CHECK(std::abs(box.norm_squared(psi) - 1.0) < 1e-13);
    }
    SUBCASE("free packet moves at the group velocity") {
        SystemConfig flat = c;
        flat.device.potentials = {0.0};
        const BoxDiscretization fbox = build_box(flat);
        const double k = 1.5;
        std::vector<complex> psi = gaussian(fbox, -8.0, 1.5, k);
        const double x0 = centroid(fbox, psi);
        CrankNicolson cn(fbox, 0.0, dt);
        for (int s = 0; s < 400; ++s) cn.step(psi);
        CHECK((centroid(fbox, psi) - x0) / 4.0 == doctest::Approx(k).epsilon(0.01));
    }
    SUBCASE("discrete continuity with the midpoint state") {
        std::vector<complex> psi = gaussian(box, -3.0, 1.0, 1.0);
        const Observable charge = region_charge_observable(box, -4.0, -1.0, "charge");
        const double left = box.x[charge.first_site] - 0.5 * box.h;
        const double right = box.x[charge.last_site] + 0.5 * box.h;
        const Observable in = current_observable(box, PointFlux{left});
        const Observable out = current_observable(box, PointFlux{right});
        for (int s = 0; s < 20; ++s) {
            std::vector<complex> next = psi;
            cn_step(box, next, 1.0, dt);
            std::vector<complex> mid(psi.size());
            for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (psi[i] + next[i]);
            const double dq = charge.expectation(box, next) - charge.expectation(box, psi);
            const double flow = dt * (in.expectation(box, mid) - out.expectation(box, mid));
            CHECK(std::abs(dq - flow) < 1e-13);
            psi = next;
        }
    }
}

TEST_CASE("current observables") {
    SystemConfig c = small_config();
    c.device.potentials = {0.0};
    c.device.masses = {2.0};
    c.device.m_a = c.device.m_b = 2.0;
    const BoxDiscretization box = build_box(c);

    SUBCASE("plane-wave point flux") {
        const double k = 0.8;
        std::vector<complex> psi(box.size());
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::exp(complex(0.0, k * box.x[i]));
        const Observable o = current_observable(box, PointFlux{3.0});
        CHECK(o.expectation(box, psi) == doctest::Approx(std::sin(k * box.h) / (2.0 * box.h)).epsilon(1e-12));
        const Observable s = current_observable(box, SmoothedFlux{3.0});
        CHECK(s.expectation(box, psi) == doctest::Approx(std::sin(k * box.h) / (2.0 * box.h)).epsilon(1e-12));
    }
    SUBCASE("placement errors") {
        CHECK_THROWS_AS(current_observable(box, PointFlux{-14.8}), NumericalError);
        CHECK_THROWS_AS(current_observable(box, PointFlux{15.9}), NumericalError);
        CHECK_THROWS_AS(current_observable(box, SmoothedFlux{0.5}), NumericalError);
        CHECK_THROWS_AS(current_observable(box, SmoothedFlux{15.8}), NumericalError);
        CHECK_NOTHROW(current_observable(box, PointFlux{-3.0}));
    }
}

TEST_CASE("ensemble evolution") {
    const SystemConfig c = small_config();
    const BoxDiscretization box = build_box(c);
    const EnsembleState ens = decoupled_modes(box, c);

    SUBCASE("decoupled evolution leaves densities unchanged") {
        const std::vector<Observable> obs{region_charge_observable(box, 0.1, 0.9, "well"),
                                          region_charge_observable(box, -5.0, -1.0, "left")};
        EvolveOptions o;
        o.t_start = -3.0;
        o.t_end = -0.5;
        const EvolutionResult r = evolve_ensemble(box, ens, obs, o);
        for (const auto& trace : r.traces) {
            // only tunnelling through the g_cap barriers changes them
            for (double v : trace.values) CHECK(v == doctest::Approx(trace.values.front()).epsilon(1e-4));
        }
    }
    SUBCASE("mirror-symmetric equilibrium gives opposite fluxes on mirrored links") {
        // The empty well fills from both sides, so the flux is not zero, only antisymmetric.
        SystemConfig eq = c;
        eq.reservoir_left = eq.reservoir_right = eq.reservoir_well = {4.0, 0.9, 1.0};
        const EnsembleState e = decoupled_modes(box, eq);
        const std::vector<Observable> obs{current_observable(box, PointFlux{1.52}),
                                          current_observable(box, PointFlux{-0.52})};
        EvolveOptions o;
        o.t_end = 3.0;
        const EvolutionResult r = evolve_ensemble(box, e, obs, o);
        for (std::size_t i = 0; i < r.traces[0].values.size(); ++i) {
            CHECK(r.traces[0].values[i] == doctest::Approx(-r.traces[1].values[i]).epsilon(1e-9));
        }
        CHECK(r.traces[0].values.back() < 0.0);
        CHECK(r.max_norm_drift < 1e-10);
    }
    SUBCASE("runs past the validity window are truncated") {
        const std::vector<Observable> obs{current_observable(box, PointFlux{1.5})};
        EvolveOptions o;
        o.t_end = 1000.0;
        o.dt = 0.02;
        const EvolutionResult r = evolve_ensemble(box, ens, obs, o);
        CHECK(r.window_truncated);
        CHECK(r.t_end <= r.window_limit + 1e-9);
        CHECK(r.window_limit == doctest::Approx(validity_window(box, ens)));
        CHECK(!r.warnings.empty());
    }
    SUBCASE("results do not depend on the thread count") {
        const std::vector<Observable> obs{current_observable(box, PointFlux{1.5})};
        EvolveOptions o;
        o.t_end = 1.0;
        const int saved = thread_count().load();
        thread_count() = 1;
        const EvolutionResult one = evolve_ensemble(box, ens, obs, o);
        thread_count() = 4;
        const EvolutionResult four = evolve_ensemble(box, ens, obs, o);
        thread_count() = saved;
        CHECK(one.traces[0].values == four.traces[0].values);
    }
}

TEST_CASE("Moller probe") {
    SystemConfig c = small_config();
    c.device.potentials = {0.0};
    c.box = {-40.0, 41.0, 0.05, 1e-8};
    c.spectral.lambda_max = 5.0;
    const BoxDiscretization box = build_box(c);
    MollerOptions o;
    o.t_prep = 12.0;
    const MollerResult r = moller_probe(box, 1.0, Lead::right, o);
    CHECK(r.phase == doctest::Approx(kPi / 2.0).epsilon(0.01));
    CHECK(r.modulus == doctest::Approx(1.0).epsilon(0.02));
    CHECK_THROWS_AS(moller_probe(box, 0.3, Lead::right, o), NumericalError);
}
