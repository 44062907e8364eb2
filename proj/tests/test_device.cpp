#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "nesskit/device.hpp"
#include "nesskit/errors.hpp"

using namespace nesskit;

namespace {

const char* kFlat = R"(
[device]
a = 0
b = 1
)";

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "test.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("minimal flat config loads with defaults") {
    const SystemConfig c = parse_config(kFlat);
    CHECK(c.device.a == 0.0);
    CHECK(c.device.b == 1.0);
    CHECK(c.device.masses == std::vector<double>{1.0});
    CHECK(c.device.potentials == std::vector<double>{0.0});
    CHECK(c.reservoir_left.beta == 1.0);
    CHECK(c.reservoir_right.c == 1.0);
    CHECK(c.box.x_min == -40.0);
    CHECK(c.box.x_max == 41.0);
    CHECK(c.spectral.lambda_max == doctest::Approx(20.0));
    CHECK(c.schedule.kind == CouplingSchedule::Kind::exponential);
}

TEST_CASE("full config round-trips every section") {
    const SystemConfig c = parse_config(R"(
# stepped well
[device]
a = -1
b = 2
m_a = 0.5
m_b = 2
v_a = 0.3
v_b = -0.2
breakpoints = [-1, 0.5, 2]
mass = 1, 0.7
potential = -1.5, 0.25

[reservoir.left]
beta = 4
mu = 1.2
charge = 2
effective_mass = 0.5

[reservoir.right]
beta = 3
mu = 0.4
c = 0.8

[spectral]
lambda_max = 12
nodes_per_panel = 16
panels = 4

[box]
x_min = -30
x_max = 33
h = 0.02

[schedule]
kind = sudden
g_cap = 1e5
)");
    CHECK(c.device.breakpoints == std::vector<double>{-1.0, 0.5, 2.0});
    CHECK(c.device.masses[1] == 0.7);
    CHECK(c.device.potentials[0] == -1.5);
    CHECK(c.reservoir_left.c == doctest::Approx(2.0 * 0.5 / (std::numbers::pi * 4.0)));
    CHECK(c.reservoir_right.c == 0.8);
    CHECK(c.spectral.lambda_max == 12.0);
    CHECK(c.spectral.nodes_per_panel == 16);
    CHECK(c.box.h == 0.02);
    CHECK(c.schedule.kind == CouplingSchedule::Kind::sudden);
    CHECK(c.schedule.g_cap == 1e5);
}

TEST_CASE("invariant violations name the field") {
    CHECK(error_of("[device]\na = 0\nb = 1\nv_a = 0\nv_b = 1\n").find("v_a >= v_b") != std::string::npos);
    CHECK(error_of("[device]\na = 0\nb = 1\nbreakpoints = 0, 0.7, 0.3, 1\nmass = 1,1,1\npotential = 0,0,0\n")
              .find("strictly increasing") != std::string::npos);
    CHECK(error_of("[device]\na = 1\nb = 0\n").find("a < b") != std::string::npos);
    CHECK(error_of("[device]\na = 0\nb = 1\nmass = -1\n").find("mass") != std::string::npos);
    CHECK(error_of(std::string(kFlat) + "[reservoir.left]\nbeta = 0\n").find("beta") != std::string::npos);
    CHECK(error_of(std::string(kFlat) + "[box]\nx_min = 0.5\n").find("x_min") != std::string::npos);
}

TEST_CASE("parse errors carry source and line") {
    const std::string unknown = error_of("[device]\na = 0\nb = 1\nwidht = 3\n");
    CHECK(unknown.find("widht") != std::string::npos);
    CHECK(unknown.find("test.cfg:4") != std::string::npos);
    CHECK(error_of("[devices]\na = 0\n").find("unknown section") != std::string::npos);
    CHECK(error_of("[device]\na = 0\na = 1\nb = 2\n").find("duplicate key") != std::string::npos);
    CHECK(error_of("[device]\na = zero\nb = 1\n").find("[device] a: not a number") != std::string::npos);
    CHECK(error_of("[device]\nb = 1\n").find("a is required") != std::string::npos);
    CHECK(error_of("a = 0\n").find("outside of any section") != std::string::npos);
}

TEST_CASE("load_config reads files and reports missing ones") {
    const auto path = std::filesystem::temp_directory_path() / "nesskit_test_device.cfg";
    {
        std::ofstream out(path);
        out << kFlat;
    }
    CHECK(load_config(path).device.b == 1.0);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("coefficients_at") {
    DeviceProfile d;
    d.a = 0.0;
    d.b = 2.0;
    d.m_a = 0.4;
    d.v_a = 2.0;
    d.breakpoints = {0.0, 1.0, 2.0};
    d.masses = {1.0, 3.0};
    d.potentials = {-1.0, 0.5};
    d.validate();
    CHECK(coefficients_at(DeviceProfile{}, 0.5).mass == 1.0);
    CHECK(coefficients_at(DeviceProfile{}, 0.5).potential == 0.0);
    CHECK(coefficients_at(d, -3.0).mass == 0.4);
    CHECK(coefficients_at(d, -3.0).potential == 2.0);
    SUBCASE("interior breakpoint takes the right segment") {
        CHECK(coefficients_at(d, 1.0).mass == 3.0);
        CHECK(coefficients_at(d, 1.0).potential == 0.5);
    }
    SUBCASE("leads outside the interval") {
        for (double x : {-10.0, 0.0, 2.0, 7.5}) {
            const Coefficients c = coefficients_at(d, x);
            CHECK(c.mass == (x <= 0.0 ? d.m_a : d.m_b));
            CHECK(c.potential == (x <= 0.0 ? d.v_a : d.v_b));
        }
    }
}

TEST_CASE("channel_wavenumber") {
    DeviceProfile d;
    d.v_a = 1.0;
    d.m_b = 0.5;
    const ChannelWavenumber threshold = channel_wavenumber(d, Lead::left, 1.0);
    CHECK(threshold.q == 0.0);
    CHECK(threshold.k == 0.0);
    const ChannelWavenumber open = channel_wavenumber(d, Lead::right, 1.0);
    CHECK(open.q == doctest::Approx(1.0));
    CHECK(open.k == doctest::Approx(1.0));
    const ChannelWavenumber closed = channel_wavenumber(d, Lead::right, -1.0);
    CHECK(closed.evanescent);
    CHECK(closed.kappa == doctest::Approx(std::sqrt(2.0 * 0.5)));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        DeviceProfile r;
        r.m_b = 0.1 + 5.0 * u(rng);
        r.v_b = -3.0 + 6.0 * u(rng);
        const double lambda = r.v_b + 20.0 * u(rng);
        const ChannelWavenumber w = channel_wavenumber(r, Lead::right, lambda);
        worst = std::max(worst, std::abs(w.k * w.k - 2.0 * r.m_b * (lambda - r.v_b)) / std::max(1.0, w.k * w.k));
        CHECK(w.k == doctest::Approx(2.0 * r.m_b * w.q));
    }
    CHECK(worst < 1e-14);
}

TEST_CASE("coupling schedules") {
    const CouplingSchedule e = CouplingSchedule::exponential(2.0, 1e4);
    CHECK(e.coupling(0.0) == doctest::Approx(1.0));
    CHECK(e.coupling(1.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(e.coupling(-100.0) == 1e4);
    CHECK(e.t_start == doctest::Approx(-std::log(1e4) / 2.0));
    const CouplingSchedule s = CouplingSchedule::sudden(1e4);
    CHECK(s.coupling(-1e-9) == 1e4);
    CHECK(s.coupling(0.0) == 0.0);
    CHECK(s.t_start == 0.0);
}

TEST_CASE("default lambda_max covers the occupied range") {
    SystemConfig c = parse_config(std::string(kFlat) + "[reservoir.left]\nbeta = 2\nmu = 3\n");
    CHECK(c.default_lambda_max() == doctest::Approx(3.0 + 20.0 / 1.0));
    CHECK(c.spectral.lambda_max == c.default_lambda_max());
}
