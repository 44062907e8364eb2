#pragma once

// Physical model of a 1D quantum well (a,b) between two leads.
//
// Units: hbar = 1. The kinetic term is -(1/2) d/dx (1/M) d/dx, so a plane wave
// e^{ikx} in a region of constant (m, v) has energy v + k^2/(2m).

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nesskit {

enum class Lead { left, right };

struct DeviceProfile {
    double a = 0.0;
    double b = 1.0;
    double m_a = 1.0;
    double m_b = 1.0;
    double v_a = 0.0;
    double v_b = 0.0;
    // x_0 = a < x_1 < ... < x_K = b; masses/potentials hold one value per segment.
    std::vector<double> breakpoints{0.0, 1.0};
    std::vector<double> masses{1.0};
    std::vector<double> potentials{0.0};

    std::size_t segment_count() const { return masses.size(); }

    // Throws ConfigError naming the violated invariant.
    void validate() const;

    double lead_mass(Lead lead) const { return lead == Lead::left ? m_a : m_b; }
    double lead_potential(Lead lead) const { return lead == Lead::left ? v_a : v_b; }

    // Segment index for a < x < b, right-continuous at interior breakpoints.
    std::size_t segment_at(double x) const;

    // Smallest / largest potential and mass over leads and interior.
    double min_potential() const;
    double max_mass() const;

    // Single segment (a,b) with constant mass and potential.
    static DeviceProfile uniform(double a, double b, double mass, double potential,
                                 double lead_mass, double lead_potential);
};

struct Coefficients {
    double mass;
    double potential;
};

// M(x), V(x): lead constants for x <= a and x >= b, segment values inside.
Coefficients coefficients_at(const DeviceProfile& device, double x);

// Lead wavenumbers at energy lambda.
//   open channel (lambda >= v_p):  q = sqrt((lambda - v_p)/(2 m_p)), k = 2 m_p q
//   closed channel (lambda < v_p): kappa = sqrt(2 m_p (v_p - lambda)), q = k = 0
struct ChannelWavenumber {
    double q = 0.0;
    double k = 0.0;
    double kappa = 0.0;
    bool evanescent = false;
};

ChannelWavenumber channel_wavenumber(const DeviceProfile& device, Lead lead, double lambda);

// Equilibrium reservoir: occupation c * ln(1 + exp(-beta (lambda - mu))).
struct ReservoirState {
    double beta = 1.0;
    double mu = 0.0;
    double c = 1.0;
};

struct SpectralParams {
    double lambda_max = 0.0;  // filled with a default by the config loader
    int nodes_per_panel = 32;
    int panels = 8;
    std::string rule = "gauss-legendre";
};

struct BoxParams {
    double x_min = -40.0;
    double x_max = 41.0;
    double h = 0.05;
    double weight_floor = 1e-8;  // relative to the largest ensemble weight
};

struct CouplingSchedule {
    enum class Kind { exponential, sudden };
    Kind kind = Kind::exponential;
    double alpha = 1.0;
    double t_start = 0.0;
    double g_cap = 1e4;

    // Strength of the delta barriers at a and b at time t.
    double coupling(double t) const;

    static CouplingSchedule exponential(double alpha, double g_cap = 1e4);
    static CouplingSchedule sudden(double g_cap = 1e4, double t_start = 0.0);
};

struct SystemConfig {
    DeviceProfile device;
    ReservoirState reservoir_left;
    ReservoirState reservoir_well;
    ReservoirState reservoir_right;
    SpectralParams spectral;
    BoxParams box;
    CouplingSchedule schedule;

    void validate() const;

    // max(v_a, largest mu) + 20 / (smallest beta)
    double default_lambda_max() const;
};

// Parses the sectioned key = value format. `source` is used in error messages.
SystemConfig parse_config(std::string_view text, std::string_view source = "<string>");
SystemConfig load_config(const std::filesystem::path& path);

}  // namespace nesskit
