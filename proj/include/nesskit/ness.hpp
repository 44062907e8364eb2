#pragma once

// Distribution functions of steady states, carrier density and stationary current.
//
// A steady state is represented by its distribution function over the spectrum of
// H (or of the decoupled H_D): scalar occupations per spectral node (f_b below v_a,
// diag(f_b, f_a) above), plus point weights on the discrete eigenvalues.

#include <span>
#include <vector>

#include "nesskit/device.hpp"
#include "nesskit/quadrature.hpp"
#include "nesskit/spectrum.hpp"

namespace nesskit {

// c * ln(1 + exp(-beta (lambda - mu))), overflow-safe for large negative arguments.
double occupation(double lambda, const ReservoirState& r);

SpectralGrid spectral_grid(const SystemConfig& config);

struct PointWeight {
    double energy;
    double weight;
};

struct DistributionFunction {
    enum class Basis {
        coupled,    // generalized eigenfunctions of H, bound states of H
        decoupled,  // lead modes of H_a, H_b and well modes of H_I
    };
    Basis basis = Basis::coupled;
    SpectralGrid grid;
    std::vector<double> occupation_b;  // per node, channel b
    std::vector<double> occupation_a;  // per node, channel a; zero below v_a
    std::vector<PointWeight> points;   // bound states (coupled) or well modes (decoupled)
};

// Distribution function of rho_D = rho_a + rho_I + rho_b.
DistributionFunction distribution_D(const SystemConfig& config);

struct BoundWeightSource {
    enum class Kind { sudden, simulated };
    Kind kind = Kind::sudden;
    std::vector<double> values;  // used when kind == simulated, one per bound state

    static BoundWeightSource sudden() { return {}; }
    static BoundWeightSource simulated(std::vector<double> weights) { return {Kind::simulated, std::move(weights)}; }
};

// <psi_j, rho_D psi_j>: the bound-state weights produced by sudden coupling, summed
// over well modes plus the lead continua.
std::vector<double> sudden_bound_weights(const SystemConfig& config, std::span<const BoundState> bound);

// Distribution function of the steady state reached after coupling. The continuum
// part carries the lead occupations unchanged; the bound part comes from `source`.
// Throws NumericalError when simulated weights do not match the bound-state count.
DistributionFunction distribution_ness(const SystemConfig& config, const BoundWeightSource& source = {});

struct CarrierDensity {
    std::vector<double> x;
    std::vector<double> total;
    std::vector<double> bound;
    std::vector<double> continuum;
};

// u(x) for x in (a, b); points outside the well are reported as zero.
CarrierDensity carrier_density(const SystemConfig& config, const DistributionFunction& dist,
                               std::span<const double> x);

// Landau-Lifschitz current density (1/M(x)) int sum_p rho_pp Im{conj(phi_p) phi_p'} dlambda.
std::vector<double> current_density(const SystemConfig& config, const DistributionFunction& dist,
                                    std::span<const double> x);

// (1/2pi) int_{v_a}^{lambda_max} T(lambda) (f_a - f_b) dlambda.
double landauer_current(const SystemConfig& config);

// Upper bound on the current carried by energies above lambda_max.
double current_truncation_bound(const SystemConfig& config);

// Ten points spanning the left lead, the well and the right lead.
std::vector<double> current_sample_points(const DeviceProfile& device);

}  // namespace nesskit
