#pragma once

// Finite-box simulation of the coupling process.
//
// The line is cut to [x_min, x_max] with Dirichlet ends and discretized on
// x_n = x_min + n h. The delta barriers at a and b become on-site terms g(t)/h
// at the grid points nearest to a and b. The initial state rho_D is diagonal in
// the eigenbases of the three decoupled blocks, so the Liouville equation is
// solved as an ensemble of independently propagated pure states.

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nesskit/device.hpp"

namespace nesskit {

using complex = std::complex<double>;

struct BoxDiscretization {
    DeviceProfile device;
    CouplingSchedule schedule;
    double x_min = 0.0;
    double x_max = 0.0;
    double h = 0.0;
    // Unknowns are the interior grid points n = 1..N-1; index i holds n = i + 1.
    std::vector<double> x;
    std::vector<double> potential;
    // 1/m at the link midpoints; link l joins grid points l and l + 1 (l = 0..N-1).
    std::vector<double> inverse_link_mass;
    std::size_t site_a = 0;  // unknown index of the grid point nearest a
    std::size_t site_b = 0;
    double snap_a = 0.0;  // |x_{site_a} - a|
    double snap_b = 0.0;

    std::size_t size() const { return x.size(); }
    double coupling(double t) const { return schedule.coupling(t); }

    double diagonal(std::size_t i, double g) const;
    // H_{i,i+1}
    double off_diagonal(std::size_t i) const { return -inverse_link_mass[i + 1] / (2.0 * h * h); }

    void apply_hamiltonian(std::span<const complex> psi, double g, std::span<complex> out) const;

    // sum |psi|^2 h
    double norm_squared(std::span<const complex> psi) const;
    // h sum conj(lhs) rhs
    complex inner(std::span<const complex> lhs, std::span<const complex> rhs) const;

    // Index of the unknown closest to x.
    std::size_t nearest_site(double x) const;
};

// Throws NumericalError when k_max h >= 0.5 with k_max = sqrt(2 max(m) (lambda_max - min(v))).
BoxDiscretization build_box(const SystemConfig& config);

// Crank-Nicolson propagator (I + i dt/2 H)^{-1} (I - i dt/2 H) for one fixed g.
class CrankNicolson {
public:
    CrankNicolson(const BoxDiscretization& box, double g, double dt);

    void step(std::span<complex> psi) const;
    double g() const { return g_; }
    double dt() const { return dt_; }

private:
    const BoxDiscretization* box_;
    double g_;
    double dt_;
    using wide_complex = std::complex<long double>;
    std::vector<wide_complex> lower_;      // elimination multipliers
    std::vector<wide_complex> inv_pivot_;  // 1 / modified diagonal
    std::vector<double> h_diag_;
    std::vector<double> h_off_;
};

// One step from t to t + dt with the coupling evaluated at t + dt/2.
void cn_step(const BoxDiscretization& box, std::span<complex> psi, double t, double dt);

struct EnsembleMember {
    enum class Origin { left_lead, well, right_lead };
    Origin origin;
    double energy;  // block eigenvalue
    double weight;
    std::vector<complex> psi;
};

struct EnsembleState {
    std::vector<EnsembleMember> members;
    double retained_weight = 0.0;
    double dropped_weight = 0.0;  // weights below the floor
    std::size_t dropped_count = 0;
};

// Eigenmodes of the three Dirichlet blocks [x_min,a], [a,b], [b,x_max] weighted by
// their reservoir occupations.
EnsembleState decoupled_modes(const BoxDiscretization& box, const SystemConfig& config);

// Expectation value functional on single wavefunctions; Tr(rho O) = sum_k w_k <psi_k, O psi_k>.
struct Observable {
    enum class Kind { link_flux, projector, region_charge };
    Kind kind = Kind::link_flux;
    std::string descriptor;
    // link_flux: sum_l link_weights[l] * J_{first_link + l}
    std::size_t first_link = 0;
    std::vector<double> link_weights;
    // projector |state><state|
    std::vector<complex> state;
    // region_charge: unknowns [first_site, last_site]
    std::size_t first_site = 0;
    std::size_t last_site = 0;

    double expectation(const BoxDiscretization& box, std::span<const complex> psi) const;
};

struct PointFlux {
    double x;
};
struct SmoothedFlux {
    double x;             // ramp centre
    double width = 0.0;   // ramp width; 0 selects 10 h
};

// Discrete probability flux J = Im(conj(psi_n) psi_{n+1}) / (m h) through the link at x,
// or i[H, phi_c] for a raised-cosine ramp phi_c rising from 0 to 1 inside the right lead.
Observable current_observable(const BoxDiscretization& box, PointFlux variant);
Observable current_observable(const BoxDiscretization& box, SmoothedFlux variant);

Observable projector_observable(const BoxDiscretization& box, std::vector<complex> state, std::string descriptor);
Observable region_charge_observable(const BoxDiscretization& box, double lo, double hi, std::string descriptor);

struct TransientTrace {
    std::string descriptor;
    std::string schedule;  // "alpha=<value>" or "sudden"
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> running_mean;  // arithmetic mean of the samples from the ergodic origin on
    double origin = 0.0;

    // Mean of the samples with t >= origin + fraction * (t_last - origin).
    double window_mean(double fraction) const;
    // (max - min) / 2 over the same window.
    double window_amplitude(double fraction) const;
};

struct EvolveOptions {
    double t_end = 10.0;
    double dt = 0.01;
    int sample_every = 10;
    // Defaults to the schedule's t_start.
    std::optional<double> t_start;
};

struct EvolutionResult {
    std::vector<TransientTrace> traces;
    double t_start = 0.0;
    double t_end = 0.0;
    double window_limit = 0.0;  // largest admissible t_end
    bool window_truncated = false;
    double max_norm_drift = 0.0;
    std::vector<std::string> warnings;
};

// Latest time before waves reflected at the box ends can reach the device region.
double validity_window(const BoxDiscretization& box, const EnsembleState& ensemble);

// Propagates every member by cn_step and records Tr(rho(t) O) every sample_every steps.
// Runs past the validity window are cut at the window and flagged.
EvolutionResult evolve_ensemble(const BoxDiscretization& box, const EnsembleState& ensemble,
                                std::span<const Observable> observables, const EvolveOptions& options);

// Eigenvector of the discrete H(g) nearest to `shift`, by inverse iteration from `initial`.
std::vector<complex> discrete_eigenvector(const BoxDiscretization& box, double g, double shift,
                                          std::span<const complex> initial, double* eigenvalue = nullptr);

struct SweepOptions {
    double t_end = 16.0;
    double dt = 0.01;
    int sample_every = 10;
    std::vector<double> flux_points;      // point-flux observables (right lead)
    std::vector<double> smoothed_points;  // raised-cosine ramps (right lead)
    double late_fraction = 0.5;
};

struct SweepRun {
    CouplingSchedule schedule;
    std::string label;
    EvolutionResult evolution;
    std::vector<double> late_current;     // per current observable
    std::vector<double> late_bound;       // per bound state, late-window occupation
    std::vector<double> bound_amplitude;  // per current observable, late-window (max-min)/2
};

struct SweepReport {
    std::vector<SweepRun> runs;
    std::vector<std::string> current_descriptors;
    double stationary_current = 0.0;  // continuum value from the NESS module
    // max over current observables of |I_i - I_j| / |I_stationary|, per pair of runs
    std::vector<std::vector<double>> pairwise_difference;
    std::vector<double> bound_energies;
};

// Runs evolve_ensemble once per schedule and compares late-window current means.
SweepReport alpha_sweep(const SystemConfig& config, std::span<const CouplingSchedule> schedules,
                        const SweepOptions& options);

struct MollerOptions {
    double t_prep = 8.0;
    double sigma = 0.15;  // energy spread of the packet
    double dt = 0.005;
    // largest admissible fraction of the prepared packet's norm within 1 of the box ends
    double edge_tolerance = 1e-4;
};

struct MollerResult {
    double lambda0 = 0.0;
    Lead channel = Lead::right;
    complex overlap;
    double phase = 0.0;
    double modulus = 0.0;
};

// Applies e^{-i T_prep H} e^{+i T_prep H_D} to a packet of decoupled lead modes around
// lambda0 and projects on the packet of coupled scattering states with the same profile.
MollerResult moller_probe(const BoxDiscretization& box, double lambda0, Lead channel, const MollerOptions& options);

}  // namespace nesskit
