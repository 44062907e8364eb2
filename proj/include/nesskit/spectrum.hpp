#pragma once

#include <span>
#include <vector>

#include "nesskit/device.hpp"
#include "nesskit/scattering.hpp"

namespace nesskit {

// Eigenvalue of the coupled H below v_b with its L2-normalized real eigenfunction.
struct BoundState {
    double lambda = 0.0;
    double kappa_a = 0.0;
    double kappa_b = 0.0;
    Wavefunction psi;

    std::vector<double> sample(std::span<const double> grid) const;
};

struct BoundStateSearch {
    int scan_points = 1000;
    double tolerance = 1e-12;
    // Repeat the scan at 4x resolution and keep the finer result if it finds more roots.
    bool verify_scan = false;
};

// Matching determinant whose zeros below v_b are the bound-state energies:
// the solution decaying into the left lead, propagated to b, is tested against
// the decaying solution of the right lead.
double bound_state_determinant(const DeviceProfile& device, double lambda);

std::vector<BoundState> find_bound_states(const DeviceProfile& device, const BoundStateSearch& search = {});

// Dirichlet eigenmode of the isolated well H_I on (a, b).
struct WellMode {
    double xi = 0.0;
    Wavefunction chi;  // zero outside [a, b]
};

// Number of zeros in (a, b) of the Dirichlet solution phi(a) = 0 at energy lambda,
// which equals the number of well eigenvalues below lambda.
int dirichlet_zero_count(const DeviceProfile& device, double lambda);

std::vector<WellMode> closed_well_spectrum(const DeviceProfile& device, int k_max);

// All well modes with xi <= lambda_max.
std::vector<WellMode> closed_well_spectrum_below(const DeviceProfile& device, double lambda_max);

}  // namespace nesskit
