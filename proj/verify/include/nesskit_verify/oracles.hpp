#pragma once

// Reference computations that do not go through the transfer-matrix machinery
// of the library: closed forms, bisection on textbook conditions, brute-force
// finite differences and direct spatial sums.

#include <array>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "nesskit/device.hpp"

namespace nesskit::verify {

// Square barrier of height v0 on a width-L interval, leads at potential 0, one mass m.
double square_barrier_transmission(double v0, double width, double mass, double energy);

// Transfer matrix of (phi, phi'/(2M)) across (a,b) by RK4 on the ODE
//   phi' = 2 M p,  p' = (V - lambda) phi,
// with steps_per_segment steps in every segment.
std::array<double, 4> rk4_transfer(const DeviceProfile& device, double lambda, int steps_per_segment = 4000);

// Bound energies of a square well of depth `depth` (V = -depth inside, 0 outside),
// found by scanning and bisecting the even/odd matching conditions.
std::vector<double> square_well_bound_energies(double depth, double width, double mass);

// Lowest `count` Dirichlet eigenvalues of H_I on (a,b) from the three-point
// discretization with n intervals (cell-averaged coefficients).
std::vector<double> fd_dirichlet_eigenvalues(const DeviceProfile& device, int intervals, int count);

// (1/2pi) int_v^inf [f_a - f_b] dlambda by composite Simpson on a fine grid.
double flat_current_integral(const ReservoirState& left, const ReservoirState& right, double v);

// Equilibrium density at x on a line of constant mass and potential, from the eigenmode sum
// of a Dirichlet box [-half_width, half_width].
double box_mode_density(const ReservoirState& r, double mass, double potential, double half_width, double x);

// sum_k f(eps_k) |<mode_k, psi>|^2 over the three Dirichlet blocks [x_min,a], [a,b],
// [b,x_max], with modes from a fine finite-difference eigensolve.
double block_mode_weight(const SystemConfig& config, const std::function<double(double)>& psi, double x_min,
                         double x_max, double h);

// A window in energy on one channel; the packet profile is cos^2 over [lo, hi].
struct PacketWindow {
    Lead channel;
    double lo;
    double hi;
};

// Gram matrix <P_i, P_j> / sqrt(|g_i|^2 |g_j|^2) of packets built from the library's
// generalized eigenfunctions, by trapezoid integration over [-half_width, half_width].
std::vector<std::vector<std::complex<double>>> packet_gram(const DeviceProfile& device,
                                                            const std::vector<PacketWindow>& windows,
                                                            double half_width, double h, int energy_nodes);

// Random piecewise device: a = 0, 1-4 segments, v_a >= v_b.
DeviceProfile random_device(std::mt19937_64& rng);

// Random device with reservoirs biased so that mu_a > mu_b; lambda_max defaulted.
SystemConfig random_biased_config(std::mt19937_64& rng);

// Random device with three identical reservoirs.
SystemConfig random_equilibrium_config(std::mt19937_64& rng);

}  // namespace nesskit::verify
