#pragma once

// Stationary scattering for H = -(1/2) d/dx (1/M) d/dx + V with optional delta
// barriers at a and b.
//
// Solutions are propagated as the pair (phi, phi'/(2M)). Both components are
// continuous across mass and potential jumps; a delta barrier of strength g at p
// adds g * phi(p) to the second component. Within a constant (m, v) segment the
// propagation is exact (trigonometric / hyperbolic / linear closed form).

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "nesskit/device.hpp"
#include "nesskit/quadrature.hpp"

namespace nesskit {

using complex = std::complex<double>;

struct Mat2 {
    double m11 = 1.0, m12 = 0.0, m21 = 0.0, m22 = 1.0;

    double det() const { return m11 * m22 - m12 * m21; }
    double trace() const { return m11 + m22; }
};

Mat2 operator*(const Mat2& lhs, const Mat2& rhs);

struct TransferMatrix {
    Mat2 matrix;
    double lambda = 0.0;
};

struct DeltaCouplings {
    double g_a = 0.0;
    double g_b = 0.0;
};

// (phi, phi'/(2M)) at one point.
struct State {
    complex value;
    complex flux;
};

State apply(const Mat2& m, const State& s);

// Propagator across a constant (mass, potential) segment of length dx (dx may be negative).
Mat2 segment_propagator(double mass, double potential, double lambda, double dx);

// Maps the state at a-0 to the state at b+0, delta jumps at a and b included.
TransferMatrix interior_transfer(const DeviceProfile& device, double lambda, DeltaCouplings couplings = {});

// Value and derivative of a solution at one point.
struct Sample {
    complex value;
    complex derivative;
};

// One solution of H phi = lambda phi on the whole line, stored as lead amplitudes
// plus the interior state at every breakpoint.
//
// In an open lead the amplitudes multiply e^{+ik(x-p)} and e^{-ik(x-p)}; in a
// closed lead they multiply e^{+kappa(x-p)} and e^{-kappa(x-p)}; at the threshold
// the lead solution is linear, value + 2m*flux*(x-p).
class Wavefunction {
public:
    Wavefunction() = default;

    // Solution with given left-lead amplitudes. The right-lead amplitudes follow by
    // propagation; in a closed right lead the growing amplitude is set to zero.
    static Wavefunction from_left_amplitudes(const DeviceProfile& device, double lambda,
                                             DeltaCouplings couplings, complex forward, complex backward);

    // Solution on [a, b] only, starting from the given state at a+0; zero outside.
    static Wavefunction confined(const DeviceProfile& device, double lambda, State at_a);

    Sample evaluate(double x) const;
    complex operator()(double x) const { return evaluate(x).value; }

    // (phi, phi'/(2M)) at x; the flux component is continuous except at a delta.
    State state_at(double x) const;

    // 2 Im(conj(phi) * phi'/(2M)) = (1/M) Im(conj(phi) phi'); constant in x.
    double probability_current(double x) const;

    Wavefunction& scale(complex factor);

    // Integral of |phi|^2 over (a, b), exact to quadrature precision per segment.
    double interior_norm_squared() const;

    // Integral of conj(other) * phi over (a, b).
    complex interior_overlap(const Wavefunction& other) const;

    double lambda() const { return lambda_; }
    const DeviceProfile& device() const { return device_; }

    struct LeadAmplitudes {
        complex forward;   // e^{+ik(x-p)} or e^{+kappa(x-p)}
        complex backward;  // e^{-ik(x-p)} or e^{-kappa(x-p)}
    };
    const LeadAmplitudes& left_amplitudes() const { return left_; }
    const LeadAmplitudes& right_amplitudes() const { return right_; }

private:
    Sample evaluate_lead(Lead lead, double x) const;

    DeviceProfile device_;
    double lambda_ = 0.0;
    DeltaCouplings couplings_;
    bool confined_ = false;
    LeadAmplitudes left_{};
    LeadAmplitudes right_{};
    // state just right of each breakpoint x_0..x_{K-1}, plus the state at b-0
    std::vector<State> interior_;
};

struct ScatteringSolution {
    double lambda = 0.0;
    bool two_channel = false;  // lambda >= v_a
    ChannelWavenumber left;
    ChannelWavenumber right;
    complex s_aa, s_ab, s_ba, s_bb;

    // Normalized generalized eigenfunctions, phi_p = phi~_p / sqrt(4 pi q_p).
    std::optional<Wavefunction> phi_a;  // two-channel only
    Wavefunction phi_b;

    // Filled by eigenfunctions(): samples on the caller's grid.
    std::vector<double> grid;
    std::vector<complex> phi_a_samples;
    std::vector<complex> phi_b_samples;

    // (q_b/q_a)|S_ba|^2; zero below v_a.
    double transmission() const;
};

// S-matrix entries and the normalized eigenfunctions at lambda >= v_b.
// Throws NumericalError at a degenerate threshold.
ScatteringSolution scattering_matrix(const DeviceProfile& device, double lambda, DeltaCouplings couplings = {});

// As scattering_matrix, with phi_a and phi_b sampled on grid.
ScatteringSolution eigenfunctions(const DeviceProfile& device, double lambda, DeltaCouplings couplings,
                                  std::span<const double> grid);

// Flux-normalized transmission probability at zero delta coupling.
double transmission(const DeviceProfile& device, double lambda);

// Continuum part of the generalized Fourier transform of f sampled on a uniform grid:
// per spectral node, the overlaps with conj(phi_b) and conj(phi_a) (zero below v_a).
struct FourierCoefficients {
    std::vector<complex> channel_b;
    std::vector<complex> channel_a;
};

FourierCoefficients generalized_fourier(const DeviceProfile& device, std::span<const double> x,
                                        std::span<const complex> f, const SpectralGrid& spectral);

}  // namespace nesskit
