#include "nesskit/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nesskit/errors.hpp"

namespace nesskit {

namespace {

constexpr double kLinearBranch = 1e-12;
constexpr complex kI{0.0, 1.0};

enum class LeadKind { open, closed, threshold };

LeadKind lead_kind(double lambda, double v) {
    if (lambda > v) return LeadKind::open;
    if (lambda < v) return LeadKind::closed;
    return LeadKind::threshold;
}

// Lead solution at the contact point p for the given amplitudes.
State lead_state(LeadKind kind, double mass, const ChannelWavenumber& w, complex forward, complex backward) {
    switch (kind) {
        case LeadKind::open:
            return {forward + backward, kI * w.q * (forward - backward)};
        case LeadKind::closed:
            return {forward + backward, (w.kappa / (2.0 * mass)) * (forward - backward)};
        case LeadKind::threshold:
            return {forward, backward};
    }
    return {};
}

int panels_for(double wavenumber, double length) {
    return 1 + static_cast<int>(std::abs(wavenumber * length) / 3.0);
}

// Gauss-Legendre integral of fn over every interior segment.
template <typename Fn>
complex integrate_interior(const DeviceProfile& device, double lambda, Fn&& fn) {
    complex total{};
    const QuadratureRule& rule = gauss_legendre(20);
    for (std::size_t s = 0; s < device.segment_count(); ++s) {
        const double lo = device.breakpoints[s];
        const double hi = device.breakpoints[s + 1];
        const double e = lambda - device.potentials[s];
        const double wavenumber = std::sqrt(2.0 * device.masses[s] * std::abs(e));
        const int panels = panels_for(wavenumber, hi - lo);
        const double width = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double left = lo + p * width;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double x = left + 0.5 * width * (rule.nodes[i] + 1.0);
                total += 0.5 * width * rule.weights[i] * fn(s, x);
            }
        }
    }
    return total;
}

// Solves c1 * u + c2 * v = rhs for (u, v), two complex 2-vectors per column.
bool solve2(const State& c1, const State& c2, const State& rhs, complex& u, complex& v) {
    const complex det = c1.value * c2.flux - c2.value * c1.flux;
    const double scale = std::abs(c1.value * c2.flux) + std::abs(c2.value * c1.flux);
    if (std::abs(det) <= 1e-14 * scale || det == complex{}) return false;
    u = (rhs.value * c2.flux - c2.value * rhs.flux) / det;
    v = (c1.value * rhs.flux - rhs.value * c1.flux) / det;
    return true;
}

}  // namespace

Mat2 operator*(const Mat2& l, const Mat2& r) {
    return {l.m11 * r.m11 + l.m12 * r.m21, l.m11 * r.m12 + l.m12 * r.m22,
            l.m21 * r.m11 + l.m22 * r.m21, l.m21 * r.m12 + l.m22 * r.m22};
}

State apply(const Mat2& m, const State& s) {
    return {m.m11 * s.value + m.m12 * s.flux, m.m21 * s.value + m.m22 * s.flux};
}

Mat2 segment_propagator(double mass, double potential, double lambda, double dx) {
    const double e = lambda - potential;
    if (std::abs(e) < kLinearBranch) return {1.0, 2.0 * mass * dx, 0.0, 1.0};
    if (e > 0.0) {
        const double k = std::sqrt(2.0 * mass * e);
        const double c = std::cos(k * dx);
        const double s = std::sin(k * dx);
        return {c, 2.0 * mass * s / k, -k * s / (2.0 * mass), c};
    }
    const double kappa = std::sqrt(-2.0 * mass * e);
    const double c = std::cosh(kappa * dx);
    const double s = std::sinh(kappa * dx);
    return {c, 2.0 * mass * s / kappa, kappa * s / (2.0 * mass), c};
}

TransferMatrix interior_transfer(const DeviceProfile& device, double lambda, DeltaCouplings couplings) {
    Mat2 total{1.0, 0.0, couplings.g_a, 1.0};
    for (std::size_t s = 0; s < device.segment_count(); ++s) {
        const double dx = device.breakpoints[s + 1] - device.breakpoints[s];
        total = segment_propagator(device.masses[s], device.potentials[s], lambda, dx) * total;
    }
    total = Mat2{1.0, 0.0, couplings.g_b, 1.0} * total;
    return {total, lambda};
}

// ---------------------------------------------------------------------------

Wavefunction Wavefunction::from_left_amplitudes(const DeviceProfile& device, double lambda, DeltaCouplings couplings,
                                                complex forward, complex backward) {
    Wavefunction wf;
    wf.device_ = device;
    wf.lambda_ = lambda;
    wf.couplings_ = couplings;
    wf.left_ = {forward, backward};

    const ChannelWavenumber left = channel_wavenumber(device, Lead::left, lambda);
    State state = lead_state(lead_kind(lambda, device.v_a), device.m_a, left, forward, backward);
    state.flux += couplings.g_a * state.value;

    const std::size_t segments = device.segment_count();
    wf.interior_.resize(segments + 1);
    wf.interior_[0] = state;
    for (std::size_t s = 0; s < segments; ++s) {
        const double dx = device.breakpoints[s + 1] - device.breakpoints[s];
        state = apply(segment_propagator(device.masses[s], device.potentials[s], lambda, dx), state);
        wf.interior_[s + 1] = state;
    }
    state.flux += couplings.g_b * state.value;

    const ChannelWavenumber right = channel_wavenumber(device, Lead::right, lambda);
    switch (lead_kind(lambda, device.v_b)) {
        case LeadKind::open: {
            const complex ratio = state.flux / (kI * right.q);
            wf.right_ = {0.5 * (state.value + ratio), 0.5 * (state.value - ratio)};
            break;
        }
        case LeadKind::closed:
            wf.right_ = {0.0, state.value};
            break;
        case LeadKind::threshold:
            wf.right_ = {state.value, state.flux};
            break;
    }
    return wf;
}

Wavefunction Wavefunction::confined(const DeviceProfile& device, double lambda, State at_a) {
    Wavefunction wf;
    wf.device_ = device;
    wf.lambda_ = lambda;
    wf.confined_ = true;
    const std::size_t segments = device.segment_count();
    wf.interior_.resize(segments + 1);
    wf.interior_[0] = at_a;
    for (std::size_t s = 0; s < segments; ++s) {
        const double dx = device.breakpoints[s + 1] - device.breakpoints[s];
        wf.interior_[s + 1] = apply(segment_propagator(device.masses[s], device.potentials[s], lambda, dx), wf.interior_[s]);
    }
    return wf;
}

Sample Wavefunction::evaluate_lead(Lead lead, double x) const {
    const bool left = lead == Lead::left;
    const double mass = device_.lead_mass(lead);
    const double v = device_.lead_potential(lead);
    const LeadAmplitudes& amp = left ? left_ : right_;
    const double y = x - (left ? device_.a : device_.b);
    const ChannelWavenumber w = channel_wavenumber(device_, lead, lambda_);
    switch (lead_kind(lambda_, v)) {
        case LeadKind::open: {
            const complex fwd = amp.forward * std::exp(kI * (w.k * y));
            const complex bwd = amp.backward * std::exp(-kI * (w.k * y));
            return {fwd + bwd, kI * w.k * (fwd - bwd)};
        }
        case LeadKind::closed: {
            const complex grow = amp.forward == complex{} ? complex{} : amp.forward * std::exp(w.kappa * y);
            const complex decay = amp.backward == complex{} ? complex{} : amp.backward * std::exp(-w.kappa * y);
            return {grow + decay, w.kappa * (grow - decay)};
        }
        case LeadKind::threshold:
            return {amp.forward + 2.0 * mass * amp.backward * y, 2.0 * mass * amp.backward};
    }
    return {};
}

Sample Wavefunction::evaluate(double x) const {
    if (confined_) {
        if (x < device_.a || x > device_.b) return {};
    } else {
        if (x <= device_.a) return evaluate_lead(Lead::left, x);
        if (x >= device_.b) return evaluate_lead(Lead::right, x);
    }
    const std::size_t s = std::min(device_.segment_at(x), device_.segment_count() - 1);
    const double mass = device_.masses[s];
    const State st =
        apply(segment_propagator(mass, device_.potentials[s], lambda_, x - device_.breakpoints[s]), interior_[s]);
    return {st.value, 2.0 * mass * st.flux};
}

State Wavefunction::state_at(double x) const {
    const Sample sm = evaluate(x);
    return {sm.value, sm.derivative / (2.0 * coefficients_at(device_, x).mass)};
}

double Wavefunction::probability_current(double x) const {
    const State st = state_at(x);
    return 2.0 * std::imag(std::conj(st.value) * st.flux);
}

Wavefunction& Wavefunction::scale(complex factor) {
    left_.forward *= factor;
    left_.backward *= factor;
    right_.forward *= factor;
    right_.backward *= factor;
    for (State& s : interior_) {
        s.value *= factor;
        s.flux *= factor;
    }
    return *this;
}

double Wavefunction::interior_norm_squared() const {
    return std::real(integrate_interior(device_, lambda_, [&](std::size_t s, double x) -> complex {
        const State st = apply(
            segment_propagator(device_.masses[s], device_.potentials[s], lambda_, x - device_.breakpoints[s]),
            interior_[s]);
        return std::norm(st.value);
    }));
}

complex Wavefunction::interior_overlap(const Wavefunction& other) const {
    // integrate on the finer of the two oscillation scales
    const double lam = std::max(lambda_, other.lambda_);
    return integrate_interior(device_, lam, [&](std::size_t, double x) -> complex {
        return std::conj(other.evaluate(x).value) * evaluate(x).value;
    });
}

// ---------------------------------------------------------------------------

double ScatteringSolution::transmission() const {
    if (!two_channel) return 0.0;
    return right.q / left.q * std::norm(s_ba);
}

ScatteringSolution scattering_matrix(const DeviceProfile& device, double lambda, DeltaCouplings couplings) {
    if (!(lambda > device.v_b)) {
        throw NumericalError("scattering_matrix: threshold degeneracy at lambda = v_b (lambda must exceed v_b)");
    }
    if (lambda == device.v_a) throw NumericalError("scattering_matrix: threshold degeneracy at lambda = v_a");

    ScatteringSolution sol;
    sol.lambda = lambda;
    sol.left = channel_wavenumber(device, Lead::left, lambda);
    sol.right = channel_wavenumber(device, Lead::right, lambda);
    sol.two_channel = !sol.left.evanescent;
    const Mat2 t = interior_transfer(device, lambda, couplings).matrix;
    const double qb = sol.right.q;
    const State w_out{1.0, kI * qb};
    const State w_in{1.0, -kI * qb};

    if (sol.two_channel) {
        const double qa = sol.left.q;
        const State c1 = apply(t, State{1.0, -kI * qa});
        const State c2{-w_out.value, -w_out.flux};
        const State r0 = apply(t, State{1.0, kI * qa});
        const State rhs{-r0.value, -r0.flux};
        if (!solve2(c1, c2, rhs, sol.s_aa, sol.s_ba)) {
            throw NumericalError("scattering_matrix: threshold degeneracy (singular matching for phi_a)");
        }
        Wavefunction phi_a = Wavefunction::from_left_amplitudes(device, lambda, couplings, 1.0, sol.s_aa);
        phi_a.scale(1.0 / std::sqrt(4.0 * std::numbers::pi * qa));
        sol.phi_a = std::move(phi_a);
    }

    // phi_b: outgoing (or decaying) on the left, incoming e^{-ik(x-b)} on the right
    State left_unit;
    if (sol.two_channel) {
        left_unit = {1.0, -kI * sol.left.q};
    } else {
        left_unit = {1.0, sol.left.kappa / (2.0 * device.m_a)};
    }
    const State c1 = apply(t, left_unit);
    const State c2{-w_out.value, -w_out.flux};
    complex left_amp;
    if (!solve2(c1, c2, w_in, left_amp, sol.s_bb)) {
        throw NumericalError("scattering_matrix: threshold degeneracy (singular matching for phi_b)");
    }
    Wavefunction phi_b = sol.two_channel
                             ? Wavefunction::from_left_amplitudes(device, lambda, couplings, 0.0, left_amp)
                             : Wavefunction::from_left_amplitudes(device, lambda, couplings, left_amp, 0.0);
    phi_b.scale(1.0 / std::sqrt(4.0 * std::numbers::pi * qb));
    sol.phi_b = std::move(phi_b);
    if (sol.two_channel) sol.s_ab = left_amp;
    return sol;
}

ScatteringSolution eigenfunctions(const DeviceProfile& device, double lambda, DeltaCouplings couplings,
                                  std::span<const double> grid) {
    ScatteringSolution sol = scattering_matrix(device, lambda, couplings);
    sol.grid.assign(grid.begin(), grid.end());
    sol.phi_b_samples.reserve(grid.size());
    for (double x : grid) sol.phi_b_samples.push_back(sol.phi_b(x));
    if (sol.phi_a) {
        sol.phi_a_samples.reserve(grid.size());
        for (double x : grid) sol.phi_a_samples.push_back((*sol.phi_a)(x));
    }
    return sol;
}

double transmission(const DeviceProfile& device, double lambda) {
    if (!(lambda > device.v_a)) return 0.0;
    return scattering_matrix(device, lambda).transmission();
}

FourierCoefficients generalized_fourier(const DeviceProfile& device, std::span<const double> x,
                                        std::span<const complex> f, const SpectralGrid& spectral) {
    if (x.size() != f.size() || x.size() < 2) {
        throw NumericalError("generalized_fourier: grid and samples must have equal length >= 2");
    }
    double peak = 0.0;
    for (const complex& v : f) peak = std::max(peak, std::abs(v));
    if (std::abs(f.front()) > 1e-10 * peak || std::abs(f.back()) > 1e-10 * peak) {
        throw NumericalError("generalized_fourier: support of f exceeds the sampled grid");
    }
    // trapezoid weights
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t n = 0; n + 1 < x.size(); ++n) {
        const double half = 0.5 * (x[n + 1] - x[n]);
        w[n] += half;
        w[n + 1] += half;
    }
    FourierCoefficients out;
    out.channel_b.resize(spectral.size());
    out.channel_a.resize(spectral.size());
    for (std::size_t i = 0; i < spectral.size(); ++i) {
        const ScatteringSolution sol = scattering_matrix(device, spectral.nodes[i]);
        complex cb{}, ca{};
        for (std::size_t n = 0; n < x.size(); ++n) {
            if (f[n] == complex{}) continue;
            cb += w[n] * f[n] * std::conj(sol.phi_b(x[n]));
            if (sol.phi_a) ca += w[n] * f[n] * std::conj((*sol.phi_a)(x[n]));
        }
        out.channel_b[i] = cb;
        out.channel_a[i] = ca;
    }
    return out;
}

}  // namespace nesskit
