#include "nesskit/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nesskit {

std::vector<double> BoundState::sample(std::span<const double> grid) const {
    std::vector<double> out;
    out.reserve(grid.size());
    for (double x : grid) out.push_back(std::real(psi(x)));
    return out;
}

double bound_state_determinant(const DeviceProfile& device, double lambda) {
    const Mat2 t = interior_transfer(device, lambda).matrix;
    const double kappa_a = std::sqrt(std::max(0.0, 2.0 * device.m_a * (device.v_a - lambda)));
    const double kappa_b = std::sqrt(std::max(0.0, 2.0 * device.m_b * (device.v_b - lambda)));
    const double value = t.m11 + t.m12 * kappa_a / (2.0 * device.m_a);
    const double flux = t.m21 + t.m22 * kappa_a / (2.0 * device.m_a);
    return -value * kappa_b / (2.0 * device.m_b) - flux;
}

namespace {

std::vector<double> scan_roots(const DeviceProfile& device, double lo, double hi, int points, double tolerance) {
    std::vector<double> roots;
    double prev_x = lo;
    double prev_d = bound_state_determinant(device, lo);
    for (int i = 1; i <= points; ++i) {
        const double x = lo + (hi - lo) * i / points;
        const double d = bound_state_determinant(device, x);
        if (prev_d == 0.0) {
            roots.push_back(prev_x);
        } else if (std::signbit(prev_d) != std::signbit(d) && d != 0.0) {
            double a = prev_x, b = x;
            double da = prev_d;
            while (b - a > tolerance) {
                const double mid = 0.5 * (a + b);
                if (mid <= a || mid >= b) break;
                const double dm = bound_state_determinant(device, mid);
                if (dm == 0.0) {
                    a = b = mid;
                    break;
                }
                if (std::signbit(dm) == std::signbit(da)) {
                    a = mid;
                    da = dm;
                } else {
                    b = mid;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_x = x;
        prev_d = d;
    }
    // a zero exactly at v_b is a threshold resonance, not a bound state
    std::erase_if(roots, [&](double r) { return r >= hi - tolerance; });
    return roots;
}

}  // namespace

std::vector<BoundState> find_bound_states(const DeviceProfile& device, const BoundStateSearch& search) {
    const double floor = std::min(device.v_b, device.min_potential()) - 1.0;
    const double top = device.v_b;
    std::vector<double> roots = scan_roots(device, floor, top, search.scan_points, search.tolerance);
    if (search.verify_scan) {
        std::vector<double> fine = scan_roots(device, floor, top, 4 * search.scan_points, search.tolerance);
        if (fine.size() > roots.size()) roots = std::move(fine);
    }

    std::vector<BoundState> states;
    for (double lambda : roots) {
        BoundState bs;
        bs.lambda = lambda;
        bs.kappa_a = std::sqrt(2.0 * device.m_a * (device.v_a - lambda));
        bs.kappa_b = std::sqrt(2.0 * device.m_b * (device.v_b - lambda));
        bs.psi = Wavefunction::from_left_amplitudes(device, lambda, {}, 1.0, 0.0);
        const double tail_b = std::norm(bs.psi.right_amplitudes().backward);
        const double norm2 = 1.0 / (2.0 * bs.kappa_a) + bs.psi.interior_norm_squared() + tail_b / (2.0 * bs.kappa_b);
        bs.psi.scale(1.0 / std::sqrt(norm2));
        states.push_back(std::move(bs));
    }
    return states;
}

int dirichlet_zero_count(const DeviceProfile& device, double lambda) {
    State st{0.0, 1.0};
    int zeros = 0;
    const std::size_t segments = device.segment_count();
    for (std::size_t s = 0; s < segments; ++s) {
        const double m = device.masses[s];
        const double dx = device.breakpoints[s + 1] - device.breakpoints[s];
        const double e = lambda - device.potentials[s];
        const bool last = s + 1 == segments;
        const State next = apply(segment_propagator(m, device.potentials[s], lambda, dx), st);
        const double u0 = std::real(st.value);
        if (e > 1e-12) {
            // scaled Pruefer angle advances by exactly k dx
            const double k = std::sqrt(2.0 * m * e);
            const double w0 = 2.0 * m * std::real(st.flux) / k;
            const double theta0 = std::atan2(u0, w0);
            const double theta1 = theta0 + k * dx;
            const double below = std::floor(theta0 / std::numbers::pi);
            const double upto = last ? std::ceil(theta1 / std::numbers::pi) - 1.0 : std::floor(theta1 / std::numbers::pi);
            zeros += static_cast<int>(upto - below);
        } else {
            // convex where nonzero: at most one zero per segment
            const double u1 = std::real(next.value);
            if (u0 != 0.0) {
                if (u1 == 0.0) {
                    if (!last) ++zeros;
                } else if ((u0 < 0.0) != (u1 < 0.0)) {
                    ++zeros;
                }
            }
        }
        st = next;
    }
    return zeros;
}

namespace {

double well_eigenvalue(const DeviceProfile& device, int k) {
    double v_min = device.potentials.front();
    double v_max = v_min;
    double m_min = device.masses.front();
    for (double v : device.potentials) {
        v_min = std::min(v_min, v);
        v_max = std::max(v_max, v);
    }
    for (double m : device.masses) m_min = std::min(m_min, m);
    const double length = device.b - device.a;
    double lo = v_min;
    double hi = v_max + std::numbers::pi * std::numbers::pi * k * k / (2.0 * m_min * length * length) + 1.0;
    while (dirichlet_zero_count(device, hi) < k) hi += (hi - lo);
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (dirichlet_zero_count(device, mid) >= k) {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo <= 1e-14 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

WellMode make_mode(const DeviceProfile& device, double xi) {
    WellMode mode;
    mode.xi = xi;
    mode.chi = Wavefunction::confined(device, xi, State{0.0, 1.0});
    mode.chi.scale(1.0 / std::sqrt(mode.chi.interior_norm_squared()));
    return mode;
}

}  // namespace

std::vector<WellMode> closed_well_spectrum(const DeviceProfile& device, int k_max) {
    std::vector<WellMode> modes;
    modes.reserve(std::max(0, k_max));
    for (int k = 1; k <= k_max; ++k) modes.push_back(make_mode(device, well_eigenvalue(device, k)));
    return modes;
}

std::vector<WellMode> closed_well_spectrum_below(const DeviceProfile& device, double lambda_max) {
    const int count = dirichlet_zero_count(device, lambda_max);
    return closed_well_spectrum(device, count);
}

}  // namespace nesskit
