#include "nesskit_verify/oracles.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "nesskit/parallel.hpp"
#include "nesskit/quadrature.hpp"
#include "nesskit/scattering.hpp"

namespace nesskit::verify {

namespace {

constexpr double kPi = std::numbers::pi;

double fermi_integral_density(double lambda, const ReservoirState& r) {
    const double x = r.beta * (lambda - r.mu);
    return x > 0.0 ? r.c * std::log1p(std::exp(-x)) : r.c * (-x + std::log1p(std::exp(x)));
}

// Piecewise-constant field of the device integrated over [lo, hi], divided by hi - lo.
double average_over(const DeviceProfile& d, double lo, double hi, bool inverse_mass) {
    std::vector<double> cuts{lo};
    for (double x : {d.a, d.b}) {
        if (x > lo && x < hi) cuts.push_back(x);
    }
    for (double x : d.breakpoints) {
        if (x > lo && x < hi) cuts.push_back(x);
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        double mass = 0.0, potential = 0.0;
        if (mid <= d.a) {
            mass = d.m_a;
            potential = d.v_a;
        } else if (mid >= d.b) {
            mass = d.m_b;
            potential = d.v_b;
        } else {
            std::size_t k = 0;
            while (k + 1 < d.masses.size() && mid >= d.breakpoints[k + 1]) ++k;
            mass = d.masses[k];
            potential = d.potentials[k];
        }
        sum += (cuts[i + 1] - cuts[i]) * (inverse_mass ? 1.0 / mass : potential);
    }
    return sum / (hi - lo);
}

struct Tridiagonal {
    Eigen::VectorXd diag;
    Eigen::VectorXd sub;
};

Tridiagonal dirichlet_block(const DeviceProfile& d, double lo, double hi, int intervals) {
    const double h = (hi - lo) / intervals;
    const int n = intervals - 1;
    Tridiagonal t{Eigen::VectorXd(n), Eigen::VectorXd(std::max(n - 1, 0))};
    std::vector<double> inv(intervals);
    for (int l = 0; l < intervals; ++l) inv[l] = average_over(d, lo + l * h, lo + (l + 1) * h, true);
    for (int i = 0; i < n; ++i) {
        const double x = lo + (i + 1) * h;
        t.diag(i) = (inv[i] + inv[i + 1]) / (2.0 * h * h) + average_over(d, x - 0.5 * h, x + 0.5 * h, false);
        if (i + 1 < n) t.sub(i) = -inv[i + 1] / (2.0 * h * h);
    }
    return t;
}

}  // namespace

double square_barrier_transmission(double v0, double width, double mass, double energy) {
    if (energy == v0) return 1.0 / (1.0 + mass * v0 * width * width / 2.0);
    if (energy < v0) {
        const double kappa = std::sqrt(2.0 * mass * (v0 - energy));
        const double s = std::sinh(kappa * width);
        return 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * energy * (v0 - energy)));
    }
    const double k = std::sqrt(2.0 * mass * (energy - v0));
    const double s = std::sin(k * width);
    return 1.0 / (1.0 + v0 * v0 * s * s / (4.0 * energy * (energy - v0)));
}

std::array<double, 4> rk4_transfer(const DeviceProfile& device, double lambda, int steps_per_segment) {
    // columns: solutions started from (1,0) and (0,1)
    double y[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    for (std::size_t s = 0; s < device.masses.size(); ++s) {
        const double m = device.masses[s];
        const double v = device.potentials[s];
        const double dx = (device.breakpoints[s + 1] - device.breakpoints[s]) / steps_per_segment;
        auto rhs = [&](double phi, double p, double& dphi, double& dp) {
            dphi = 2.0 * m * p;
            dp = (v - lambda) * phi;
        };
        for (auto& col : y) {
            double phi = col[0], p = col[1];
            for (int i = 0; i < steps_per_segment; ++i) {
                double k1f, k1p, k2f, k2p, k3f, k3p, k4f, k4p;
                rhs(phi, p, k1f, k1p);
                rhs(phi + 0.5 * dx * k1f, p + 0.5 * dx * k1p, k2f, k2p);
                rhs(phi + 0.5 * dx * k2f, p + 0.5 * dx * k2p, k3f, k3p);
                rhs(phi + dx * k3f, p + dx * k3p, k4f, k4p);
                phi += dx / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
                p += dx / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            }
            col[0] = phi;
            col[1] = p;
        }
    }
    return {y[0][0], y[1][0], y[0][1], y[1][1]};
}

std::vector<double> square_well_bound_energies(double depth, double width, double mass) {
    auto even = [&](double e) {
        const double k = std::sqrt(2.0 * mass * (e + depth));
        const double kappa = std::sqrt(-2.0 * mass * e);
        return k * std::sin(0.5 * k * width) - kappa * std::cos(0.5 * k * width);
    };
    auto odd = [&](double e) {
        const double k = std::sqrt(2.0 * mass * (e + depth));
        const double kappa = std::sqrt(-2.0 * mass * e);
        return k * std::cos(0.5 * k * width) + kappa * std::sin(0.5 * k * width);
    };
    std::vector<double> roots;
    const int scan = 20000;
    const double lo = -depth;
    const double hi = -1e-13 * depth;
    for (const auto& f : {std::function<double(double)>(even), std::function<double(double)>(odd)}) {
        double prev_e = lo;
        double prev_f = f(lo);
        for (int i = 1; i <= scan; ++i) {
            const double e = lo + (hi - lo) * i / scan;
            const double fe = f(e);
            if ((prev_f < 0.0) != (fe < 0.0)) {
                double l = prev_e, r = e, fl = prev_f;
                for (int it = 0; it < 200 && r - l > 1e-15 * std::max(1.0, std::abs(l)); ++it) {
                    const double mid = 0.5 * (l + r);
                    const double fm = f(mid);
                    if ((fm < 0.0) == (fl < 0.0)) {
                        l = mid;
                        fl = fm;
                    } else {
                        r = mid;
                    }
                }
                roots.push_back(0.5 * (l + r));
            }
            prev_e = e;
            prev_f = fe;
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

std::vector<double> fd_dirichlet_eigenvalues(const DeviceProfile& device, int intervals, int count) {
    const Tridiagonal t = dirichlet_block(device, device.a, device.b, intervals);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(t.diag, t.sub, Eigen::EigenvaluesOnly);
    std::vector<double> out;
    for (int k = 0; k < count && k < solver.eigenvalues().size(); ++k) out.push_back(solver.eigenvalues()(k));
    return out;
}

double flat_current_integral(const ReservoirState& left, const ReservoirState& right, double v) {
    const double top = std::max({left.mu, right.mu, v}) + 60.0 / std::min(left.beta, right.beta);
    const int n = 400000;
    const double step = (top - v) / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double lambda = v + i * step;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += w * (fermi_integral_density(lambda, left) - fermi_integral_density(lambda, right));
    }
    return sum * step / 3.0 / (2.0 * kPi);
}

double box_mode_density(const ReservoirState& r, double mass, double potential, double half_width, double x) {
    const double cutoff = std::max(r.mu, potential) + 60.0 / r.beta;
    double u = 0.0;
    for (long n = 1;; ++n) {
        const double k = n * kPi / (2.0 * half_width);
        const double energy = potential + k * k / (2.0 * mass);
        if (energy > cutoff) break;
        const double s = std::sin(k * (x + half_width));
        u += fermi_integral_density(energy, r) * s * s / half_width;
    }
    return u;
}

double block_mode_weight(const SystemConfig& config, const std::function<double(double)>& psi, double x_min,
                         double x_max, double h) {
    const DeviceProfile& d = config.device;
    struct Block {
        double lo, hi;
        const ReservoirState* r;
    };
    const Block blocks[] = {{x_min, d.a, &config.reservoir_left},
                            {d.a, d.b, &config.reservoir_well},
                            {d.b, x_max, &config.reservoir_right}};
    double total = 0.0;
    for (const Block& block : blocks) {
        const int intervals = static_cast<int>(std::lround((block.hi - block.lo) / h));
        const double step = (block.hi - block.lo) / intervals;
        const Tridiagonal t = dirichlet_block(d, block.lo, block.hi, intervals);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(t.diag, t.sub, Eigen::ComputeEigenvectors);
        Eigen::VectorXd samples(t.diag.size());
        for (Eigen::Index i = 0; i < samples.size(); ++i) samples(i) = psi(block.lo + (i + 1) * step);
        // unit-norm eigenvectors are modes with h sum |chi|^2 = 1 after scaling by 1/sqrt(h)
        const Eigen::VectorXd overlaps = solver.eigenvectors().transpose() * samples * std::sqrt(step);
        for (Eigen::Index k = 0; k < overlaps.size(); ++k) {
            total += fermi_integral_density(solver.eigenvalues()(k), *block.r) * overlaps(k) * overlaps(k);
        }
    }
    return total;
}

std::vector<std::vector<std::complex<double>>> packet_gram(const DeviceProfile& device,
                                                            const std::vector<PacketWindow>& windows,
                                                            double half_width, double h, int energy_nodes) {
    const auto points = static_cast<std::size_t>(std::lround(2.0 * half_width / h)) + 1;
    std::vector<double> x(points);
    for (std::size_t i = 0; i < points; ++i) x[i] = -half_width + static_cast<double>(i) * h;
    std::vector<std::vector<std::complex<double>>> packets(windows.size());
    std::vector<double> norms(windows.size());
    parallel_for(windows.size(), [&](std::size_t w) {
        const PacketWindow& win = windows[w];
        const QuadratureRule rule = composite_gauss_legendre(win.lo, win.hi, 32, std::max(1, energy_nodes / 32));
        std::vector<std::complex<double>>& p = packets[w];
        p.assign(points, 0.0);
        double norm = 0.0;
        for (std::size_t e = 0; e < rule.nodes.size(); ++e) {
            const double c = std::cos(kPi * (rule.nodes[e] - 0.5 * (win.lo + win.hi)) / (win.hi - win.lo));
            const double g = c * c;
            norm += rule.weights[e] * g * g;
            const ScatteringSolution sol = scattering_matrix(device, rule.nodes[e]);
            const Wavefunction& phi = win.channel == Lead::left ? *sol.phi_a : sol.phi_b;
            for (std::size_t i = 0; i < points; ++i) p[i] += rule.weights[e] * g * phi(x[i]);
        }
        norms[w] = norm;
    });
    std::vector<std::vector<std::complex<double>>> gram(windows.size(),
                                                        std::vector<std::complex<double>>(windows.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) {
        for (std::size_t j = 0; j < windows.size(); ++j) {
            std::complex<double> s = 0.0;
            for (std::size_t n = 0; n < points; ++n) {
                const double w = (n == 0 || n + 1 == points) ? 0.5 : 1.0;
                s += w * std::conj(packets[i][n]) * packets[j][n];
            }
            gram[i][j] = s * h / std::sqrt(norms[i] * norms[j]);
        }
    }
    return gram;
}

DeviceProfile random_device(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    DeviceProfile d;
    d.a = 0.0;
    d.b = uniform(0.5, 3.0);
    const int segments = 1 + static_cast<int>(unit(rng) * 4.0);
    std::vector<double> cuts;
    for (int i = 1; i < segments; ++i) cuts.push_back(uniform(0.05, 0.95) * d.b);
    std::sort(cuts.begin(), cuts.end());
    d.breakpoints = {d.a};
    for (double c : cuts) {
        if (c - d.breakpoints.back() > 1e-3) d.breakpoints.push_back(c);
    }
    if (d.b - d.breakpoints.back() < 1e-3) d.breakpoints.pop_back();
    d.breakpoints.push_back(d.b);
    d.masses.clear();
    d.potentials.clear();
    for (std::size_t s = 0; s + 1 < d.breakpoints.size(); ++s) {
        d.masses.push_back(uniform(0.3, 3.0));
        d.potentials.push_back(uniform(-4.0, 4.0));
    }
    d.m_a = uniform(0.3, 3.0);
    d.m_b = uniform(0.3, 3.0);
    d.v_b = uniform(-1.0, 0.5);
    d.v_a = d.v_b + uniform(0.0, 1.5);
    return d;
}

SystemConfig random_biased_config(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    SystemConfig c;
    c.device = random_device(rng);
    const double beta = uniform(1.0, 6.0);
    const double mu_a = c.device.v_a + uniform(0.2, 2.5);
    const double mu_b = mu_a - uniform(0.3, 1.5);
    c.reservoir_left = {beta, mu_a, uniform(0.5, 2.0)};
    c.reservoir_right = {beta * uniform(0.7, 1.3), mu_b, uniform(0.5, 2.0)};
    c.reservoir_well = {beta, 0.5 * (mu_a + mu_b), 1.0};
    c.spectral.lambda_max = c.default_lambda_max();
    c.box.x_min = c.device.a - 40.0;
    c.box.x_max = c.device.b + 40.0;
    return c;
}

SystemConfig random_equilibrium_config(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    SystemConfig c;
    c.device = random_device(rng);
    const ReservoirState r{uniform(1.0, 6.0), c.device.v_a + uniform(-0.5, 2.0), uniform(0.5, 2.0)};
    c.reservoir_left = c.reservoir_well = c.reservoir_right = r;
    c.spectral.lambda_max = c.default_lambda_max();
    c.box.x_min = c.device.a - 40.0;
    c.box.x_max = c.device.b + 40.0;
    return c;
}

}  // namespace nesskit::verify
