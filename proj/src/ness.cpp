#include "nesskit/ness.hpp"

#include <cmath>
#include <numbers>

#include "nesskit/errors.hpp"
#include "nesskit/parallel.hpp"
#include "nesskit/scattering.hpp"

namespace nesskit {

double occupation(double lambda, const ReservoirState& r) {
    const double x = r.beta * (lambda - r.mu);
    if (x > 0.0) return r.c * std::log1p(std::exp(-x));
    // ln(1 + e^{-x}) = -x + ln(1 + e^{x})
    return r.c * (-x + std::log1p(std::exp(x)));
}

SpectralGrid spectral_grid(const SystemConfig& config) {
    return build_spectral_grid(config.device.v_b, config.device.v_a, config.spectral.lambda_max,
                               config.spectral.nodes_per_panel, config.spectral.panels);
}

namespace {

void fill_continuum(const SystemConfig& config, DistributionFunction& dist) {
    dist.grid = spectral_grid(config);
    const std::size_t n = dist.grid.size();
    dist.occupation_b.resize(n);
    dist.occupation_a.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lambda = dist.grid.nodes[i];
        dist.occupation_b[i] = occupation(lambda, config.reservoir_right);
        dist.occupation_a[i] = dist.grid.channels[i] == 2 ? occupation(lambda, config.reservoir_left) : 0.0;
    }
}

// Lead eigenfunction sin(k (x - p)) / sqrt(pi q) of the decoupled half-line.
double lead_mode(double x, double contact, double k, double q) {
    return std::sin(k * (x - contact)) / std::sqrt(std::numbers::pi * q);
}

}  // namespace

DistributionFunction distribution_D(const SystemConfig& config) {
    DistributionFunction dist;
    dist.basis = DistributionFunction::Basis::decoupled;
    fill_continuum(config, dist);
    for (const WellMode& mode : closed_well_spectrum_below(config.device, config.spectral.lambda_max)) {
        dist.points.push_back({mode.xi, occupation(mode.xi, config.reservoir_well)});
    }
    return dist;
}

std::vector<double> sudden_bound_weights(const SystemConfig& config, std::span<const BoundState> bound) {
    const DeviceProfile& device = config.device;
    const SpectralGrid grid = spectral_grid(config);
    const std::vector<WellMode> modes = closed_well_spectrum_below(device, config.spectral.lambda_max);
    std::vector<double> weights;
    weights.reserve(bound.size());
    for (const BoundState& bs : bound) {
        double w = 0.0;
        for (const WellMode& mode : modes) {
            w += occupation(mode.xi, config.reservoir_well) * std::norm(bs.psi.interior_overlap(mode.chi));
        }
        // lead tails A e^{kappa_a (x-a)} and B e^{-kappa_b (x-b)} against sin(k(x-p))/sqrt(pi q)
        const double amp_a = std::real(bs.psi.left_amplitudes().forward);
        const double amp_b = std::real(bs.psi.right_amplitudes().backward);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double lambda = grid.nodes[i];
            const ChannelWavenumber cb = channel_wavenumber(device, Lead::right, lambda);
            const double ob = amp_b / std::sqrt(std::numbers::pi * cb.q) * cb.k / (bs.kappa_b * bs.kappa_b + cb.k * cb.k);
            w += grid.weights[i] * occupation(lambda, config.reservoir_right) * ob * ob;
            if (grid.channels[i] == 2) {
                const ChannelWavenumber ca = channel_wavenumber(device, Lead::left, lambda);
                const double oa =
                    -amp_a / std::sqrt(std::numbers::pi * ca.q) * ca.k / (bs.kappa_a * bs.kappa_a + ca.k * ca.k);
                w += grid.weights[i] * occupation(lambda, config.reservoir_left) * oa * oa;
            }
        }
        weights.push_back(w);
    }
    return weights;
}

DistributionFunction distribution_ness(const SystemConfig& config, const BoundWeightSource& source) {
    DistributionFunction dist;
    dist.basis = DistributionFunction::Basis::coupled;
    fill_continuum(config, dist);
    const std::vector<BoundState> bound = find_bound_states(config.device);
    std::vector<double> weights;
    if (source.kind == BoundWeightSource::Kind::sudden) {
        weights = sudden_bound_weights(config, bound);
    } else {
        if (source.values.size() != bound.size()) {
            throw NumericalError("distribution_ness: device has " + std::to_string(bound.size()) +
                                 " bound states but " + std::to_string(source.values.size()) +
                                 " simulated weights were supplied");
        }
        weights = source.values;
    }
    for (std::size_t j = 0; j < bound.size(); ++j) dist.points.push_back({bound[j].lambda, weights[j]});
    return dist;
}

CarrierDensity carrier_density(const SystemConfig& config, const DistributionFunction& dist,
                               std::span<const double> x) {
    const DeviceProfile& device = config.device;
    CarrierDensity out;
    out.x.assign(x.begin(), x.end());
    out.bound.assign(x.size(), 0.0);
    out.continuum.assign(x.size(), 0.0);
    const std::size_t nodes = dist.grid.size();
    std::vector<std::vector<double>> per_node(nodes);

    if (dist.basis == DistributionFunction::Basis::coupled) {
        const std::vector<BoundState> bound = find_bound_states(device);
        if (bound.size() != dist.points.size()) {
            throw NumericalError("carrier_density: distribution has " + std::to_string(dist.points.size()) +
                                 " point weights, device has " + std::to_string(bound.size()) + " bound states");
        }
        for (std::size_t j = 0; j < bound.size(); ++j) {
            for (std::size_t n = 0; n < x.size(); ++n) out.bound[n] += dist.points[j].weight * std::norm(bound[j].psi(x[n]));
        }
        parallel_for(nodes, [&](std::size_t i) {
            const ScatteringSolution sol = scattering_matrix(device, dist.grid.nodes[i]);
            std::vector<double>& row = per_node[i];
            row.resize(x.size());
            for (std::size_t n = 0; n < x.size(); ++n) {
                double v = dist.occupation_b[i] * std::norm(sol.phi_b(x[n]));
                if (sol.phi_a) v += dist.occupation_a[i] * std::norm((*sol.phi_a)(x[n]));
                row[n] = v;
            }
        });
    } else {
        const std::vector<WellMode> modes = closed_well_spectrum_below(device, dist.grid.lambda_max);
        if (modes.size() != dist.points.size()) {
            throw NumericalError("carrier_density: distribution does not match the well spectrum of this device");
        }
        for (std::size_t k = 0; k < modes.size(); ++k) {
            for (std::size_t n = 0; n < x.size(); ++n) out.bound[n] += dist.points[k].weight * std::norm(modes[k].chi(x[n]));
        }
        parallel_for(nodes, [&](std::size_t i) {
            const double lambda = dist.grid.nodes[i];
            const ChannelWavenumber cb = channel_wavenumber(device, Lead::right, lambda);
            const ChannelWavenumber ca = channel_wavenumber(device, Lead::left, lambda);
            std::vector<double>& row = per_node[i];
            row.assign(x.size(), 0.0);
            for (std::size_t n = 0; n < x.size(); ++n) {
                if (x[n] > device.b) {
                    const double psi = lead_mode(x[n], device.b, cb.k, cb.q);
                    row[n] = dist.occupation_b[i] * psi * psi;
                } else if (x[n] < device.a && dist.grid.channels[i] == 2) {
                    const double psi = lead_mode(x[n], device.a, ca.k, ca.q);
                    row[n] = dist.occupation_a[i] * psi * psi;
                }
            }
        });
    }
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t n = 0; n < x.size(); ++n) out.continuum[n] += dist.grid.weights[i] * per_node[i][n];
    }
    out.total.resize(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) out.total[n] = out.bound[n] + out.continuum[n];
    return out;
}

std::vector<double> current_density(const SystemConfig& config, const DistributionFunction& dist,
                                    std::span<const double> x) {
    std::vector<double> j(x.size(), 0.0);
    // decoupled lead modes are real standing waves and carry no current
    if (dist.basis == DistributionFunction::Basis::decoupled) return j;
    const std::size_t nodes = dist.grid.size();
    std::vector<std::vector<double>> per_node(nodes);
    parallel_for(nodes, [&](std::size_t i) {
        const ScatteringSolution sol = scattering_matrix(config.device, dist.grid.nodes[i]);
        std::vector<double>& row = per_node[i];
        row.resize(x.size());
        for (std::size_t n = 0; n < x.size(); ++n) {
            double v = dist.occupation_b[i] * sol.phi_b.probability_current(x[n]);
            if (sol.phi_a) v += dist.occupation_a[i] * sol.phi_a->probability_current(x[n]);
            row[n] = v;
        }
    });
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t n = 0; n < x.size(); ++n) j[n] += dist.grid.weights[i] * per_node[i][n];
    }
    return j;
}

double landauer_current(const SystemConfig& config) {
    const SpectralGrid grid = spectral_grid(config);
    std::vector<double> integrand(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t i) {
        if (grid.channels[i] != 2) return;
        const double lambda = grid.nodes[i];
        const double bias = occupation(lambda, config.reservoir_left) - occupation(lambda, config.reservoir_right);
        integrand[i] = transmission(config.device, lambda) * bias;
    });
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) total += grid.weights[i] * integrand[i];
    return total / (2.0 * std::numbers::pi);
}

double current_truncation_bound(const SystemConfig& config) {
    // ln(1 + y) <= y, so int_X^inf c ln(1 + e^{-beta(l - mu)}) dl <= (c / beta) e^{-beta (X - mu)}
    const double lambda_max = config.spectral.lambda_max;
    double bound = 0.0;
    for (const ReservoirState* r : {&config.reservoir_left, &config.reservoir_right}) {
        bound += r->c / r->beta * std::exp(-r->beta * (lambda_max - r->mu));
    }
    return bound / (2.0 * std::numbers::pi);
}

std::vector<double> current_sample_points(const DeviceProfile& device) {
    const double a = device.a;
    const double b = device.b;
    const double length = b - a;
    return {a - 2.0 * length,  a - length,         a - 0.25 * length, a + 0.15 * length, a + 0.4 * length,
            a + 0.6 * length,  a + 0.85 * length,  b + 0.25 * length, b + length,        b + 2.0 * length};
}

}  // namespace nesskit
