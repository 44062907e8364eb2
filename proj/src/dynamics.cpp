#include "nesskit/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nesskit/errors.hpp"
#include "nesskit/ness.hpp"
#include "nesskit/parallel.hpp"
#include "nesskit/quadrature.hpp"
#include "nesskit/scattering.hpp"
#include "nesskit/spectrum.hpp"

namespace nesskit {

namespace {

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

std::string schedule_label(const CouplingSchedule& s) {
    if (s.kind == CouplingSchedule::Kind::sudden) return "sudden";
    return "alpha=" + format_number(s.alpha);
}

// (1/(hi-lo)) int_lo^hi of a piecewise-constant coefficient; keeps interfaces that
// fall between grid points at their true position.
template <typename Field>
double cell_average(const DeviceProfile& d, double lo, double hi, Field field) {
    std::vector<double> cuts{lo};
    for (double x : d.breakpoints) {
        if (x > lo && x < hi) cuts.push_back(x);
    }
    cuts.push_back(hi);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        sum += (cuts[i + 1] - cuts[i]) * field(coefficients_at(d, 0.5 * (cuts[i] + cuts[i + 1])));
    }
    return sum / (hi - lo);
}

}  // namespace

// ---------------------------------------------------------------------------
// grid

double BoxDiscretization::diagonal(std::size_t i, double g) const {
    double d = (inverse_link_mass[i] + inverse_link_mass[i + 1]) / (2.0 * h * h) + potential[i];
    if (i == site_a || i == site_b) d += g / h;
    return d;
}

void BoxDiscretization::apply_hamiltonian(std::span<const complex> psi, double g, std::span<complex> out) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        complex v = diagonal(i, g) * psi[i];
        if (i > 0) v += off_diagonal(i - 1) * psi[i - 1];
        if (i + 1 < n) v += off_diagonal(i) * psi[i + 1];
        out[i] = v;
    }
}

double BoxDiscretization::norm_squared(std::span<const complex> psi) const {
    double s = 0.0;
    for (const complex& v : psi) s += std::norm(v);
    return s * h;
}

complex BoxDiscretization::inner(std::span<const complex> lhs, std::span<const complex> rhs) const {
    complex s{};
    for (std::size_t i = 0; i < lhs.size(); ++i) s += std::conj(lhs[i]) * rhs[i];
    return s * h;
}

std::size_t BoxDiscretization::nearest_site(double pos) const {
    const double n = std::round((pos - x_min) / h);
    const double clamped = std::clamp(n, 1.0, static_cast<double>(size()));
    return static_cast<std::size_t>(clamped) - 1;
}

BoxDiscretization build_box(const SystemConfig& config) {
    const DeviceProfile& device = config.device;
    const BoxParams& p = config.box;
    const double k_max = std::sqrt(2.0 * device.max_mass() * (config.spectral.lambda_max - device.min_potential()));
    if (!(k_max * p.h < 0.5)) {
        throw NumericalError("build_box: grid too coarse, k_max*h = " + format_number(k_max * p.h) +
                             " >= 0.5; need h < " + format_number(0.5 / k_max));
    }
    BoxDiscretization box;
    box.device = device;
    box.schedule = config.schedule;
    box.x_min = p.x_min;
    box.h = p.h;
    const auto intervals = static_cast<std::size_t>(std::llround((p.x_max - p.x_min) / p.h));
    box.x_max = p.x_min + static_cast<double>(intervals) * p.h;
    if (intervals < 4) throw NumericalError("build_box: box holds fewer than 4 grid intervals");
    const std::size_t unknowns = intervals - 1;
    box.x.resize(unknowns);
    box.potential.resize(unknowns);
    box.inverse_link_mass.resize(intervals);
    for (std::size_t l = 0; l < intervals; ++l) {
        const double left = p.x_min + static_cast<double>(l) * p.h;
        box.inverse_link_mass[l] = cell_average(device, left, left + p.h, [](Coefficients c) { return 1.0 / c.mass; });
    }
    for (std::size_t i = 0; i < unknowns; ++i) {
        box.x[i] = p.x_min + static_cast<double>(i + 1) * p.h;
        box.potential[i] = cell_average(device, box.x[i] - 0.5 * p.h, box.x[i] + 0.5 * p.h,
                                        [](Coefficients c) { return c.potential; });
    }
    box.site_a = box.nearest_site(device.a);
    box.site_b = box.nearest_site(device.b);
    box.snap_a = std::abs(box.x[box.site_a] - device.a);
    box.snap_b = std::abs(box.x[box.site_b] - device.b);
    if (box.site_a < 2 || box.site_b + 3 > unknowns || box.site_b < box.site_a + 2) {
        throw NumericalError("build_box: a and b must be separated by grid points and lie inside the box");
    }
    return box;
}

// ---------------------------------------------------------------------------
// Crank-Nicolson

CrankNicolson::CrankNicolson(const BoxDiscretization& box, double g, double dt)
    : box_(&box), g_(g), dt_(dt) {
    // The factorization and the solve run in extended precision: rounding the
    // Cayley factors to double makes the step non-unitary by O(eps), and that error
    // adds up coherently over long runs.
    const std::size_t n = box.size();
    h_diag_.resize(n);
    h_off_.resize(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) h_diag_[i] = box.diagonal(i, g);
    for (std::size_t i = 0; i + 1 < n; ++i) h_off_[i] = box.off_diagonal(i);
    const long double half = 0.5L * dt;
    lower_.assign(n, 0.0L);
    inv_pivot_.resize(n);
    inv_pivot_[0] = 1.0L / wide_complex(1.0L, half * h_diag_[0]);
    for (std::size_t i = 1; i < n; ++i) {
        const wide_complex c(0.0L, half * h_off_[i - 1]);
        lower_[i] = c * inv_pivot_[i - 1];
        inv_pivot_[i] = 1.0L / (wide_complex(1.0L, half * h_diag_[i]) - lower_[i] * c);
    }
}

void CrankNicolson::step(std::span<complex> psi) const {
    const std::size_t n = psi.size();
    const long double half = 0.5L * dt_;
    thread_local std::vector<wide_complex> y;
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // (I - i dt/2 H) psi
        long double re = h_diag_[i] * static_cast<long double>(psi[i].real());
        long double im = h_diag_[i] * static_cast<long double>(psi[i].imag());
        if (i > 0) {
            re += h_off_[i - 1] * static_cast<long double>(psi[i - 1].real());
            im += h_off_[i - 1] * static_cast<long double>(psi[i - 1].imag());
        }
        if (i + 1 < n) {
            re += h_off_[i] * static_cast<long double>(psi[i + 1].real());
            im += h_off_[i] * static_cast<long double>(psi[i + 1].imag());
        }
        y[i] = wide_complex(psi[i].real() + half * im, psi[i].imag() - half * re);
    }
    for (std::size_t i = 1; i < n; ++i) y[i] -= lower_[i] * y[i - 1];
    y[n - 1] *= inv_pivot_[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        y[i] = (y[i] - wide_complex(0.0L, half * h_off_[i]) * y[i + 1]) * inv_pivot_[i];
    }
    for (std::size_t i = 0; i < n; ++i) psi[i] = complex(static_cast<double>(y[i].real()), static_cast<double>(y[i].imag()));
}

void cn_step(const BoxDiscretization& box, std::span<complex> psi, double t, double dt) {
    CrankNicolson(box, box.coupling(t + 0.5 * dt), dt).step(psi);
}

// ---------------------------------------------------------------------------
// decoupled ensemble

EnsembleState decoupled_modes(const BoxDiscretization& box, const SystemConfig& config) {
    struct Block {
        EnsembleMember::Origin origin;
        std::size_t first;
        std::size_t last;
        const ReservoirState* reservoir;
    };
    const Block blocks[] = {
        {EnsembleMember::Origin::left_lead, 0, box.site_a - 1, &config.reservoir_left},
        {EnsembleMember::Origin::well, box.site_a + 1, box.site_b - 1, &config.reservoir_well},
        {EnsembleMember::Origin::right_lead, box.site_b + 1, box.size() - 1, &config.reservoir_right},
    };
    std::vector<EnsembleMember> all;
    const double scale = 1.0 / std::sqrt(box.h);
    for (const Block& block : blocks) {
        const auto n = static_cast<Eigen::Index>(block.last - block.first + 1);
        Eigen::VectorXd diag(n);
        Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
        for (Eigen::Index i = 0; i < n; ++i) diag(i) = box.diagonal(block.first + static_cast<std::size_t>(i), 0.0);
        for (Eigen::Index i = 0; i + 1 < n; ++i) sub(i) = box.off_diagonal(block.first + static_cast<std::size_t>(i));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        const Eigen::VectorXd& values = solver.eigenvalues();
        const Eigen::MatrixXd& vectors = solver.eigenvectors();
        for (Eigen::Index k = 0; k < n; ++k) {
            EnsembleMember m;
            m.origin = block.origin;
            m.energy = values(k);
            m.weight = occupation(m.energy, *block.reservoir);
            m.psi.assign(box.size(), 0.0);
            // fix the sign by the first sizeable entry so runs are reproducible
            double sign = 0.0;
            for (Eigen::Index i = 0; i < n && sign == 0.0; ++i) {
                if (std::abs(vectors(i, k)) > 1e-8) sign = vectors(i, k) > 0.0 ? 1.0 : -1.0;
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                m.psi[block.first + static_cast<std::size_t>(i)] = sign * scale * vectors(i, k);
            }
            all.push_back(std::move(m));
        }
    }
    double max_weight = 0.0;
    for (const auto& m : all) max_weight = std::max(max_weight, m.weight);
    EnsembleState state;
    const double floor = config.box.weight_floor * max_weight;
    for (auto& m : all) {
        if (m.weight < floor || m.weight == 0.0) {
            state.dropped_weight += m.weight;
            ++state.dropped_count;
        } else {
            state.retained_weight += m.weight;
            state.members.push_back(std::move(m));
        }
    }
    return state;
}

// ---------------------------------------------------------------------------
// observables

double Observable::expectation(const BoxDiscretization& box, std::span<const complex> psi) const {
    switch (kind) {
        case Kind::link_flux: {
            double total = 0.0;
            const std::size_t links = box.inverse_link_mass.size();
            for (std::size_t l = 0; l < link_weights.size(); ++l) {
                const std::size_t link = first_link + l;
                // links touching the Dirichlet ends carry no flux
                if (link == 0 || link + 1 >= links) continue;
                const double j = box.inverse_link_mass[link] / box.h * std::imag(std::conj(psi[link - 1]) * psi[link]);
                total += link_weights[l] * j;
            }
            return total;
        }
        case Kind::projector:
            return std::norm(box.inner(state, psi));
        case Kind::region_charge: {
            double s = 0.0;
            for (std::size_t i = first_site; i <= last_site; ++i) s += std::norm(psi[i]);
            return s * box.h;
        }
    }
    return 0.0;
}

Observable current_observable(const BoxDiscretization& box, PointFlux variant) {
    const double offset = (variant.x - box.x_min) / box.h;
    const auto links = static_cast<double>(box.inverse_link_mass.size());
    if (!(offset >= 10.0 && offset <= links - 11.0)) {
        throw NumericalError("current_observable: point " + format_number(variant.x) + " is too close to the box edge");
    }
    Observable o;
    o.kind = Observable::Kind::link_flux;
    o.descriptor = "point:" + format_number(variant.x);
    o.first_link = static_cast<std::size_t>(std::floor(offset));
    o.link_weights = {1.0};
    return o;
}

Observable current_observable(const BoxDiscretization& box, SmoothedFlux variant) {
    const double width = variant.width > 0.0 ? variant.width : 10.0 * box.h;
    const double lo = variant.x - 0.5 * width;
    const double hi = variant.x + 0.5 * width;
    if (lo < box.device.b) {
        throw NumericalError("current_observable: ramp at " + format_number(variant.x) +
                             " must lie in the right lead (x - width/2 >= b)");
    }
    if (hi + 10.0 * box.h > box.x_max) {
        throw NumericalError("current_observable: ramp at " + format_number(variant.x) + " is too close to the box edge");
    }
    auto profile = [&](double y) {
        if (y <= lo) return 0.0;
        if (y >= hi) return 1.0;
        return 0.5 * (1.0 - std::cos(std::numbers::pi * (y - lo) / width));
    };
    Observable o;
    o.kind = Observable::Kind::link_flux;
    o.descriptor = "smooth:" + format_number(variant.x);
    const auto first = static_cast<std::size_t>(std::floor((lo - box.x_min) / box.h));
    const auto last = static_cast<std::size_t>(std::ceil((hi - box.x_min) / box.h));
    o.first_link = first;
    for (std::size_t l = first; l <= last; ++l) {
        const double left = box.x_min + static_cast<double>(l) * box.h;
        o.link_weights.push_back(profile(left + box.h) - profile(left));
    }
    return o;
}

Observable projector_observable(const BoxDiscretization& box, std::vector<complex> state, std::string descriptor) {
    Observable o;
    o.kind = Observable::Kind::projector;
    o.descriptor = std::move(descriptor);
    const double norm = std::sqrt(box.norm_squared(state));
    for (complex& v : state) v /= norm;
    o.state = std::move(state);
    return o;
}

Observable region_charge_observable(const BoxDiscretization& box, double lo, double hi, std::string descriptor) {
    Observable o;
    o.kind = Observable::Kind::region_charge;
    o.descriptor = std::move(descriptor);
    o.first_site = box.nearest_site(lo);
    o.last_site = box.nearest_site(hi);
    if (o.last_site < o.first_site) std::swap(o.first_site, o.last_site);
    return o;
}

// ---------------------------------------------------------------------------
// traces

double TransientTrace::window_mean(double fraction) const {
    if (times.empty()) return 0.0;
    const double threshold = origin + fraction * (times.back() - origin) - 1e-12;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= threshold) {
            sum += values[i];
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : values.back();
}

double TransientTrace::window_amplitude(double fraction) const {
    if (times.empty()) return 0.0;
    const double threshold = origin + fraction * (times.back() - origin) - 1e-12;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < threshold) continue;
        if (first) {
            lo = hi = values[i];
            first = false;
        }
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
    }
    return 0.5 * (hi - lo);
}

double validity_window(const BoxDiscretization& box, const EnsembleState& ensemble) {
    const DeviceProfile& d = box.device;
    double v_max = 0.0;
    for (const auto& m : ensemble.members) {
        for (const Lead lead : {Lead::left, Lead::right}) {
            const bool reachable = m.origin == EnsembleMember::Origin::well ||
                                   (lead == Lead::left) == (m.origin == EnsembleMember::Origin::left_lead);
            if (!reachable) continue;
            const double excess = std::max(0.0, m.energy - d.lead_potential(lead));
            v_max = std::max(v_max, std::sqrt(2.0 * excess / d.lead_mass(lead)));
        }
    }
    // coupling counts as switched on once g has dropped to 10
    double onset = 0.0;
    if (box.schedule.kind == CouplingSchedule::Kind::exponential) onset = -std::log(10.0) / box.schedule.alpha;
    const double distance = std::min(box.x_max - d.b, d.a - box.x_min);
    if (v_max == 0.0) return std::numeric_limits<double>::infinity();
    return onset + 0.8 * distance / v_max;
}

EvolutionResult evolve_ensemble(const BoxDiscretization& box, const EnsembleState& ensemble,
                                std::span<const Observable> observables, const EvolveOptions& options) {
    if (!(options.dt > 0.0)) throw NumericalError("evolve_ensemble: dt must be positive");
    if (options.sample_every < 1) throw NumericalError("evolve_ensemble: sample_every must be >= 1");
    EvolutionResult result;
    double t_start = options.t_start.value_or(box.schedule.t_start);
    if (t_start < 0.0) t_start = -std::ceil(-t_start / options.dt - 1e-9) * options.dt;  // t = 0 on the step grid
    double t_end = options.t_end;
    result.window_limit = validity_window(box, ensemble);
    if (t_end > result.window_limit) {
        result.window_truncated = true;
        result.warnings.push_back("validity window: t_end " + format_number(t_end) + " cut to " +
                                  format_number(result.window_limit));
        t_end = result.window_limit;
    }
    if (!(t_end > t_start)) throw NumericalError("evolve_ensemble: t_end must exceed t_start");
    const auto steps = static_cast<long>(std::floor((t_end - t_start) / options.dt + 1e-9));
    result.t_start = t_start;
    result.t_end = t_start + static_cast<double>(steps) * options.dt;

    double origin = t_start;
    if (t_start < 0.0 && result.t_end > 0.0) origin = 0.0;

    std::vector<std::vector<complex>> psi;
    psi.reserve(ensemble.members.size());
    for (const auto& m : ensemble.members) psi.push_back(m.psi);

    result.traces.resize(observables.size());
    for (std::size_t o = 0; o < observables.size(); ++o) {
        result.traces[o].descriptor = observables[o].descriptor;
        result.traces[o].schedule = schedule_label(box.schedule);
        result.traces[o].origin = origin;
    }
    std::vector<double> contributions(ensemble.members.size());
    std::vector<double> sums(observables.size(), 0.0);
    std::vector<std::size_t> counts(observables.size(), 0);

    auto record = [&](double t) {
        for (std::size_t o = 0; o < observables.size(); ++o) {
            parallel_for(psi.size(), [&](std::size_t k) {
                contributions[k] = ensemble.members[k].weight * observables[o].expectation(box, psi[k]);
            });
            double value = 0.0;
            for (double c : contributions) value += c;
            TransientTrace& trace = result.traces[o];
            trace.times.push_back(t);
            trace.values.push_back(value);
            if (t >= origin - 1e-12) {
                sums[o] += value;
                ++counts[o];
                trace.running_mean.push_back(sums[o] / static_cast<double>(counts[o]));
            } else {
                trace.running_mean.push_back(value);
            }
        }
        for (const auto& v : psi) result.max_norm_drift = std::max(result.max_norm_drift, std::abs(box.norm_squared(v) - 1.0));
    };

    record(t_start);
    std::optional<CrankNicolson> stepper;
    for (long s = 0; s < steps; ++s) {
        const double t = t_start + static_cast<double>(s) * options.dt;
        const double g = box.coupling(t + 0.5 * options.dt);
        if (!stepper || stepper->g() != g) stepper.emplace(box, g, options.dt);
        parallel_for(psi.size(), [&](std::size_t k) { stepper->step(psi[k]); });
        if ((s + 1) % options.sample_every == 0 || s + 1 == steps) {
            record(t_start + static_cast<double>(s + 1) * options.dt);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

// Tridiagonal solve with partial pivoting; sub[i] = A(i+1,i), super[i] = A(i,i+1).
std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> super,
                                      std::vector<double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> fill(n, 0.0);  // A(i, i+2) after row swaps
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(diag[i]) >= std::abs(sub[i])) {
            if (diag[i] == 0.0) diag[i] = 1e-300;
            const double f = sub[i] / diag[i];
            diag[i + 1] -= f * super[i];
            rhs[i + 1] -= f * rhs[i];
        } else {
            const double f = diag[i] / sub[i];
            const double next_diag = diag[i + 1];
            diag[i] = sub[i];
            diag[i + 1] = super[i] - f * next_diag;
            if (i + 2 < n) {
                fill[i] = super[i + 1];
                super[i + 1] = -f * super[i + 1];
            }
            super[i] = next_diag;
            std::swap(rhs[i], rhs[i + 1]);
            rhs[i + 1] -= f * rhs[i];
        }
    }
    if (diag[n - 1] == 0.0) diag[n - 1] = 1e-300;
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    if (n >= 2) x[n - 2] = (rhs[n - 2] - super[n - 2] * x[n - 1]) / diag[n - 2];
    for (std::size_t i = n - 2; i-- > 0;) x[i] = (rhs[i] - super[i] * x[i + 1] - fill[i] * x[i + 2]) / diag[i];
    return x;
}

}  // namespace

std::vector<complex> discrete_eigenvector(const BoxDiscretization& box, double g, double shift,
                                          std::span<const complex> initial, double* eigenvalue) {
    const std::size_t n = box.size();
    std::vector<double> diag(n), off(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) diag[i] = box.diagonal(i, g) - shift;
    for (std::size_t i = 0; i + 1 < n; ++i) off[i] = box.off_diagonal(i);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::real(initial[i]);
    for (int iter = 0; iter < 6; ++iter) {
        v = solve_tridiagonal(off, diag, off, v);
        double norm = 0.0;
        for (double e : v) norm += e * e;
        norm = std::sqrt(norm * box.h);
        for (double& e : v) e /= norm;
    }
    // keep the sign of the initial guess
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += v[i] * std::real(initial[i]);
    std::vector<complex> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = dot < 0.0 ? -v[i] : v[i];
    if (eigenvalue) {
        std::vector<complex> hv(n);
        box.apply_hamiltonian(out, g, hv);
        *eigenvalue = std::real(box.inner(out, hv)) / box.norm_squared(out);
    }
    return out;
}

SweepReport alpha_sweep(const SystemConfig& config, std::span<const CouplingSchedule> schedules,
                        const SweepOptions& options) {
    BoxDiscretization box = build_box(config);
    const EnsembleState ensemble = decoupled_modes(box, config);

    std::vector<Observable> observables;
    SweepReport report;
    for (double x : options.flux_points) observables.push_back(current_observable(box, PointFlux{x}));
    for (double x : options.smoothed_points) observables.push_back(current_observable(box, SmoothedFlux{x}));
    const std::size_t current_count = observables.size();
    for (const auto& o : observables) report.current_descriptors.push_back(o.descriptor);

    const std::vector<BoundState> bound = find_bound_states(config.device);
    for (std::size_t j = 0; j < bound.size(); ++j) {
        std::vector<complex> guess(box.size());
        for (std::size_t i = 0; i < box.size(); ++i) guess[i] = std::real(bound[j].psi(box.x[i]));
        std::vector<complex> state = discrete_eigenvector(box, 0.0, bound[j].lambda, guess);
        observables.push_back(projector_observable(box, std::move(state), "bound:" + std::to_string(j)));
        report.bound_energies.push_back(bound[j].lambda);
    }

    const DistributionFunction ness = distribution_ness(config);
    const double probe = config.device.b + 0.5 * (config.device.b - config.device.a);
    report.stationary_current = current_density(config, ness, std::vector<double>{probe}).front();

    for (const CouplingSchedule& schedule : schedules) {
        box.schedule = schedule;
        SweepRun run;
        run.schedule = schedule;
        run.label = schedule_label(schedule);
        EvolveOptions eo;
        eo.t_end = options.t_end;
        eo.dt = options.dt;
        eo.sample_every = options.sample_every;
        run.evolution = evolve_ensemble(box, ensemble, observables, eo);
        for (std::size_t o = 0; o < observables.size(); ++o) {
            const TransientTrace& trace = run.evolution.traces[o];
            if (o < current_count) {
                run.late_current.push_back(trace.window_mean(options.late_fraction));
                run.bound_amplitude.push_back(trace.window_amplitude(options.late_fraction));
            } else {
                run.late_bound.push_back(trace.window_mean(options.late_fraction));
            }
        }
        report.runs.push_back(std::move(run));
    }

    const std::size_t n = report.runs.size();
    report.pairwise_difference.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double worst = 0.0;
            for (std::size_t o = 0; o < current_count; ++o) {
                const double ci = report.runs[i].late_current[o];
                const double cj = report.runs[j].late_current[o];
                const double scale = 0.5 * (std::abs(ci) + std::abs(cj));
                if (scale > 0.0) worst = std::max(worst, std::abs(ci - cj) / scale);
            }
            report.pairwise_difference[i][j] = worst;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

MollerResult moller_probe(const BoxDiscretization& box, double lambda0, Lead channel, const MollerOptions& options) {
    const DeviceProfile& d = box.device;
    const double lo = lambda0 - 5.0 * options.sigma;
    const double hi = lambda0 + 5.0 * options.sigma;
    const bool crosses_vb = lo <= d.v_b;
    const bool crosses_va = lo <= d.v_a && hi >= d.v_a;
    if (crosses_vb || crosses_va || (channel == Lead::left && lo <= d.v_a)) {
        throw NumericalError("moller_probe: energy window [" + format_number(lo) + ", " + format_number(hi) +
                             "] must lie inside an open channel, away from the thresholds");
    }
    const QuadratureRule energies = composite_gauss_legendre(lo, hi, 32, 8);
    const std::size_t n = box.size();
    std::vector<complex> decoupled(n, 0.0);
    std::vector<complex> coupled(n, 0.0);
    for (std::size_t e = 0; e < energies.nodes.size(); ++e) {
        const double lambda = energies.nodes[e];
        const double amp = std::exp(-(lambda - lambda0) * (lambda - lambda0) / (4.0 * options.sigma * options.sigma)) *
                           energies.weights[e];
        const ChannelWavenumber w = channel_wavenumber(d, channel, lambda);
        const double contact = channel == Lead::left ? d.a : d.b;
        const ScatteringSolution sol = scattering_matrix(d, lambda);
        const Wavefunction& phi = channel == Lead::left ? *sol.phi_a : sol.phi_b;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = box.x[i];
            const bool in_lead = channel == Lead::left ? x < d.a : x > d.b;
            if (in_lead) decoupled[i] += amp * std::sin(w.k * (x - contact)) / std::sqrt(std::numbers::pi * w.q);
            coupled[i] += amp * phi(x);
        }
    }
    std::vector<complex> psi = decoupled;
    const auto steps = static_cast<long>(std::llround(options.t_prep / options.dt));

    // e^{+i T H_D}: backward in time, realized as conj o forward o conj for real H
    const CrankNicolson decoupled_step(box, box.schedule.g_cap, options.dt);
    for (complex& v : psi) v = std::conj(v);
    for (long s = 0; s < steps; ++s) decoupled_step.step(psi);
    for (complex& v : psi) v = std::conj(v);

    double edge = 0.0;
    const std::size_t margin = static_cast<std::size_t>(std::ceil(1.0 / box.h));
    for (std::size_t i = 0; i < std::min(margin, n); ++i) edge += std::norm(psi[i]) + std::norm(psi[n - 1 - i]);
    if (edge * box.h > options.edge_tolerance * box.norm_squared(psi)) {
        throw NumericalError("moller_probe: packet reaches the box edge; reduce t_prep or enlarge the box");
    }

    const CrankNicolson coupled_step(box, 0.0, options.dt);
    for (long s = 0; s < steps; ++s) coupled_step.step(psi);

    MollerResult r;
    r.lambda0 = lambda0;
    r.channel = channel;
    r.overlap = box.inner(coupled, psi) / std::sqrt(box.norm_squared(coupled) * box.norm_squared(decoupled));
    r.phase = std::arg(r.overlap);
    r.modulus = std::abs(r.overlap);
    return r;
}

}  // namespace nesskit
