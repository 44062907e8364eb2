#include "nesskit_verify/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "nesskit/dynamics.hpp"
#include "nesskit/errors.hpp"
#include "nesskit/ness.hpp"
#include "nesskit/scattering.hpp"
#include "nesskit/spectrum.hpp"
#include "nesskit_verify/oracles.hpp"

namespace nesskit::verify {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

struct Outcome {
    bool passed;
    std::string detail;
};

double relative(double value, double reference) {
    return std::abs(value - reference) / std::max(std::abs(reference), 1e-300);
}

Outcome scattering_oracle() {
    const DeviceProfile barrier = DeviceProfile::uniform(0.0, 1.0, 1.0, 5.0, 1.0, 0.0);
    double worst = 0.0;
    for (int i = 1; i <= 200; ++i) {
        const double lambda = 20.0 * i / 200.0;
        worst = std::max(worst, relative(transmission(barrier, lambda), square_barrier_transmission(5.0, 1.0, 1.0, lambda)));
    }
    return {worst < 1e-8, "max relative error " + fmt("%.2e", worst) + " over 200 energies"};
}

Outcome flux_unitarity() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const DeviceProfile d = random_device(rng);
        const double lambda = d.v_b + 1e-3 + 10.0 * unit(rng);
        if (std::abs(lambda - d.v_a) < 1e-6) continue;
        const ScatteringSolution s = scattering_matrix(d, lambda);
        if (s.two_channel) {
            const double qa = s.left.q, qb = s.right.q;
            const double ta = qb / qa * std::norm(s.s_ba);
            const double tb = qa / qb * std::norm(s.s_ab);
            worst = std::max({worst, std::abs(std::norm(s.s_aa) + ta - 1.0), std::abs(std::norm(s.s_bb) + tb - 1.0),
                              std::abs(ta - tb)});
        } else {
            worst = std::max(worst, std::abs(std::abs(s.s_bb) - 1.0));
        }
    }
    return {worst < 1e-10, "max invariant violation " + fmt("%.2e", worst) + " over 1000 samples"};
}

Outcome delta_normalization() {
    DeviceProfile d;
    d.a = 0.0;
    d.b = 1.0;
    d.breakpoints = {0.0, 0.4, 1.0};
    d.masses = {1.0, 0.7};
    d.potentials = {1.2, 0.3};
    d.v_b = 0.0;
    d.v_a = 0.5;
    const std::vector<PacketWindow> windows = {
        {Lead::right, 0.10, 0.20}, {Lead::right, 0.28, 0.40}, {Lead::right, 0.90, 1.00}, {Lead::right, 1.40, 1.50},
        {Lead::left, 0.90, 1.00},  {Lead::left, 1.40, 1.50},  {Lead::left, 0.70, 0.80},  {Lead::left, 2.00, 2.15},
    };
    const auto gram = packet_gram(d, windows, 400.0, 0.05, 160);
    double diag = 0.0, off = 0.0;
    for (std::size_t i = 0; i < gram.size(); ++i) {
        for (std::size_t j = 0; j < gram.size(); ++j) {
            if (i == j) diag = std::max(diag, std::abs(gram[i][j] - 1.0));
            else off = std::max(off, std::abs(gram[i][j]));
        }
    }
    return {diag < 1e-3 && off < 1e-3, "max |G_ii - 1| " + fmt("%.2e", diag) + ", max |G_ij| " + fmt("%.2e", off)};
}

Outcome bound_state_oracle() {
    const DeviceProfile well = DeviceProfile::uniform(0.0, 1.0, 1.0, -10.0, 1.0, 0.0);
    const std::vector<BoundState> found = find_bound_states(well);
    const std::vector<double> expected = square_well_bound_energies(10.0, 1.0, 1.0);
    double worst = found.size() == expected.size() ? 0.0 : 1.0;
    for (std::size_t j = 0; j < std::min(found.size(), expected.size()); ++j) {
        worst = std::max(worst, std::abs(found[j].lambda - expected[j]));
    }
    const double m = 0.7, v = 1.3, length = 2.0;
    const DeviceProfile closed = DeviceProfile::uniform(0.0, length, m, v, 1.0, 0.0);
    const std::vector<WellMode> modes = closed_well_spectrum(closed, 12);
    double worst_closed = 0.0;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const double n = static_cast<double>(k + 1);
        worst_closed = std::max(worst_closed, std::abs(modes[k].xi - (v + kPi * kPi * n * n / (2.0 * m * length * length))));
    }
    return {worst < 1e-9 && worst_closed < 1e-9,
            std::to_string(found.size()) + " bound states, max error " + fmt("%.2e", worst) +
                "; closed-well max error " + fmt("%.2e", worst_closed)};
}

Outcome current_x_independence() {
    std::mt19937_64 rng(777);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const SystemConfig c = random_biased_config(rng);
        const DistributionFunction dist = distribution_ness(c);
        const std::vector<double> j = current_density(c, dist, current_sample_points(c.device));
        const auto [lo, hi] = std::minmax_element(j.begin(), j.end());
        double mean = 0.0;
        for (double v : j) mean += v / static_cast<double>(j.size());
        worst = std::max(worst, (*hi - *lo) / std::abs(mean));
    }
    return {worst < 1e-6, "max relative spread " + fmt("%.2e", worst) + " over 20 configurations"};
}

Outcome landauer_equality() {
    std::mt19937_64 rng(777);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const SystemConfig c = random_biased_config(rng);
        const DistributionFunction dist = distribution_ness(c);
        const std::vector<double> j = current_density(c, dist, current_sample_points(c.device));
        const double landauer = landauer_current(c);
        for (double v : j) worst = std::max(worst, relative(v, landauer));
    }
    return {worst < 1e-5, "max relative difference " + fmt("%.2e", worst) + " over 20 configurations"};
}

Outcome equilibrium_null() {
    std::mt19937_64 rng(4242);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const SystemConfig c = random_equilibrium_config(rng);
        const SpectralGrid grid = spectral_grid(c);
        double scale = 0.0;
        for (std::size_t n = 0; n < grid.size(); ++n) scale += grid.weights[n] * occupation(grid.nodes[n], c.reservoir_left);
        scale /= 2.0 * kPi;
        const DistributionFunction dist = distribution_ness(c);
        for (double v : current_density(c, dist, current_sample_points(c.device))) worst = std::max(worst, std::abs(v) / scale);
        worst = std::max(worst, std::abs(landauer_current(c)) / scale);
    }
    return {worst < 1e-10, "max |I| / scale " + fmt("%.2e", worst) + " over 10 devices"};
}

Outcome crank_nicolson_unitarity() {
    SystemConfig c;
    c.device = DeviceProfile::uniform(0.0, 1.0, 1.0, 2.0, 1.0, 0.0);
    c.spectral.lambda_max = 10.0;
    c.box = {-5.0, 5.0, 0.05, 1e-8};
    c.schedule = CouplingSchedule::exponential(1.0);
    const BoxDiscretization box = build_box(c);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    std::vector<complex> psi(box.size());
    for (auto& v : psi) v = {normal(rng), normal(rng)};
    const double n0 = std::sqrt(box.norm_squared(psi));
    for (auto& v : psi) v /= n0;
    const int steps = 100000;
    const double dt = 1e-3;
    double t = c.schedule.t_start;
    double previous = 1.0, per_step = 0.0;
    for (int s = 0; s < steps; ++s) {
        cn_step(box, psi, t, dt);
        t += dt;
        const double norm = std::sqrt(box.norm_squared(psi));
        per_step = std::max(per_step, std::abs(norm - previous));
        previous = norm;
    }
    const double cumulative = std::abs(previous - 1.0);
    return {per_step < 1e-13 && cumulative < 1e-12,
            "per-step drift " + fmt("%.2e", per_step) + ", cumulative " + fmt("%.2e", cumulative) + " over 1e5 steps"};
}

std::vector<CouplingSchedule> acceptance_schedules() {
    return {CouplingSchedule::exponential(0.5), CouplingSchedule::exponential(1.0), CouplingSchedule::exponential(2.0),
            CouplingSchedule::sudden()};
}

SweepOptions transient_sweep_options(const DeviceProfile& d) {
    SweepOptions o;
    o.t_end = 200.0;  // cut at the validity window
    o.dt = 0.01;
    o.sample_every = 10;
    o.flux_points = {d.b + 0.5};
    o.smoothed_points = {d.b + 0.5, d.b + 1.0};
    o.late_fraction = 0.6;
    return o;
}

Outcome ness_convergence(const SweepReport& r) {
    double worst_stationary = 0.0;
    for (const auto& run : r.runs) {
        for (double v : run.late_current) worst_stationary = std::max(worst_stationary, relative(v, r.stationary_current));
    }
    double worst_pair = 0.0;
    for (const auto& row : r.pairwise_difference) {
        for (double v : row) worst_pair = std::max(worst_pair, v);
    }
    return {worst_stationary < 0.05 && worst_pair < 0.03,
            "stationary current " + fmt("%.6g", r.stationary_current) + ", max deviation " +
                fmt("%.2f%%", 100.0 * worst_stationary) + ", max pairwise " + fmt("%.2f%%", 100.0 * worst_pair)};
}

Outcome profile_independence(const SweepReport& r) {
    // observables: point flux, then the two ramps
    double worst = 0.0;
    for (const auto& run : r.runs) {
        const double first = run.late_current[1], second = run.late_current[2];
        worst = std::max(worst, std::abs(first - second) / (0.5 * (std::abs(first) + std::abs(second))));
    }
    return {worst < 0.02, r.current_descriptors[1] + " vs " + r.current_descriptors[2] + ": max relative difference " +
                              fmt("%.2f%%", 100.0 * worst)};
}

Outcome moller_phase() {
    struct Probe {
        const char* name;
        DeviceProfile device;
        double lambda0;
        Lead channel;
        double sigma;
        double t_prep;
    };
    DeviceProfile step = DeviceProfile::uniform(0.0, 1.0, 1.0, 3.0, 1.0, 0.0);
    step.v_a = 2.0;
    const DeviceProfile flat = DeviceProfile::uniform(0.0, 1.0, 1.0, 0.0, 1.0, 0.0);
    const Probe probes[] = {
        {"flat b", flat, 1.0, Lead::right, 0.15, 12.0},
        {"flat a", flat, 1.0, Lead::left, 0.15, 12.0},
        {"barrier b", step, 1.0, Lead::right, 0.15, 12.0},
        {"barrier a", step, 2.75, Lead::left, 0.12, 10.0},
    };
    bool ok = true;
    std::ostringstream detail;
    for (const Probe& p : probes) {
        SystemConfig c;
        c.device = p.device;
        c.spectral.lambda_max = 5.0;
        c.box = {-40.0, 41.0, 0.05, 1e-8};
        const BoxDiscretization box = build_box(c);
        MollerOptions o;
        o.sigma = p.sigma;
        o.t_prep = p.t_prep;
        const MollerResult r = moller_probe(box, p.lambda0, p.channel, o);
        const double target = p.channel == Lead::right ? kPi / 2.0 : -kPi / 2.0;
        const double error = std::abs(r.phase - target);
        ok = ok && error < 0.1;
        detail << p.name << " phase " << fmt("%.4f", r.phase) << " (err " << fmt("%.3f", error) << ") ";
    }
    return {ok, detail.str()};
}

Outcome conjecture_exploration(const std::filesystem::path& dir) {
    const SystemConfig c = bound_state_transient_config();
    std::vector<CouplingSchedule> schedules;
    for (double alpha : {1.0, 0.5, 0.25, 0.125}) schedules.push_back(CouplingSchedule::exponential(alpha));
    const SweepReport r = alpha_sweep(c, schedules, transient_sweep_options(c.device));
    std::filesystem::create_directories(dir);
    const std::filesystem::path path = dir / "conjecture1_amplitude.csv";
    std::ofstream out(path);
    out.precision(17);
    out << "alpha,observable,late_current,bound_amplitude\n";
    std::vector<double> amplitude;
    for (const auto& run : r.runs) {
        for (std::size_t o = 0; o < r.current_descriptors.size(); ++o) {
            out << run.schedule.alpha << ',' << r.current_descriptors[o] << ',' << run.late_current[o] << ','
                << run.bound_amplitude[o] << '\n';
        }
        amplitude.push_back(run.bound_amplitude.front());
    }
    out.close();
    bool monotone = true;
    for (std::size_t i = 1; i < amplitude.size(); ++i) monotone = monotone && amplitude[i] <= amplitude[i - 1];
    std::ostringstream detail;
    detail << "wrote " << path.string() << "; " << r.bound_energies.size() << " bound state(s); amplitude vs alpha "
           << (monotone ? "decreases monotonically" : "is not monotone") << " as alpha -> 0 (";
    for (std::size_t i = 0; i < amplitude.size(); ++i) detail << (i ? ", " : "") << fmt("%.3e", amplitude[i]);
    detail << ")";
    return {std::filesystem::exists(path), detail.str()};
}

}  // namespace

SystemConfig transient_config() {
    SystemConfig c;
    const double mass = 6.0;
    c.device = DeviceProfile::uniform(0.0, 1.0, mass, 1.0, mass, 0.0);
    c.reservoir_left = {10.0, 1.5, 1.0};
    c.reservoir_right = {10.0, 0.5, 1.0};
    c.reservoir_well = {10.0, 1.0, 1.0};
    c.spectral.lambda_max = c.default_lambda_max();
    c.box = {-40.0, 41.0, 0.05, 1e-8};
    c.schedule = CouplingSchedule::exponential(1.0);
    return c;
}

SystemConfig bound_state_transient_config() {
    SystemConfig c = transient_config();
    c.device.breakpoints = {0.0, 0.3, 0.7, 1.0};
    c.device.masses = {6.0, 6.0, 6.0};
    c.device.potentials = {1.0, -1.0, 1.0};
    return c;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result) {
    struct Entry {
        int id;
        const char* title;
        bool full_only;
        bool gating;
    };
    const Entry entries[] = {
        {1, "square-barrier transmission matches closed form", false, true},
        {2, "flux unitarity and reciprocity on random devices", false, true},
        {3, "delta-normalization of generalized eigenfunctions", false, true},
        {4, "bound states and closed-well spectrum match oracles", false, true},
        {5, "current density independent of x", false, true},
        {6, "Landau-Lifschitz current equals Landauer-Buttiker", false, true},
        {7, "equilibrium reservoirs carry no current", false, true},
        {8, "Crank-Nicolson unitarity over 1e5 steps", false, true},
        {9, "transient current converges to the alpha-independent NESS current", true, true},
        {10, "Moller phase +i for channel b, -i for channel a", true, true},
        {11, "late current independent of the ramp profile", true, true},
        {12, "bound-part transient amplitude versus alpha (exploration)", true, false},
    };
    std::optional<SweepReport> sweep;
    auto shared_sweep = [&]() -> const SweepReport& {
        if (!sweep) {
            const SystemConfig c = transient_config();
            const auto schedules = acceptance_schedules();
            sweep = alpha_sweep(c, schedules, transient_sweep_options(c.device));
        }
        return *sweep;
    };
    std::vector<CriterionResult> results;
    for (const Entry& e : entries) {
        if (!options.only.empty() && !options.only.count(e.id)) continue;
        CriterionResult r;
        r.id = e.id;
        r.title = e.title;
        r.gating = e.gating;
        if (e.full_only && !options.full) {
            r.skipped = true;
            r.detail = "needs --full";
        } else {
            const auto start = std::chrono::steady_clock::now();
            Outcome outcome{false, ""};
            try {
                switch (e.id) {
                    case 1: outcome = scattering_oracle(); break;
                    case 2: outcome = flux_unitarity(); break;
                    case 3: outcome = delta_normalization(); break;
                    case 4: outcome = bound_state_oracle(); break;
                    case 5: outcome = current_x_independence(); break;
                    case 6: outcome = landauer_equality(); break;
                    case 7: outcome = equilibrium_null(); break;
                    case 8: outcome = crank_nicolson_unitarity(); break;
                    case 9: outcome = ness_convergence(shared_sweep()); break;
                    case 10: outcome = moller_phase(); break;
                    case 11: outcome = profile_independence(shared_sweep()); break;
                    case 12: outcome = conjecture_exploration(options.artifact_dir); break;
                }
            } catch (const std::exception& ex) {
                outcome = {false, std::string("error: ") + ex.what()};
            }
            r.passed = outcome.passed;
            r.detail = outcome.detail;
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        if (on_result) on_result(r);
        results.push_back(std::move(r));
    }
    return results;
}

std::string format_result(const CriterionResult& r) {
    char head[32];
    std::snprintf(head, sizeof head, "%s [%2d] ", r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL"), r.id);
    std::string line = head + r.title;
    if (!r.gating) line += " [non-gating]";
    if (!r.skipped) line += " (" + fmt("%.2f", r.seconds) + " s)";
    return line + ": " + r.detail;
}

bool all_passed(const std::vector<CriterionResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CriterionResult& r) { return r.skipped || r.passed || !r.gating; });
}

}  // namespace nesskit::verify
