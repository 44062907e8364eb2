#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "nesskit/dynamics.hpp"
#include "nesskit/errors.hpp"
#include "nesskit/ness.hpp"
#include "nesskit/parallel.hpp"
#include "nesskit/scattering.hpp"
#include "nesskit/spectrum.hpp"
#include "nesskit_verify/acceptance.hpp"

#ifndef NESSKIT_VERSION
#define NESSKIT_VERSION "0.0.0"
#endif

namespace nesskit::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

using Row = std::vector<double>;

std::string number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Globals {
    std::string config_path;
    std::string out_dir = ".";
    int threads = 0;
    bool strict = false;
    bool full = false;
};

// Everything one subcommand needs to write results and their manifests.
class Run {
public:
    Run(const Globals& g, std::string subcommand, std::ostream& out)
        : globals_(g), subcommand_(std::move(subcommand)), out_(out), start_(std::chrono::steady_clock::now()) {
        if (!g.config_path.empty()) {
            std::ifstream in(g.config_path, std::ios::binary);
            if (!in) throw ConfigError("cannot read config file " + g.config_path);
            std::ostringstream text;
            text << in.rdbuf();
            config_text_ = text.str();
            config = parse_config(config_text_, g.config_path);
        } else {
            config = parse_config("", "<defaults>");
        }
    }

    SystemConfig config;
    json parameters = json::object();

    void warn(std::string message) { warnings_.push_back(std::move(message)); }

    void csv(const std::string& name, const std::string& header, const std::vector<Row>& rows) {
        std::ostringstream s;
        s << header << '\n';
        for (const Row& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) s << (i ? "," : "") << number(row[i]);
            s << '\n';
        }
        write(name, s.str());
    }

    void json_file(const std::string& name, const json& value) {
        write(name, value.dump(2) + "\n");
        out_ << value.dump(2) << '\n';
    }

private:
    void write(const std::string& name, const std::string& content) {
        const fs::path dir(globals_.out_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        const fs::path path = dir / name;
        put(path, content);

        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config_text_)));
        json m;
        m["tool"] = "nesskit";
        m["version"] = NESSKIT_VERSION;
        m["subcommand"] = subcommand_;
        m["output"] = name;
        m["config"] = globals_.config_path.empty() ? "<defaults>" : globals_.config_path;
        m["config_hash_fnv1a64"] = hash;
        m["parameters"] = parameters;
        m["warnings"] = warnings_;
        m["wall_time_s"] = seconds;
        put(fs::path(path.string() + ".manifest.json"), m.dump(2) + "\n");
        if (name.ends_with(".csv")) out_ << "wrote " << path.string() << '\n';
    }

    static void put(const fs::path& path, const std::string& content) {
        std::ofstream f(path, std::ios::binary);
        f << content;
        f.close();
        if (!f) throw std::runtime_error("cannot write " + path.string());
    }

    const Globals& globals_;
    std::string subcommand_;
    std::ostream& out_;
    std::chrono::steady_clock::time_point start_;
    std::string config_text_;
    std::vector<std::string> warnings_;
};

struct XGrid {
    std::optional<double> lo, hi;
    int points = 1001;

    std::vector<double> build(const DeviceProfile& d) const {
        const double a = lo.value_or(d.a - 5.0);
        const double b = hi.value_or(d.b + 5.0);
        if (!(b > a) || points < 2) throw ConfigError("--x-min must be below --x-max and --points at least 2");
        std::vector<double> x(points);
        for (int i = 0; i < points; ++i) x[i] = a + (b - a) * i / (points - 1);
        return x;
    }
};

void add_xgrid(CLI::App* app, XGrid& g) {
    app->add_option("--x-min", g.lo, "Left end of the sample grid (default a - 5)");
    app->add_option("--x-max", g.hi, "Right end of the sample grid (default b + 5)");
    app->add_option("--points", g.points, "Number of sample points")->check(CLI::PositiveNumber);
}

struct ObservableSpec {
    bool smooth = false;
    double x = 0.0;
};

ObservableSpec parse_observable(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    if (colon == std::string::npos || (kind != "point" && kind != "smooth")) {
        throw ConfigError("--observable: expected point:<x> or smooth:<x>, got '" + text + "'");
    }
    try {
        std::size_t used = 0;
        const double x = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
        return {kind == "smooth", x};
    } catch (const std::exception&) {
        throw ConfigError("--observable: '" + text.substr(colon + 1) + "' is not a number");
    }
}

void box_warnings(Run& run, const BoxDiscretization& box, const EnsembleState* ens) {
    if (box.snap_a > 0.0 || box.snap_b > 0.0) {
        run.warn("delta sites snapped to the grid: |x - a| = " + number(box.snap_a) + ", |x - b| = " + number(box.snap_b));
    }
    if (ens && ens->dropped_count > 0) {
        run.warn("dropped " + std::to_string(ens->dropped_count) + " ensemble members below the weight floor, total weight " +
                 number(ens->dropped_weight) + " of " + number(ens->retained_weight + ens->dropped_weight));
    }
}

// ---------------------------------------------------------------------------

int cmd_scatter(Run& run) {
    const SpectralGrid grid = spectral_grid(run.config);
    std::vector<Row> rows;
    for (double lambda : grid.nodes) {
        const ScatteringSolution s = scattering_matrix(run.config.device, lambda);
        rows.push_back({lambda, s.s_aa.real(), s.s_aa.imag(), s.s_ab.real(), s.s_ab.imag(), s.s_ba.real(), s.s_ba.imag(),
                        s.s_bb.real(), s.s_bb.imag(), s.transmission(), s.left.q, s.right.q});
    }
    run.csv("scatter.csv", "lambda,s_aa_re,s_aa_im,s_ab_re,s_ab_im,s_ba_re,s_ba_im,s_bb_re,s_bb_im,T,q_a,q_b", rows);
    return ok;
}

int cmd_eigenfunction(Run& run, double lambda, const XGrid& xg) {
    const std::vector<double> x = xg.build(run.config.device);
    const ScatteringSolution s = eigenfunctions(run.config.device, lambda, {}, x);
    std::vector<Row> rows;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const complex a = s.phi_a_samples.empty() ? complex{} : s.phi_a_samples[i];
        const complex b = s.phi_b_samples[i];
        rows.push_back({x[i], a.real(), a.imag(), b.real(), b.imag()});
    }
    if (!s.two_channel) run.warn("lambda below v_a: channel a is closed and phi_a is written as zero");
    run.parameters["lambda"] = lambda;
    run.csv("eigenfunction.csv", "x,phi_a_re,phi_a_im,phi_b_re,phi_b_im", rows);
    return ok;
}

int cmd_bound(Run& run, bool with_csv, const XGrid& xg) {
    const auto bound = find_bound_states(run.config.device);
    if (with_csv) {
        const std::vector<double> x = xg.build(run.config.device);
        std::string header = "x";
        std::vector<std::vector<double>> samples;
        for (std::size_t j = 0; j < bound.size(); ++j) {
            header += ",psi_" + std::to_string(j);
            samples.push_back(bound[j].sample(x));
        }
        std::vector<Row> rows;
        for (std::size_t i = 0; i < x.size(); ++i) {
            Row row{x[i]};
            for (const auto& s : samples) row.push_back(s[i]);
            rows.push_back(std::move(row));
        }
        run.csv("bound_states.csv", header, rows);
    }
    json list = json::array();
    for (const BoundState& b : bound) list.push_back({{"lambda_j", b.lambda}, {"kappa_a", b.kappa_a}, {"kappa_b", b.kappa_b}});
    run.json_file("bound.json", list);
    return ok;
}

int cmd_well_modes(Run& run, int k_max) {
    const auto modes = closed_well_spectrum(run.config.device, k_max);
    std::vector<Row> rows;
    for (std::size_t k = 0; k < modes.size(); ++k) rows.push_back({static_cast<double>(k + 1), modes[k].xi});
    run.parameters["k_max"] = k_max;
    run.csv("well_modes.csv", "k,xi", rows);
    return ok;
}

int cmd_ness(Run& run, const XGrid& xg) {
    const std::vector<double> x = xg.build(run.config.device);
    const CarrierDensity u = carrier_density(run.config, distribution_ness(run.config), x);
    std::vector<Row> rows;
    for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({x[i], u.total[i], u.bound[i], u.continuum[i]});
    run.csv("ness.csv", "x,u_total,u_bound,u_continuum", rows);
    return ok;
}

int cmd_current(Run& run) {
    const std::vector<double> points = current_sample_points(run.config.device);
    const std::vector<double> j = current_density(run.config, distribution_ness(run.config), points);
    double mean = 0.0;
    for (double v : j) mean += v;
    mean /= static_cast<double>(j.size());
    const auto [lo, hi] = std::minmax_element(j.begin(), j.end());
    const double bound = current_truncation_bound(run.config);
    if (bound > 1e-6 * std::max(std::abs(mean), 1e-300)) {
        run.warn("occupations above lambda_max contribute up to " + number(bound));
    }
    json r;
    r["I"] = mean;
    r["I_landauer"] = landauer_current(run.config);
    r["spread_over_x"] = *hi - *lo;
    run.json_file("current.json", r);
    return ok;
}

int cmd_transmission(Run& run) {
    std::vector<Row> rows;
    for (double lambda : spectral_grid(run.config).nodes) rows.push_back({lambda, transmission(run.config.device, lambda)});
    run.csv("transmission.csv", "lambda,T", rows);
    return ok;
}

struct EvolveArgs {
    std::optional<double> alpha;
    bool sudden = false;
    double t_end = 10.0;
    double dt = 0.01;
    int sample_every = 10;
    std::string observable;
};

int cmd_evolve(Run& run, const EvolveArgs& args, bool strict) {
    SystemConfig& c = run.config;
    if (args.sudden) c.schedule = CouplingSchedule::sudden(c.schedule.g_cap);
    if (args.alpha) c.schedule = CouplingSchedule::exponential(*args.alpha, c.schedule.g_cap);
    const BoxDiscretization box = build_box(c);
    const EnsembleState ens = decoupled_modes(box, c);
    box_warnings(run, box, &ens);

    const ObservableSpec spec =
        parse_observable(args.observable.empty() ? "point:" + number(c.device.b + 0.5) : args.observable);
    const std::vector<Observable> obs{spec.smooth ? current_observable(box, SmoothedFlux{spec.x})
                                                  : current_observable(box, PointFlux{spec.x})};
    EvolveOptions o;
    o.t_end = args.t_end;
    o.dt = args.dt;
    o.sample_every = args.sample_every;
    const EvolutionResult r = evolve_ensemble(box, ens, obs, o);
    for (const auto& w : r.warnings) run.warn(w);

    const TransientTrace& trace = r.traces.front();
    std::vector<Row> rows;
    for (std::size_t i = 0; i < trace.times.size(); ++i) rows.push_back({trace.times[i], trace.values[i], trace.running_mean[i]});
    run.parameters["schedule"] = trace.schedule;
    run.parameters["observable"] = trace.descriptor;
    run.parameters["t_start"] = r.t_start;
    run.parameters["t_end"] = r.t_end;
    run.parameters["dt"] = args.dt;
    run.parameters["window_limit"] = r.window_limit;
    run.csv("evolve.csv", "t,observable,running_mean", rows);
    return strict && r.window_truncated ? window_truncated : ok;
}

struct SweepArgs {
    std::vector<double> alphas{0.5, 1.0, 2.0};
    bool no_sudden = false;
    double t_end = 200.0;
    double dt = 0.01;
    int sample_every = 10;
    double late_fraction = 0.5;
    std::vector<std::string> observables;
};

int cmd_alpha_sweep(Run& run, const SweepArgs& args, bool strict) {
    const SystemConfig& c = run.config;
    std::vector<CouplingSchedule> schedules;
    for (double alpha : args.alphas) schedules.push_back(CouplingSchedule::exponential(alpha, c.schedule.g_cap));
    if (!args.no_sudden) schedules.push_back(CouplingSchedule::sudden(c.schedule.g_cap));
    if (schedules.empty()) throw ConfigError("alpha-sweep: no schedules selected");

    SweepOptions o;
    o.t_end = args.t_end;
    o.dt = args.dt;
    o.sample_every = args.sample_every;
    o.late_fraction = args.late_fraction;
    const std::vector<std::string> specs =
        args.observables.empty() ? std::vector<std::string>{"point:" + number(c.device.b + 0.5)} : args.observables;
    for (const auto& s : specs) {
        const ObservableSpec spec = parse_observable(s);
        (spec.smooth ? o.smoothed_points : o.flux_points).push_back(spec.x);
    }
    const BoxDiscretization box = build_box(c);
    box_warnings(run, box, nullptr);
    const SweepReport r = alpha_sweep(c, schedules, o);

    bool truncated = false;
    json runs = json::array();
    for (const SweepRun& s : r.runs) {
        truncated = truncated || s.evolution.window_truncated;
        for (const auto& w : s.evolution.warnings) run.warn(s.label + ": " + w);
        json j;
        j["schedule"] = s.label;
        j["t_start"] = s.evolution.t_start;
        j["t_end"] = s.evolution.t_end;
        j["window_truncated"] = s.evolution.window_truncated;
        j["late_current"] = s.late_current;
        j["bound_amplitude"] = s.bound_amplitude;
        j["late_bound"] = s.late_bound;
        runs.push_back(j);
    }
    json report;
    report["observables"] = r.current_descriptors;
    report["stationary_current"] = r.stationary_current;
    report["bound_energies"] = r.bound_energies;
    report["late_fraction"] = args.late_fraction;
    report["runs"] = runs;
    report["pairwise_difference"] = r.pairwise_difference;
    run.parameters["dt"] = args.dt;
    run.parameters["t_end"] = args.t_end;
    run.json_file("alpha_sweep.json", report);
    return strict && truncated ? window_truncated : ok;
}

struct MollerArgs {
    double lambda0 = 0.0;
    std::string channel = "b";
    MollerOptions options;
};

int cmd_moller(Run& run, const MollerArgs& args) {
    const BoxDiscretization box = build_box(run.config);
    box_warnings(run, box, nullptr);
    const Lead lead = args.channel == "a" ? Lead::left : Lead::right;
    const MollerResult r = moller_probe(box, args.lambda0, lead, args.options);
    run.parameters["t_prep"] = args.options.t_prep;
    run.parameters["sigma"] = args.options.sigma;
    run.parameters["dt"] = args.options.dt;
    json j;
    j["lambda0"] = r.lambda0;
    j["channel"] = args.channel;
    j["overlap_re"] = r.overlap.real();
    j["overlap_im"] = r.overlap.imag();
    j["phase"] = r.phase;
    run.json_file("moller.json", j);
    return ok;
}

int cmd_verify(const Globals& g, const std::vector<int>& only, std::ostream& out) {
    verify::AcceptanceOptions o;
    o.full = g.full;
    o.artifact_dir = g.out_dir;
    o.only = std::set<int>(only.begin(), only.end());
    const auto results = verify::run_acceptance(o, [&](const verify::CriterionResult& r) {
        out << verify::format_result(r) << std::endl;
    });
    const bool passed = verify::all_passed(results);
    out << (passed ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << '\n';
    return passed ? ok : failure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Non-equilibrium steady states of a quantum well coupled to two leads", "nesskit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", NESSKIT_VERSION);

    Globals g;
    app.add_option("-c,--config", g.config_path, "Configuration file");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--strict", g.strict, "Exit with code 4 when a run is cut at the validity window");
    app.add_flag("--full", g.full, "verify: include the long-running dynamics checks");
    app.fallthrough();

    XGrid xg;
    auto* scatter = app.add_subcommand("scatter", "S-matrix, transmission and channel wavenumbers on the spectral grid");
    double lambda = 0.0;
    auto* eigen = app.add_subcommand("eigenfunction", "Generalized eigenfunctions phi_a, phi_b at one energy");
    eigen->add_option("--lambda", lambda, "Energy")->required();
    add_xgrid(eigen, xg);
    bool bound_csv = false;
    auto* bound = app.add_subcommand("bound", "Bound states of the coupled Hamiltonian");
    bound->add_flag("--csv", bound_csv, "Also write the eigenfunctions");
    add_xgrid(bound, xg);
    int k_max = 10;
    auto* wells = app.add_subcommand("well-modes", "Dirichlet spectrum of the closed well");
    wells->add_option("--k-max", k_max, "Number of modes")->check(CLI::PositiveNumber);
    auto* ness = app.add_subcommand("ness", "Carrier density of the steady state");
    add_xgrid(ness, xg);
    auto* current = app.add_subcommand("current", "Steady-state current");
    auto* trans = app.add_subcommand("transmission", "Transmission probability on the spectral grid");

    EvolveArgs ev;
    auto* evolve = app.add_subcommand("evolve", "Simulate the coupling process in a finite box");
    auto* alpha_opt = evolve->add_option("--alpha", ev.alpha, "Exponential switching rate")->check(CLI::PositiveNumber);
    evolve->add_flag("--sudden", ev.sudden, "Sudden coupling at t = 0")->excludes(alpha_opt);
    evolve->add_option("--t-end", ev.t_end, "Final time");
    evolve->add_option("--dt", ev.dt, "Time step")->check(CLI::PositiveNumber);
    evolve->add_option("--sample-every", ev.sample_every, "Steps between samples")->check(CLI::PositiveNumber);
    evolve->add_option("--observable", ev.observable, "point:<x> or smooth:<x> (default point:b+0.5)");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("alpha-sweep", "Compare late-time currents across switching rates");
    sweep->add_option("--alphas", sw.alphas, "Switching rates")->delimiter(',');
    sweep->add_flag("--no-sudden", sw.no_sudden, "Leave out the sudden schedule");
    sweep->add_option("--t-end", sw.t_end, "Final time (cut at the validity window)");
    sweep->add_option("--dt", sw.dt, "Time step")->check(CLI::PositiveNumber);
    sweep->add_option("--sample-every", sw.sample_every, "Steps between samples")->check(CLI::PositiveNumber);
    sweep->add_option("--late-fraction", sw.late_fraction, "Start of the late window as a fraction of the run")
        ->check(CLI::Range(0.0, 1.0));
    sweep->add_option("--observable", sw.observables, "point:<x> or smooth:<x>, repeatable");

    MollerArgs mo;
    auto* moller = app.add_subcommand("moller", "Phase of the wave operator on a lead packet");
    moller->add_option("--lambda0", mo.lambda0, "Packet centre energy")->required();
    moller->add_option("--channel", mo.channel, "a or b")->check(CLI::IsMember({"a", "b"}));
    moller->add_option("--t-prep", mo.options.t_prep, "Preparation time")->check(CLI::PositiveNumber);
    moller->add_option("--sigma", mo.options.sigma, "Energy spread")->check(CLI::PositiveNumber);
    moller->add_option("--dt", mo.options.dt, "Time step")->check(CLI::PositiveNumber);

    std::vector<int> only;
    auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
    verify->add_option("--only", only, "Criterion numbers to run")->delimiter(',');

    std::vector<std::string> argv_store{"nesskit"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : config_error;
    }

    if (g.threads > 0) thread_count() = g.threads;

    try {
        if (verify->parsed()) return cmd_verify(g, only, out);
        CLI::App* sub = app.get_subcommands().front();
        Run r(g, sub->get_name(), out);
        r.config.validate();
        if (g.threads > 0) r.parameters["threads"] = g.threads;
        if (sub == scatter) return cmd_scatter(r);
        if (sub == eigen) return cmd_eigenfunction(r, lambda, xg);
        if (sub == bound) return cmd_bound(r, bound_csv, xg);
        if (sub == wells) return cmd_well_modes(r, k_max);
        if (sub == ness) return cmd_ness(r, xg);
        if (sub == current) return cmd_current(r);
        if (sub == trans) return cmd_transmission(r);
        if (sub == evolve) return cmd_evolve(r, ev, g.strict);
        if (sub == sweep) return cmd_alpha_sweep(r, sw, g.strict);
        if (sub == moller) return cmd_moller(r, mo);
        return failure;
    } catch (const ConfigError& e) {
        err << "nesskit: config error: " << e.what() << '\n';
        return config_error;
    } catch (const NumericalError& e) {
        err << "nesskit: numerical error: " << e.what() << '\n';
        return numerical_error;
    } catch (const std::exception& e) {
        err << "nesskit: " << e.what() << '\n';
        return failure;
    }
}

}  // namespace nesskit::cli
