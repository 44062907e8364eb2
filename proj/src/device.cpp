#include "nesskit/device.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "nesskit/errors.hpp"

namespace nesskit {

namespace {

std::string describe(double value) {
    std::ostringstream out;
    out.precision(17);
    out << value;
    return out.str();
}

}  // namespace

void DeviceProfile::validate() const {
    if (!(a < b)) throw ConfigError("device: invariant a < b violated (a=" + describe(a) + ", b=" + describe(b) + ")");
    if (!(m_a > 0.0)) throw ConfigError("device: m_a must be positive");
    if (!(m_b > 0.0)) throw ConfigError("device: m_b must be positive");
    if (!(v_a >= v_b)) {
        throw ConfigError("device: invariant v_a >= v_b violated (v_a=" + describe(v_a) +
                          ", v_b=" + describe(v_b) + ")");
    }
    if (breakpoints.size() < 2) throw ConfigError("device: breakpoints need at least the two entries a, b");
    if (breakpoints.front() != a || breakpoints.back() != b) {
        throw ConfigError("device: breakpoints must start at a and end at b");
    }
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i] > breakpoints[i - 1])) {
            throw ConfigError("device: breakpoints must be strictly increasing (entry " + std::to_string(i) + ")");
        }
    }
    const std::size_t segments = breakpoints.size() - 1;
    if (masses.size() != segments) {
        throw ConfigError("device: mass needs " + std::to_string(segments) + " values, got " +
                          std::to_string(masses.size()));
    }
    if (potentials.size() != segments) {
        throw ConfigError("device: potential needs " + std::to_string(segments) + " values, got " +
                          std::to_string(potentials.size()));
    }
    for (std::size_t i = 0; i < segments; ++i) {
        if (!(masses[i] > 0.0)) throw ConfigError("device: mass entry " + std::to_string(i) + " must be positive");
        if (!std::isfinite(potentials[i])) throw ConfigError("device: potential entry " + std::to_string(i) + " is not finite");
    }
}

std::size_t DeviceProfile::segment_at(double x) const {
    auto it = std::upper_bound(breakpoints.begin() + 1, breakpoints.end() - 1, x);
    return static_cast<std::size_t>(it - breakpoints.begin()) - 1;
}

double DeviceProfile::min_potential() const {
    double lo = std::min(v_a, v_b);
    for (double v : potentials) lo = std::min(lo, v);
    return lo;
}

double DeviceProfile::max_mass() const {
    double hi = std::max(m_a, m_b);
    for (double m : masses) hi = std::max(hi, m);
    return hi;
}

DeviceProfile DeviceProfile::uniform(double a, double b, double mass, double potential,
                                     double lead_mass, double lead_potential) {
    DeviceProfile d;
    d.a = a;
    d.b = b;
    d.m_a = d.m_b = lead_mass;
    d.v_a = d.v_b = lead_potential;
    d.breakpoints = {a, b};
    d.masses = {mass};
    d.potentials = {potential};
    return d;
}

Coefficients coefficients_at(const DeviceProfile& device, double x) {
    if (x <= device.a) return {device.m_a, device.v_a};
    if (x >= device.b) return {device.m_b, device.v_b};
    const std::size_t s = device.segment_at(x);
    return {device.masses[s], device.potentials[s]};
}

ChannelWavenumber channel_wavenumber(const DeviceProfile& device, Lead lead, double lambda) {
    const double m = device.lead_mass(lead);
    const double v = device.lead_potential(lead);
    ChannelWavenumber w;
    if (lambda >= v) {
        w.q = std::sqrt((lambda - v) / (2.0 * m));
        w.k = 2.0 * m * w.q;
    } else {
        w.evanescent = true;
        w.kappa = std::sqrt(2.0 * m * (v - lambda));
    }
    return w;
}

double CouplingSchedule::coupling(double t) const {
    if (kind == Kind::sudden) return t < 0.0 ? g_cap : 0.0;
    const double exponent = -alpha * t;
    if (exponent >= std::log(g_cap)) return g_cap;
    return std::exp(exponent);
}

CouplingSchedule CouplingSchedule::exponential(double alpha, double g_cap) {
    CouplingSchedule s;
    s.kind = Kind::exponential;
    s.alpha = alpha;
    s.g_cap = g_cap;
    s.t_start = -std::log(g_cap) / alpha;
    return s;
}

CouplingSchedule CouplingSchedule::sudden(double g_cap, double t_start) {
    CouplingSchedule s;
    s.kind = Kind::sudden;
    s.g_cap = g_cap;
    s.t_start = t_start;
    return s;
}

double SystemConfig::default_lambda_max() const {
    const double beta_min = std::min({reservoir_left.beta, reservoir_well.beta, reservoir_right.beta});
    const double mu_max = std::max({reservoir_left.mu, reservoir_well.mu, reservoir_right.mu});
    return std::max(device.v_a, mu_max) + 20.0 / beta_min;
}

void SystemConfig::validate() const {
    device.validate();
    const std::pair<const char*, const ReservoirState*> reservoirs[] = {
        {"reservoir.left", &reservoir_left}, {"reservoir.well", &reservoir_well}, {"reservoir.right", &reservoir_right}};
    for (const auto& [name, r] : reservoirs) {
        if (!(r->beta > 0.0)) throw ConfigError(std::string(name) + ": beta must be positive");
        if (!(r->c > 0.0)) throw ConfigError(std::string(name) + ": c must be positive");
        if (!std::isfinite(r->mu)) throw ConfigError(std::string(name) + ": mu is not finite");
    }
    if (!(spectral.lambda_max > device.v_a)) throw ConfigError("spectral: lambda_max must exceed v_a");
    if (spectral.nodes_per_panel < 2) throw ConfigError("spectral: nodes_per_panel must be at least 2");
    if (spectral.panels < 1) throw ConfigError("spectral: panels must be at least 1");
    if (spectral.rule != "gauss-legendre") throw ConfigError("spectral: unsupported rule '" + spectral.rule + "'");
    if (!(box.x_min < device.a && device.b < box.x_max)) throw ConfigError("box: invariant x_min < a < b < x_max violated");
    if (!(box.h > 0.0)) throw ConfigError("box: h must be positive");
    if (!(box.weight_floor >= 0.0 && box.weight_floor < 1.0)) throw ConfigError("box: weight_floor must lie in [0, 1)");
    if (schedule.kind == CouplingSchedule::Kind::exponential && !(schedule.alpha > 0.0)) {
        throw ConfigError("schedule: alpha must be positive");
    }
    if (!(schedule.g_cap > 0.0)) throw ConfigError("schedule: g_cap must be positive");
}

// ---------------------------------------------------------------------------
// config text format

namespace {

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"device", {"a", "b", "m_a", "m_b", "v_a", "v_b", "breakpoints", "mass", "potential"}},
        {"reservoir.left", {"beta", "mu", "c", "charge", "effective_mass"}},
        {"reservoir.well", {"beta", "mu", "c", "charge", "effective_mass"}},
        {"reservoir.right", {"beta", "mu", "c", "charge", "effective_mass"}},
        {"spectral", {"lambda_max", "nodes_per_panel", "panels", "rule"}},
        {"box", {"x_min", "x_max", "h", "weight_floor"}},
        {"schedule", {"kind", "alpha", "t_start", "g_cap"}},
    };
    return keys;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

class Reader {
public:
    Reader(std::map<std::string, Section>& sections, std::string source)
        : sections_(sections), source_(std::move(source)) {}

    bool has(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) != 0;
    }

    double number(const std::string& section, const std::string& key, double fallback) {
        if (!has(section, key)) return fallback;
        return number(section, key);
    }

    double number(const std::string& section, const std::string& key) {
        Entry& e = entry(section, key);
        return parse_number(e.value, section, key, e.line);
    }

    int integer(const std::string& section, const std::string& key, int fallback) {
        if (!has(section, key)) return fallback;
        Entry& e = entry(section, key);
        const double v = parse_number(e.value, section, key, e.line);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(e.line, section, key, "expected an integer");
        return static_cast<int>(v);
    }

    std::vector<double> list(const std::string& section, const std::string& key) {
        Entry& e = entry(section, key);
        std::vector<double> out;
        std::string_view rest = e.value;
        if (!rest.empty() && rest.front() == '[' && rest.back() == ']') rest = rest.substr(1, rest.size() - 2);
        while (true) {
            const auto comma = rest.find(',');
            const std::string item = trim(rest.substr(0, comma));
            if (item.empty()) fail(e.line, section, key, "empty list item");
            out.push_back(parse_number(item, section, key, e.line));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        return out;
    }

    std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
        if (!has(section, key)) return fallback;
        return unquote(entry(section, key).value);
    }

    int line_of(const std::string& section, const std::string& key) const {
        if (!has(section, key)) return 0;
        return sections_.at(section).at(key).line;
    }

    [[noreturn]] void fail(int line, const std::string& section, const std::string& key, const std::string& what) const {
        std::string msg = source_;
        if (line > 0) msg += ":" + std::to_string(line);
        msg += ": [" + section + "] " + key + ": " + what;
        throw ConfigError(msg);
    }

private:
    Entry& entry(const std::string& section, const std::string& key) {
        Entry& e = sections_.at(section).at(key);
        e.used = true;
        return e;
    }

    double parse_number(const std::string& raw, const std::string& section, const std::string& key, int line) const {
        const std::string s = unquote(trim(raw));
        double value = 0.0;
        const char* begin = s.data();
        const char* end = s.data() + s.size();
        if (!s.empty() && *begin == '+') ++begin;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr != end || s.empty()) fail(line, section, key, "not a number: '" + s + "'");
        if (!std::isfinite(value)) fail(line, section, key, "value must be finite");
        return value;
    }

    std::map<std::string, Section>& sections_;
    std::string source_;
};

ReservoirState read_reservoir(Reader& r, const std::string& section) {
    ReservoirState res;
    res.beta = r.number(section, "beta", 1.0);
    res.mu = r.number(section, "mu", 0.0);
    const bool has_c = r.has(section, "c");
    const bool has_q = r.has(section, "charge");
    const bool has_m = r.has(section, "effective_mass");
    if (has_c && (has_q || has_m)) {
        r.fail(r.line_of(section, "c"), section, "c", "give either c or charge/effective_mass, not both");
    }
    if (has_q != has_m) {
        const std::string key = has_q ? "charge" : "effective_mass";
        r.fail(r.line_of(section, key), section, key, "charge and effective_mass must be given together");
    }
    if (has_q) {
        // c = q m* / (pi beta)
        const double q = r.number(section, "charge");
        const double m = r.number(section, "effective_mass");
        res.c = q * m / (std::numbers::pi * res.beta);
    } else {
        res.c = r.number(section, "c", 1.0);
    }
    return res;
}

}  // namespace

SystemConfig parse_config(std::string_view text, std::string_view source) {
    std::map<std::string, Section> sections;
    const std::string src(source);
    std::string current;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(src + ":" + std::to_string(line_no) + ": malformed section header");
            current = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!allowed_keys().count(current)) {
                throw ConfigError(src + ":" + std::to_string(line_no) + ": unknown section [" + current + "]");
            }
            if (sections.count(current)) {
                throw ConfigError(src + ":" + std::to_string(line_no) + ": duplicate section [" + current + "]");
            }
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(src + ":" + std::to_string(line_no) + ": expected 'key = value'");
        if (current.empty()) throw ConfigError(src + ":" + std::to_string(line_no) + ": key outside of any section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (!allowed_keys().at(current).count(key)) {
            throw ConfigError(src + ":" + std::to_string(line_no) + ": unknown key '" + key + "' in [" + current + "]");
        }
        if (value.empty()) throw ConfigError(src + ":" + std::to_string(line_no) + ": missing value for '" + key + "'");
        auto& sec = sections[current];
        if (sec.count(key)) throw ConfigError(src + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        sec[key] = Entry{value, line_no, false};
    }

    Reader r(sections, src);
    SystemConfig cfg;
    DeviceProfile& d = cfg.device;
    const std::string dev = "device";
    if (!r.has(dev, "a")) throw ConfigError(src + ": [device] a is required");
    if (!r.has(dev, "b")) throw ConfigError(src + ": [device] b is required");
    d.a = r.number(dev, "a");
    d.b = r.number(dev, "b");
    d.m_a = r.number(dev, "m_a", 1.0);
    d.m_b = r.number(dev, "m_b", 1.0);
    d.v_a = r.number(dev, "v_a", 0.0);
    d.v_b = r.number(dev, "v_b", 0.0);
    d.breakpoints = r.has(dev, "breakpoints") ? r.list(dev, "breakpoints") : std::vector<double>{d.a, d.b};
    const std::size_t segments = d.breakpoints.size() >= 2 ? d.breakpoints.size() - 1 : 1;
    d.masses = r.has(dev, "mass") ? r.list(dev, "mass") : std::vector<double>(segments, 1.0);
    d.potentials = r.has(dev, "potential") ? r.list(dev, "potential") : std::vector<double>(segments, 0.0);

    cfg.reservoir_left = read_reservoir(r, "reservoir.left");
    cfg.reservoir_well = read_reservoir(r, "reservoir.well");
    cfg.reservoir_right = read_reservoir(r, "reservoir.right");

    cfg.spectral.lambda_max = r.number("spectral", "lambda_max", cfg.default_lambda_max());
    cfg.spectral.nodes_per_panel = r.integer("spectral", "nodes_per_panel", 32);
    cfg.spectral.panels = r.integer("spectral", "panels", 8);
    cfg.spectral.rule = r.text("spectral", "rule", "gauss-legendre");

    cfg.box.x_min = r.number("box", "x_min", d.a - 40.0);
    cfg.box.x_max = r.number("box", "x_max", d.b + 40.0);
    cfg.box.h = r.number("box", "h", 0.05);
    cfg.box.weight_floor = r.number("box", "weight_floor", 1e-8);

    const std::string kind = r.text("schedule", "kind", "exponential");
    const double g_cap = r.number("schedule", "g_cap", 1e4);
    if (kind == "exponential") {
        const double alpha = r.number("schedule", "alpha", 1.0);
        if (!(alpha > 0.0)) r.fail(r.line_of("schedule", "alpha"), "schedule", "alpha", "must be positive");
        if (!(g_cap > 0.0)) r.fail(r.line_of("schedule", "g_cap"), "schedule", "g_cap", "must be positive");
        cfg.schedule = CouplingSchedule::exponential(alpha, g_cap);
        cfg.schedule.t_start = r.number("schedule", "t_start", cfg.schedule.t_start);
    } else if (kind == "sudden") {
        if (r.has("schedule", "alpha")) {
            r.fail(r.line_of("schedule", "alpha"), "schedule", "alpha", "not used by the sudden schedule");
        }
        cfg.schedule = CouplingSchedule::sudden(g_cap, r.number("schedule", "t_start", 0.0));
    } else {
        r.fail(r.line_of("schedule", "kind"), "schedule", "kind", "expected 'exponential' or 'sudden', got '" + kind + "'");
    }

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(src + ": " + e.what());
    }
    return cfg;
}

SystemConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.string());
}

}  // namespace nesskit
