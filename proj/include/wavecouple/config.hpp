#pragma once

// Experiment configuration: an INI file (sections space, nonlinearity, noise,
// grid, initial, direction, functional, mc, bounds, run) plus `section.key=value`
// overrides. Coefficient lists are whitespace or comma separated and padded
// with zeros up to N.

#include <wavecouple/estimators.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wavecouple {

struct ExperimentConfig {
    // space
    double L = std::numbers::pi;
    std::size_t N = 8;
    std::size_t M = 0;
    // nonlinearity
    std::string family = "klein_gordon";
    double rho = 3.0;
    std::optional<GrowthConstants> constants; // full override, else analytic
    bool allow_rough_rho = false;
    // noise
    std::string sigma_spec = "inv_sqrt_lambda";
    double sigma_alpha = 1.0;
    double sigma_scale = 1.0;
    std::vector<double> sigma_values;
    std::string sigma0_spec = "same";
    std::vector<double> sigma0_values;
    // grid
    double T = 1.0;
    std::size_t n_steps = 256;
    std::string scheme = "euler_maruyama";
    // initial state and direction
    std::vector<double> x0{0.5}, y0{};
    std::vector<double> h1{0.2, 0.1}, h2{0.1};
    // functional
    std::string functional = "exp_linear";
    std::vector<double> g_ax{0.3, 0.1}, g_ay{0.1};
    double g_c = 1.0;
    double g_b = 0.0;
    double g_kappa = 4.0;
    // mc
    std::size_t n_traj = 20000;
    std::uint64_t seed = 1;
    double guard = 1e8;
    // bounds
    double C_abs = 16.0;
    double p = 2.0;
    // run options
    double fd_eps = 1e-3;
    double energy_p = 1.0;
    double energy_s = 0.0; // 0 means T
    std::string shift_mode = "log";
    std::size_t basket_modes = 3;
    bool corrupt_phi = false;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::string s = text;
    for (char& c : s)
        if (c == ',' || c == '[' || c == ']') c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError(key + ": '" + tok + "' is not a number");
        }
    }
    return out;
}


class Reader {
public:
    explicit Reader(const boost::property_tree::ptree& pt) : pt_(pt) {}

    double num(const std::string& key, double def) const
    {
        const auto v = pt_.get_optional<std::string>(key);
        if (!v) return def;
        if (*v == "pi") return std::numbers::pi;
        try {
            std::size_t used = 0;
            const double d = std::stod(*v, &used);
            if (used != trim(*v).size()) throw std::invalid_argument(*v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError(key + ": '" + *v + "' is not a number");
        }
    }

    std::size_t count(const std::string& key, std::size_t def) const
    {
        const double d = num(key, static_cast<double>(def));
        if (!(d >= 0.0) || d != std::floor(d) || d > 1e15) throw ConfigError(key + ": must be a non-negative integer");
        return static_cast<std::size_t>(d);
    }

    std::string str(const std::string& key, const std::string& def) const
    {
        return trim(pt_.get<std::string>(key, def));
    }

    bool flag(const std::string& key, bool def) const
    {
        const auto v = pt_.get_optional<std::string>(key);
        if (!v) return def;
        const auto t = trim(*v);
        if (t == "true" || t == "1" || t == "yes") return true;
        if (t == "false" || t == "0" || t == "no") return false;
        throw ConfigError(key + ": expected true/false");
    }

    std::vector<double> list(const std::string& key, const std::vector<double>& def) const
    {
        const auto v = pt_.get_optional<std::string>(key);
        return v ? parse_list(key, *v) : def;
    }

    bool has(const std::string& key) const { return static_cast<bool>(pt_.get_optional<std::string>(key)); }

    static std::string trim(const std::string& s)
    {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

private:
    const boost::property_tree::ptree& pt_;
};

// Keys the loader understands; anything else in the file is a typo.
inline const std::vector<std::string>& known_keys()
{
    static const std::vector<std::string> keys{
        "space.L", "space.N", "space.M",
        "nonlinearity.family", "nonlinearity.rho", "nonlinearity.allow_rough_rho",
        "nonlinearity.K1", "nonlinearity.K2", "nonlinearity.K3", "nonlinearity.K4", "nonlinearity.K5",
        "nonlinearity.C1", "nonlinearity.C2", "nonlinearity.C3", "nonlinearity.C4", "nonlinearity.C5",
        "noise.sigma", "noise.alpha", "noise.scale", "noise.values", "noise.sigma0", "noise.sigma0_values",
        "grid.T", "grid.n_steps", "grid.dt", "grid.scheme",
        "initial.x", "initial.y", "direction.h1", "direction.h2",
        "functional.kind", "functional.a_x", "functional.a_y", "functional.c", "functional.b", "functional.kappa",
        "mc.n_traj", "mc.seed", "mc.guard",
        "bounds.C_abs", "bounds.p",
        "run.fd_eps", "run.energy_p", "run.energy_s", "run.shift_mode", "run.basket_modes", "run.corrupt_phi"};
    return keys;
}

inline void check_keys(const boost::property_tree::ptree& pt)
{
    const auto& keys = known_keys();
    for (const auto& [section, body] : pt) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("unknown top-level key '" + section + "' (keys live in sections)");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (std::find(keys.begin(), keys.end(), full) == keys.end()) throw ConfigError("unknown key '" + full + "'");
        }
    }
}

} // namespace detail

/// Reads the INI text, applies `section.key=value` overrides and returns the
/// config. Only parsing happens here; see validate_config for preconditions.
inline ExperimentConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides = {})
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    if (!ini_text.empty()) {
        std::istringstream in(ini_text);
        try {
            pt::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError(std::string("config syntax: ") + e.what());
        }
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        const auto key = detail::Reader::trim(o.substr(0, eq));
        if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs section.key");
        tree.put(pt::ptree::path_type(key, '.'), o.substr(eq + 1));
    }
    detail::check_keys(tree);

    const detail::Reader r(tree);
    ExperimentConfig c;
    c.L = r.num("space.L", c.L);
    c.N = r.count("space.N", c.N);
    c.M = r.count("space.M", c.M);
    c.family = r.str("nonlinearity.family", c.family);
    c.rho = r.num("nonlinearity.rho", c.family == "linear_zero" ? 1.0 : c.rho);
    c.allow_rough_rho = r.flag("nonlinearity.allow_rough_rho", c.allow_rough_rho);
    static const char* names[] = {"K1", "K2", "K3", "K4", "K5", "C1", "C2", "C3", "C4", "C5"};
    bool any = false;
    for (const char* n : names) any = any || r.has(std::string("nonlinearity.") + n);
    if (any) {
        GrowthConstants k;
        double* slots[] = {&k.K1, &k.K2, &k.K3, &k.K4, &k.K5, &k.C1, &k.C2, &k.C3, &k.C4, &k.C5};
        // Start from the analytic constants so a single override is enough.
        if (c.family == "klein_gordon" && c.rho >= 1.0) k = NonlinearityParams::klein_gordon(c.rho).k;
        for (int i = 0; i < 10; ++i) *slots[i] = r.num(std::string("nonlinearity.") + names[i], *slots[i]);
        c.constants = k;
    }
    c.sigma_spec = r.str("noise.sigma", c.sigma_spec);
    c.sigma_alpha = r.num("noise.alpha", c.sigma_alpha);
    c.sigma_scale = r.num("noise.scale", c.sigma_scale);
    c.sigma_values = r.list("noise.values", c.sigma_values);
    c.sigma0_spec = r.str("noise.sigma0", c.sigma0_spec);
    c.sigma0_values = r.list("noise.sigma0_values", c.sigma0_values);
    c.T = r.num("grid.T", c.T);
    if (r.has("grid.dt") && r.has("grid.n_steps")) throw ConfigError("grid: give n_steps or dt, not both");
    if (r.has("grid.dt")) {
        const double dt = r.num("grid.dt", 0.0);
        if (!(dt > 0.0)) throw ConfigError("grid.dt must be positive");
        c.n_steps = TimeGrid::covering(c.T > 0 ? c.T : 1.0, dt).n_steps;
    } else {
        c.n_steps = r.count("grid.n_steps", c.n_steps);
    }
    c.scheme = r.str("grid.scheme", c.scheme);
    c.x0 = r.list("initial.x", c.x0);
    c.y0 = r.list("initial.y", c.y0);
    c.h1 = r.list("direction.h1", c.h1);
    c.h2 = r.list("direction.h2", c.h2);
    c.functional = r.str("functional.kind", c.functional);
    c.g_ax = r.list("functional.a_x", c.g_ax);
    c.g_ay = r.list("functional.a_y", c.g_ay);
    c.g_c = r.num("functional.c", c.g_c);
    c.g_b = r.num("functional.b", c.g_b);
    c.g_kappa = r.num("functional.kappa", c.g_kappa);
    c.n_traj = r.count("mc.n_traj", c.n_traj);
    c.seed = static_cast<std::uint64_t>(r.count("mc.seed", c.seed));
    c.guard = r.num("mc.guard", c.guard);
    c.C_abs = r.num("bounds.C_abs", c.C_abs);
    c.p = r.num("bounds.p", c.p);
    c.fd_eps = r.num("run.fd_eps", c.fd_eps);
    c.energy_p = r.num("run.energy_p", c.energy_p);
    c.energy_s = r.num("run.energy_s", c.energy_s);
    c.shift_mode = r.str("run.shift_mode", c.shift_mode);
    c.basket_modes = r.count("run.basket_modes", c.basket_modes);
    c.corrupt_phi = r.flag("run.corrupt_phi", c.corrupt_phi);
    return c;
}

/// Everything a subcommand needs, built from a validated config.
struct ResolvedExperiment {
    Experiment ex;
    State z0;
    Field h1, h2;
    TestFunctional g;
};

namespace detail {

inline Field padded(const std::vector<double>& v, std::size_t n, const char* key)
{
    if (v.size() > n) throw ConfigError(std::string(key) + ": " + std::to_string(v.size()) + " coefficients for N=" +
                                        std::to_string(n) + " modes");
    std::vector<double> c(n, 0.0);
    std::copy(v.begin(), v.end(), c.begin());
    Field f(std::move(c));
    if (!f.finite()) throw ConfigError(std::string(key) + ": non-finite coefficient");
    return f;
}

inline Scheme parse_scheme(const std::string& s)
{
    if (s == "euler_maruyama" || s == "em") return Scheme::euler_maruyama;
    if (s == "exp_euler" || s == "exponential") return Scheme::exp_euler;
    throw ConfigError("grid.scheme: '" + s + "' is not one of euler_maruyama, exp_euler");
}

} // namespace detail

/// Checks every precondition that can be checked before running and builds
/// the experiment. Throws ConfigError naming the violated precondition.
inline ResolvedExperiment validate_config(const ExperimentConfig& c, unsigned threads = 1)
{
    auto fail = [](const std::string& m) -> void { throw ConfigError(m); };
    if (!(c.L > 0.0) || !std::isfinite(c.L)) fail("space.L must be positive");
    if (c.N < 1) fail("space.N must be at least 1");
    if (c.M != 0 && c.M <= c.N) fail("space.M must exceed N (or be 0 for the default grid)");
    if (!(c.T > 0.0) || !std::isfinite(c.T)) fail("grid.T must be positive");
    if (c.n_steps < 1) fail("grid.n_steps must be at least 1");
    if (c.n_traj < 100) fail("mc.n_traj must be at least 100");
    if (!(c.guard >= 0.0)) fail("mc.guard must be non-negative");
    if (!(c.C_abs > 0.0)) fail("bounds.C_abs must be positive");
    if (!(c.p > 1.0)) fail("bounds.p must exceed 1");
    if (!(c.fd_eps > 0.0)) fail("run.fd_eps must be positive");
    if (!(c.energy_p >= 1.0)) fail("run.energy_p must be >= 1");
    if (!(c.energy_s >= 0.0 && c.energy_s <= c.T)) fail("run.energy_s must lie in [0, T]");
    if (c.shift_mode != "log" && c.shift_mode != "power") fail("run.shift_mode must be log or power");

    const SpectralSpace space(c.N, c.L, c.M);
    NonlinearityParams nl;
    if (c.family == "klein_gordon") {
        if (!(c.rho >= 1.0) || !std::isfinite(c.rho)) fail("nonlinearity.rho must be >= 1");
        nl = NonlinearityParams::klein_gordon(c.rho);
    } else if (c.family == "linear_zero") {
        if (!(c.rho >= 1.0)) fail("nonlinearity.rho must be >= 1");
        nl = NonlinearityParams::linear_zero(c.rho);
    } else {
        fail("nonlinearity.family: '" + c.family + "' is not one of klein_gordon, linear_zero");
    }
    if (c.constants) {
        const auto& k = *c.constants;
        for (double v : {k.K1, k.K2, k.K3, k.K4, k.K5, k.C1, k.C2, k.C3, k.C4, k.C5})
            if (!(v >= 0.0) || !std::isfinite(v)) fail("nonlinearity constants must be finite and non-negative");
        nl.k = k;
    }

    std::vector<double> sigma;
    if (c.sigma_spec == "inv_sqrt_lambda") {
        sigma = NoiseModel::inv_sqrt_lambda(space, c.sigma_scale).sigma;
    } else if (c.sigma_spec == "power_decay") {
        sigma = NoiseModel::power_decay(space, c.sigma_alpha, c.sigma_scale).sigma;
    } else if (c.sigma_spec == "explicit") {
        if (c.sigma_values.size() != c.N) fail("noise.values must list exactly N coefficients");
        sigma = c.sigma_values;
    } else if (c.sigma_spec == "zero") {
        sigma.assign(c.N, 0.0);
    } else {
        fail("noise.sigma: '" + c.sigma_spec + "' is not one of inv_sqrt_lambda, power_decay, explicit, zero");
    }
    NoiseModel noise;
    try {
        if (c.sigma_spec == "zero") {
            if (c.sigma0_spec != "same") fail("noise.sigma0 must be 'same' when sigma is zero");
            noise = NoiseModel::silent_model(space);
        } else if (c.sigma0_spec == "same") {
            noise = NoiseModel::diagonal(space, sigma);
        } else if (c.sigma0_spec == "explicit") {
            if (c.sigma0_values.size() != c.N) fail("noise.sigma0_values must list exactly N coefficients");
            noise = NoiseModel::diagonal(space, sigma, c.sigma0_values);
        } else {
            fail("noise.sigma0: '" + c.sigma0_spec + "' is not one of same, explicit");
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }

    const Scheme scheme = detail::parse_scheme(c.scheme);
    const TimeGrid grid{c.T, c.n_steps};
    try {
        validate_grid(space, grid, scheme);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }

    State z0(detail::padded(c.x0, c.N, "initial.x"), detail::padded(c.y0, c.N, "initial.y"));
    Field h1 = detail::padded(c.h1, c.N, "direction.h1");
    Field h2 = detail::padded(c.h2, c.N, "direction.h2");
    State a(detail::padded(c.g_ax, c.N, "functional.a_x"), detail::padded(c.g_ay, c.N, "functional.a_y"));

    std::optional<TestFunctional> g;
    if (c.functional == "constant") g = TestFunctional::constant(c.g_c);
    else if (c.functional == "exp_linear") g = TestFunctional::exp_linear(a, c.g_c);
    else if (c.functional == "bounded_smooth") g = TestFunctional::bounded_smooth(space, a);
    else if (c.functional == "quadratic") g = TestFunctional::quadratic(a);
    else if (c.functional == "indicator_smooth") {
        if (!(c.g_kappa > 0.0)) fail("functional.kappa must be positive");
        g = TestFunctional::indicator_smooth(a, c.g_b, c.g_kappa);
    } else {
        fail("functional.kind: '" + c.functional +
             "' is not one of constant, exp_linear, bounded_smooth, quadratic, indicator_smooth");
    }

    Experiment ex{Model(space, nl, noise), grid, scheme, c.n_traj, c.seed, c.guard, threads, c.allow_rough_rho};
    return ResolvedExperiment{std::move(ex), std::move(z0), std::move(h1), std::move(h2), std::move(*g)};
}

/// Fully resolved config as JSON (every constant inlined). Keys are sorted,
/// so the dump is canonical.
inline nlohmann::json config_to_json(const ExperimentConfig& c)
{
    using nlohmann::json;
    json j;
    j["space"] = {{"L", c.L}, {"N", c.N}, {"M", c.M}};
    GrowthConstants k = c.constants ? *c.constants
                                    : (c.family == "klein_gordon" && c.rho >= 1.0 ? NonlinearityParams::klein_gordon(c.rho).k
                                                                                  : GrowthConstants{});
    j["nonlinearity"] = {{"family", c.family},
                         {"rho", c.rho},
                         {"allow_rough_rho", c.allow_rough_rho},
                         {"constants_overridden", c.constants.has_value()},
                         {"K", {k.K1, k.K2, k.K3, k.K4, k.K5}},
                         {"C", {k.C1, k.C2, k.C3, k.C4, k.C5}}};
    j["noise"] = {{"sigma", c.sigma_spec},     {"alpha", c.sigma_alpha},   {"scale", c.sigma_scale},
                  {"values", c.sigma_values},  {"sigma0", c.sigma0_spec}, {"sigma0_values", c.sigma0_values}};
    j["grid"] = {{"T", c.T}, {"n_steps", c.n_steps}, {"scheme", c.scheme}};
    j["initial"] = {{"x", c.x0}, {"y", c.y0}};
    j["direction"] = {{"h1", c.h1}, {"h2", c.h2}};
    j["functional"] = {{"kind", c.functional}, {"a_x", c.g_ax}, {"a_y", c.g_ay},
                       {"c", c.g_c},           {"b", c.g_b},     {"kappa", c.g_kappa}};
    j["mc"] = {{"n_traj", c.n_traj}, {"seed", c.seed}, {"guard", c.guard}};
    j["bounds"] = {{"C_abs", c.C_abs}, {"p", c.p}};
    j["run"] = {{"fd_eps", c.fd_eps},       {"energy_p", c.energy_p},         {"energy_s", c.energy_s},
                {"shift_mode", c.shift_mode}, {"basket_modes", c.basket_modes}, {"corrupt_phi", c.corrupt_phi}};
    return j;
}

/// 64-bit FNV-1a of the canonical config dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c)
{
    const std::string s = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace wavecouple
