#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "action_field.hpp"
#include "action_solver.hpp"
#include "error.hpp"
#include "hamiltonian.hpp"
#include "shooting.hpp"
#include "torus.hpp"

namespace contact_action {

/// Fully resolved run description. Every key of the text format maps to one field.
struct RunConfig
{
    std::string entry = "discounted";
    /// Catalog parameters given explicitly (epsilon, lambda, a); the rest take catalog defaults.
    ParamMap params;
    int dim = 1;
    std::vector<double> x0{0.0};
    double u0 = 0.0;
    double T = 1.0;
    int m = 200;
    double dt = 0.005;
    /// 0 = default slope cap.
    double v_max = 0.0;
    /// 0 = automatic.
    int refinement = 0;
    double tol_fix = 1e-9;
    int max_outer = 60;
    std::string scheme = "picard";
    /// 0 = all hardware threads.
    unsigned workers = 0;

    double shoot_radius = 0.0;
    int multistart = 16;
    double shoot_dt = 1e-3;

    /// Empty = x0 + (0.3, 0, ...).
    std::vector<double> probe;
    std::string out = "out";

    double markov_t = 0.0;  // 0 = T/2
    double markov_s = 0.0;  // 0 = T - markov_t
    int markov_stride = 0;  // 0 = automatic

    double R1 = 6.0;
    double R2 = 10.0;

    double short_eps = 0.05;
    double traj_p0 = 1.0;
    double traj_T = 1.0;

    /// Catalog entries exercised by verify-all.
    std::vector<std::string> verify_entries{"classical", "discounted", "nonlinear_u"};

    TorusPoint x0_point() const { return TorusPoint(std::span<const double>(x0)); }

    TorusPoint probe_point() const
    {
        if (!probe.empty()) return TorusPoint(std::span<const double>(probe));
        std::vector<double> p = x0;
        p[0] += 0.3;
        return TorusPoint(std::span<const double>(p));
    }

    ParamMap resolved_params() const { return catalog::detail::complete_params(entry, params); }

    ContactHamiltonian hamiltonian() const { return catalog::hamiltonian(entry, params, dim); }
    ContactLagrangian lagrangian() const { return catalog::lagrangian(entry, params, dim); }

    /// Lipschitz-in-u constant of the entry (0 for u-independent ones).
    double lambda_u() const { return hamiltonian().lipschitz_u.value_or(0.0); }

    DPConfig dp_config() const
    {
        DPConfig c;
        c.m = m;
        c.dt = dt;
        c.refinement = refinement;
        c.v_max = v_max > 0.0 ? v_max : default_v_max(lambda_u(), T, dim, dt);
        return c;
    }

    SolverOptions solver_options() const
    {
        SolverOptions o;
        o.scheme = scheme == "semigroup" ? Scheme::semigroup : Scheme::picard;
        o.tol_fix = tol_fix;
        o.max_outer = max_outer;
        o.workers = workers;
        return o;
    }

    ActionSolver solver() const { return ActionSolver(lagrangian(), dp_config(), solver_options()); }

    ShootingOptions shooting_options() const
    {
        ShootingOptions o;
        o.radius = shoot_radius;
        o.multistart = multistart;
        o.dt = shoot_dt;
        o.workers = workers;
        return o;
    }

    /// Same run on another catalog entry, keeping only parameters that entry understands.
    RunConfig for_entry(const std::string& name) const
    {
        RunConfig c = *this;
        c.entry = name;
        const auto known = catalog::detail::complete_params(name, {});
        c.params.clear();
        for (const auto& [k, v] : params) {
            if (known.count(k)) c.params[k] = v;
        }
        return c;
    }

    /// key=value lines of every resolved setting, sorted by key.
    std::map<std::string, std::string> describe() const;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size() || !std::isfinite(out)) {
        throw Error(ErrorKind::config, "key '" + key + "': not a finite number: '" + v + "'");
    }
    return out;
}

inline int parse_int(const std::string& key, const std::string& v)
{
    const double d = parse_real(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw Error(ErrorKind::config, "key '" + key + "': not an integer: '" + v + "'");
    return static_cast<int>(d);
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    for (const auto& part : split(v, ',')) out.push_back(parse_real(key, part));
    return out;
}

inline std::string join(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
    return s;
}

} // namespace detail

/// Sets one key; throws a config error naming the key when it is unknown or malformed.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value)
{
    using namespace detail;
    const std::string& v = value;
    if (key == "entry") {
        c.entry = v;
    } else if (key == "epsilon" || key == "lambda" || key == "a") {
        c.params[key] = parse_real(key, v);
    } else if (key == "dim") {
        c.dim = parse_int(key, v);
    } else if (key == "x0") {
        c.x0 = parse_reals(key, v);
    } else if (key == "u0") {
        c.u0 = parse_real(key, v);
    } else if (key == "T") {
        c.T = parse_real(key, v);
    } else if (key == "m") {
        c.m = parse_int(key, v);
    } else if (key == "dt") {
        c.dt = parse_real(key, v);
    } else if (key == "v_max") {
        c.v_max = parse_real(key, v);
    } else if (key == "refinement") {
        c.refinement = parse_int(key, v);
    } else if (key == "tol_fix") {
        c.tol_fix = parse_real(key, v);
    } else if (key == "max_outer") {
        c.max_outer = parse_int(key, v);
    } else if (key == "scheme") {
        c.scheme = v;
    } else if (key == "workers") {
        const int w = parse_int(key, v);
        if (w < 0) throw Error(ErrorKind::config, "key 'workers' must be >= 0");
        c.workers = static_cast<unsigned>(w);
    } else if (key == "shoot_radius") {
        c.shoot_radius = parse_real(key, v);
    } else if (key == "multistart") {
        c.multistart = parse_int(key, v);
    } else if (key == "shoot_dt") {
        c.shoot_dt = parse_real(key, v);
    } else if (key == "probe") {
        c.probe = parse_reals(key, v);
    } else if (key == "out") {
        c.out = v;
    } else if (key == "markov_t") {
        c.markov_t = parse_real(key, v);
    } else if (key == "markov_s") {
        c.markov_s = parse_real(key, v);
    } else if (key == "markov_stride") {
        c.markov_stride = parse_int(key, v);
    } else if (key == "R1") {
        c.R1 = parse_real(key, v);
    } else if (key == "R2") {
        c.R2 = parse_real(key, v);
    } else if (key == "short_eps") {
        c.short_eps = parse_real(key, v);
    } else if (key == "traj_p0") {
        c.traj_p0 = parse_real(key, v);
    } else if (key == "traj_T") {
        c.traj_T = parse_real(key, v);
    } else if (key == "verify_entries") {
        c.verify_entries = split(v, ',');
    } else {
        throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    }
}

/// Checks cross-field constraints; throws a config error naming the violated one.
inline void validate(const RunConfig& c)
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::config, what); };
    // coupling_for rejects unknown names with the list of valid ones
    auto check_entry = [](const std::string& n) {
        catalog::detail::coupling_for(n, catalog::detail::complete_params(n, {}));
    };
    check_entry(c.entry);
    for (const auto& e : c.verify_entries) check_entry(e);
    const auto defaults = catalog::detail::complete_params(c.entry, {});
    for (const auto& [k, v] : c.params) {
        if (!defaults.count(k)) fail("parameter '" + k + "' does not apply to entry '" + c.entry + "'");
    }
    if (c.dim != 1 && c.dim != 2) fail("dim must be 1 or 2");
    if (static_cast<int>(c.x0.size()) != c.dim) fail("x0 must have dim coordinates");
    if (!c.probe.empty() && static_cast<int>(c.probe.size()) != c.dim) fail("probe must have dim coordinates");
    if (!(c.T > 0.0)) fail("T must be positive");
    if (!(c.dt > 0.0)) fail("dt must be positive");
    const double k = std::round(c.T / c.dt);
    if (k < 1.0 || std::abs(k * c.dt - c.T) > 1e-12 * c.T) fail("dt must divide T (within 1e-12 relative)");
    if (c.m < 2) fail("m must be >= 2");
    if (c.v_max < 0.0) fail("v_max must be >= 0 (0 = default)");
    if (c.refinement < 0) fail("refinement must be >= 0 (0 = automatic)");
    if (!(c.tol_fix > 0.0)) fail("tol_fix must be positive");
    if (c.max_outer < 1) fail("max_outer must be >= 1");
    if (c.scheme != "picard" && c.scheme != "semigroup") fail("scheme must be picard or semigroup");
    if (c.shoot_radius < 0.0) fail("shoot_radius must be >= 0 (0 = default)");
    if (c.multistart < 1) fail("multistart must be >= 1");
    if (!(c.shoot_dt > 0.0)) fail("shoot_dt must be positive");
    if (c.markov_t < 0.0 || c.markov_s < 0.0) fail("markov_t and markov_s must be >= 0");
    if (c.markov_stride < 0) fail("markov_stride must be >= 0");
    if (!(c.R1 > 0.0) || !(c.R2 > 0.0)) fail("R1 and R2 must be positive");
    if (!(c.short_eps > 0.0)) fail("short_eps must be positive");
    if (!(c.traj_T > 0.0)) fail("traj_T must be positive");
    if (c.out.empty()) fail("out must not be empty");
    const DPConfig dp = c.dp_config();
    try {
        dp.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
}

/// Parses the key=value text format ('#' starts a comment) on top of the defaults.
inline RunConfig parse_config_text(const std::string& text, RunConfig base = {})
{
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": expected key=value");
        }
        apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return base;
}

inline RunConfig parse_config_file(const std::string& path, RunConfig base = {})
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

/// CONTACT_ACTION_OUT, when set and non-empty, wins over the configured output directory.
inline void apply_environment(RunConfig& c)
{
    if (const char* env = std::getenv("CONTACT_ACTION_OUT"); env && *env) c.out = env;
}

inline std::map<std::string, std::string> RunConfig::describe() const
{
    std::map<std::string, std::string> kv;
    kv["entry"] = entry;
    for (const auto& [k, v] : resolved_params()) kv[k] = format_real(v);
    kv["dim"] = std::to_string(dim);
    kv["x0"] = detail::join(x0);
    kv["u0"] = format_real(u0);
    kv["T"] = format_real(T);
    kv["m"] = std::to_string(m);
    kv["dt"] = format_real(dt);
    kv["v_max"] = format_real(dp_config().v_max);
    kv["refinement"] = std::to_string(dp_config().resolved(dim).refinement);
    kv["tol_fix"] = format_real(tol_fix);
    kv["max_outer"] = std::to_string(max_outer);
    kv["scheme"] = scheme;
    kv["shoot_radius"] = format_real(shoot_radius);
    kv["multistart"] = std::to_string(multistart);
    kv["shoot_dt"] = format_real(shoot_dt);
    kv["probe"] = format_point(probe_point().coords());
    kv["markov_t"] = format_real(markov_t);
    kv["markov_s"] = format_real(markov_s);
    kv["markov_stride"] = std::to_string(markov_stride);
    kv["R1"] = format_real(R1);
    kv["R2"] = format_real(R2);
    kv["short_eps"] = format_real(short_eps);
    kv["traj_p0"] = format_real(traj_p0);
    kv["traj_T"] = format_real(traj_T);
    std::string ve;
    for (std::size_t i = 0; i < verify_entries.size(); ++i) ve += (i ? "," : "") + verify_entries[i];
    kv["verify_entries"] = ve;
    return kv;
}

} // namespace contact_action
