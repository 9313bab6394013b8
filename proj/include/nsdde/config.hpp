#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nsdde/builtin.hpp"
#include "nsdde/grid.hpp"
#include "nsdde/scheme.hpp"

namespace nsdde {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Validated experiment description parsed from a key=value document.
struct ExperimentConfig {
    // system
    std::string system_name;  // linear | cubic | pure_noise
    double kappa0 = 0.1;
    double a = 2.0;
    double btilde = 0.25;
    double s = 0.25;
    double xi0 = 1.0;  // constant initial segment value
    // grid
    double tau = 1.0;
    double T = 2.0;
    long m = 10;
    // scheme
    SchemeKind kind = SchemeKind::tamed;
    double alpha = 0.5;
    // ensemble
    std::size_t N = 1000;
    std::uint64_t seed = 1;
    // stability analysis
    double lambda1 = 3.0;
    double lambda2 = 1.0;
    double lambda3 = 0.1;
    double K_tilde = 0.05;
    double kappa = 0.0;
    double window = 0.5;
    // outputs
    std::string out_dir = "out";
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: value for '" + key + "' is not a number: " + value);
    }
    if (pos != value.size())
        throw ConfigError("config: trailing garbage in value for '" + key + "': " + value);
    return v;
}

inline long parse_long(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw ConfigError("config: value for '" + key + "' must be an integer: " + value);
    return l;
}

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

// Parses the key=value experiment format. Lines starting with '#' are
// comments. Unknown keys and invariant violations are hard errors naming the
// offending key or bound.
inline ExperimentConfig parse_config(const std::string& text) {
    static const std::set<std::string> known = {
        "system.name",       "system.kappa0",    "system.a",        "system.btilde",
        "system.s",          "system.xi0",       "grid.tau",        "grid.T",
        "grid.m",            "scheme.kind",      "scheme.alpha",    "ensemble.N",
        "ensemble.seed",     "stability.lambda1", "stability.lambda2", "stability.lambda3",
        "stability.K_tilde", "stability.kappa",  "stability.window", "out.dir"};

    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
        kv[key] = value;
    }

    ExperimentConfig cfg;
    auto take = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (const auto* v = take("system.name")) cfg.system_name = *v;
    if (cfg.system_name.empty()) throw ConfigError("config: system.name is required");
    if (cfg.system_name != "linear" && cfg.system_name != "cubic" &&
        cfg.system_name != "pure_noise")
        throw ConfigError("config: system.name must be linear, cubic, or pure_noise, got '" +
                          cfg.system_name + "'");

    if (const auto* v = take("system.kappa0")) cfg.kappa0 = detail::parse_double("system.kappa0", *v);
    if (const auto* v = take("system.a")) cfg.a = detail::parse_double("system.a", *v);
    if (const auto* v = take("system.btilde")) cfg.btilde = detail::parse_double("system.btilde", *v);
    if (const auto* v = take("system.s")) cfg.s = detail::parse_double("system.s", *v);
    if (const auto* v = take("system.xi0")) cfg.xi0 = detail::parse_double("system.xi0", *v);
    if (const auto* v = take("grid.tau")) cfg.tau = detail::parse_double("grid.tau", *v);
    if (const auto* v = take("grid.T")) cfg.T = detail::parse_double("grid.T", *v);
    if (const auto* v = take("grid.m")) cfg.m = detail::parse_long("grid.m", *v);
    if (const auto* v = take("scheme.kind")) {
        if (*v == "tamed")
            cfg.kind = SchemeKind::tamed;
        else if (*v == "classic")
            cfg.kind = SchemeKind::classic;
        else
            throw ConfigError("config: scheme.kind must be tamed or classic, got '" + *v + "'");
    }
    if (const auto* v = take("scheme.alpha")) cfg.alpha = detail::parse_double("scheme.alpha", *v);
    if (const auto* v = take("ensemble.N")) {
        const long n = detail::parse_long("ensemble.N", *v);
        if (n < 2) throw ConfigError("config: ensemble.N must be at least 2");
        cfg.N = static_cast<std::size_t>(n);
    }
    if (const auto* v = take("ensemble.seed"))
        cfg.seed = static_cast<std::uint64_t>(detail::parse_long("ensemble.seed", *v));
    if (const auto* v = take("stability.lambda1"))
        cfg.lambda1 = detail::parse_double("stability.lambda1", *v);
    if (const auto* v = take("stability.lambda2"))
        cfg.lambda2 = detail::parse_double("stability.lambda2", *v);
    if (const auto* v = take("stability.lambda3"))
        cfg.lambda3 = detail::parse_double("stability.lambda3", *v);
    if (const auto* v = take("stability.K_tilde"))
        cfg.K_tilde = detail::parse_double("stability.K_tilde", *v);
    if (const auto* v = take("stability.kappa"))
        cfg.kappa = detail::parse_double("stability.kappa", *v);
    if (const auto* v = take("stability.window"))
        cfg.window = detail::parse_double("stability.window", *v);
    if (const auto* v = take("out.dir")) cfg.out_dir = *v;

    // validate against the type invariants before any simulation starts
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 0.5))
        throw ConfigError("config: scheme.alpha must lie in (0, 0.5], got " +
                          std::to_string(cfg.alpha));
    if (!(cfg.window > 0.0 && cfg.window <= 1.0))
        throw ConfigError("config: stability.window must lie in (0, 1]");
    if (cfg.system_name == "linear" && !(std::abs(cfg.kappa0) < 1.0))
        throw ConfigError("config: system.kappa0 must satisfy |kappa0| < 1");
    make_grid(cfg.tau, cfg.T, cfg.m);  // propagates grid-incompatibility errors
    return cfg;
}

inline NeutralSystem build_system(const ExperimentConfig& cfg) {
    if (cfg.system_name == "linear")
        return make_linear_system(cfg.kappa0, cfg.a, cfg.btilde, cfg.s);
    if (cfg.system_name == "cubic") return make_cubic_system();
    return make_pure_noise_system();
}

}  // namespace nsdde
