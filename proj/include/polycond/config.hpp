#pragma once

// Flat key = value config files for experiment runs.
//
//   # comment to end of line
//   n = 3
//   degrees = 2,2,2
//   a_grid = 10, 100, 1e3
//
// Keys: experiment n degrees replicates seed starts tol max_iter fd_step
// a_grid alpha_grid eta_grid output_dir jobs with_kappa. Whitespace around keys,
// values and list items is ignored. Unknown keys, repeated keys and lines
// without '=' are errors reported with their line number.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "experiments.hpp"

namespace polycond {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(std::string_view s, const std::string& what) {
    s = trim(s);
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw ConfigError(what + ": cannot parse '" + std::string(s) + "'");
    return v;
}

template <class T>
std::vector<T> parse_list(std::string_view s, const std::string& what) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(parse_number<T>(s.substr(start, comma - start), what));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline bool parse_bool(std::string_view s, const std::string& what) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(what + ": expected true or false, got '" + std::string(s) + "'");
}

}  // namespace config_detail

inline std::vector<int> parse_degrees(std::string_view s) { return config_detail::parse_list<int>(s, "degrees"); }

/// Applies one key to cfg. Throws ConfigError for unknown keys or bad values.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key, std::string_view value) {
    using namespace config_detail;
    value = trim(value);
    if (key == "experiment") cfg.experiment = std::string(value);
    else if (key == "n") cfg.n = parse_number<int>(value, key);
    else if (key == "degrees") cfg.degrees = parse_list<int>(value, key);
    else if (key == "replicates") cfg.replicates = parse_number<std::int64_t>(value, key);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, key);
    else if (key == "starts") cfg.optimizer.starts = parse_number<int>(value, key);
    else if (key == "tol") cfg.optimizer.tol = parse_number<double>(value, key);
    else if (key == "max_iter") cfg.optimizer.max_iter = parse_number<int>(value, key);
    else if (key == "fd_step") cfg.optimizer.fd_step = parse_number<double>(value, key);
    else if (key == "a_grid") cfg.a_grid = parse_list<double>(value, key);
    else if (key == "alpha_grid") cfg.alpha_grid = parse_list<double>(value, key);
    else if (key == "eta_grid") cfg.eta_grid = parse_list<double>(value, key);
    else if (key == "output_dir") cfg.output_dir = std::string(value);
    else if (key == "jobs") cfg.jobs = parse_number<int>(value, key);
    else if (key == "with_kappa") cfg.with_kappa = parse_bool(value, key);
    else throw ConfigError("unknown key '" + key + "'");
}

struct ParsedConfig {
    ExperimentConfig config;
    std::set<std::string> keys;  ///< keys present in the text
};

inline ParsedConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
    ParsedConfig out{std::move(base), {}};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = config_detail::trim(v);
        if (v.empty()) continue;
        const auto eq = v.find('=');
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
        const std::string key(config_detail::trim(v.substr(0, eq)));
        if (key.empty()) throw ConfigError(where + "empty key");
        if (!out.keys.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
        try {
            apply_config_key(out.config, key, v.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return out;
}

inline ParsedConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

inline ParsedConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, std::move(base));
}

/// --seed, then POLYCOND_SEED, then the config file, then the built-in default.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> from_config,
                                  std::uint64_t fallback = 1) {
    if (flag) return *flag;
    if (const char* env = std::getenv("POLYCOND_SEED"); env && *env)
        return config_detail::parse_number<std::uint64_t>(env, "POLYCOND_SEED");
    if (from_config) return *from_config;
    return fallback;
}

}  // namespace polycond
