#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stel/errors.hpp"

namespace stel {

// Flat key/value experiment configuration. Unknown keys are errors; ladders
// must be strictly monotone; the canonical echo lists every effective key in
// sorted order so reports are replayable.
struct ExperimentConfig {
    std::string experiment;
    std::string field = "shear_holder";
    double field_theta = 0.3;
    double field_scale = 1.0;
    std::string datum = "bump";
    double datum_radius = 1.0;
    double p = 2.0;
    double grid_T = 1.0;
    int grid_steps = 1024;
    double box_L = 5.0;
    int box_m = 64;
    std::string box_rule = "midpoint";
    int samples = 64;
    std::uint64_t seed = 0;
    int workers = 1;
    bool zero_noise = false;
    std::vector<double> mollify_ladder;
    int mollify_m = 9;
    std::vector<double> cutoff_ladder;
    std::string out;

    std::set<std::string> given;  // keys explicitly present in the source

    [[nodiscard]] bool has(const std::string& key) const { return given.count(key) > 0; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
    if (used != v.size()) throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw ConfigError("config: expected integer for " + key + ": '" + v + "'");
    return i;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned integer for " + key + ": '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("config: empty entry in list for " + key);
        out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value'");
        if (cfg.given.count(key))
            throw ConfigError("config: duplicate key " + key);
        cfg.given.insert(key);

        if (key == "experiment") cfg.experiment = value;
        else if (key == "field") cfg.field = value;
        else if (key == "field.theta") cfg.field_theta = detail::parse_double(key, value);
        else if (key == "field.scale") cfg.field_scale = detail::parse_double(key, value);
        else if (key == "datum") cfg.datum = value;
        else if (key == "datum.radius") cfg.datum_radius = detail::parse_double(key, value);
        else if (key == "p") cfg.p = detail::parse_double(key, value);
        else if (key == "grid.T") cfg.grid_T = detail::parse_double(key, value);
        else if (key == "grid.steps") cfg.grid_steps = detail::parse_int(key, value);
        else if (key == "box.L") cfg.box_L = detail::parse_double(key, value);
        else if (key == "box.m") cfg.box_m = detail::parse_int(key, value);
        else if (key == "box.rule") cfg.box_rule = value;
        else if (key == "samples") cfg.samples = detail::parse_int(key, value);
        else if (key == "seed") cfg.seed = detail::parse_u64(key, value);
        else if (key == "workers") cfg.workers = detail::parse_int(key, value);
        else if (key == "zero_noise") cfg.zero_noise = detail::parse_bool(key, value);
        else if (key == "mollify.ladder") cfg.mollify_ladder = detail::parse_list(key, value);
        else if (key == "mollify.m") cfg.mollify_m = detail::parse_int(key, value);
        else if (key == "cutoff.ladder") cfg.cutoff_ladder = detail::parse_list(key, value);
        else if (key == "out") cfg.out = value;
        else throw ConfigError("config: unknown key " + key);
    }

    for (std::size_t i = 1; i < cfg.mollify_ladder.size(); ++i)
        if (!(cfg.mollify_ladder[i] < cfg.mollify_ladder[i - 1]))
            throw ConfigError("config: mollify.ladder must be strictly decreasing");
    for (double d : cfg.mollify_ladder)
        if (d <= 0.0) throw ConfigError("config: mollify.ladder entries must be positive");
    for (std::size_t i = 1; i < cfg.cutoff_ladder.size(); ++i)
        if (!(cfg.cutoff_ladder[i] > cfg.cutoff_ladder[i - 1]))
            throw ConfigError("config: cutoff.ladder must be strictly increasing");
    if (cfg.box_rule != "midpoint" && cfg.box_rule != "gauss")
        throw ConfigError("config: box.rule must be midpoint or gauss");
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// Sorted key = value listing of the full effective configuration.
inline std::string canonical_echo(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    if (!cfg.experiment.empty()) kv["experiment"] = cfg.experiment;
    kv["field"] = cfg.field;
    kv["field.theta"] = detail::format_double(cfg.field_theta);
    kv["field.scale"] = detail::format_double(cfg.field_scale);
    kv["datum"] = cfg.datum;
    kv["datum.radius"] = detail::format_double(cfg.datum_radius);
    kv["p"] = detail::format_double(cfg.p);
    kv["grid.T"] = detail::format_double(cfg.grid_T);
    kv["grid.steps"] = std::to_string(cfg.grid_steps);
    kv["box.L"] = detail::format_double(cfg.box_L);
    kv["box.m"] = std::to_string(cfg.box_m);
    kv["box.rule"] = cfg.box_rule;
    kv["samples"] = std::to_string(cfg.samples);
    kv["seed"] = std::to_string(cfg.seed);
    kv["workers"] = std::to_string(cfg.workers);
    kv["zero_noise"] = cfg.zero_noise ? "true" : "false";
    if (!cfg.mollify_ladder.empty())
        kv["mollify.ladder"] = detail::format_list(cfg.mollify_ladder);
    kv["mollify.m"] = std::to_string(cfg.mollify_m);
    if (!cfg.cutoff_ladder.empty())
        kv["cutoff.ladder"] = detail::format_list(cfg.cutoff_ladder);
    if (!cfg.out.empty()) kv["out"] = cfg.out;
    std::string echo;
    for (const auto& [k, v] : kv) echo += k + " = " + v + "\n";
    return echo;
}

}  // namespace stel
