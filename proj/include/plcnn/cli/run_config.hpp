#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plcnn/data/transforms.hpp"
#include "plcnn/eval/protocols.hpp"
#include "plcnn/graph/config.hpp"

namespace plcnn {

/// Settings shared by the run commands. Unset optionals take the preset's default.
struct RunConfig {
    std::string preset = "desk64";
    std::string data;
    std::size_t k = 10;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> iterations;
    std::size_t batch = 32;
    double lr = kPaperInitialLr;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::optional<std::uint64_t> halving_period;
    bool augment = true;
    std::array<float, 3> mean = kImageNetMean;
    std::array<float, 3> stdev = kImageNetStd;
    std::string out = ".";
    std::size_t log_interval = 10;
    std::optional<std::uint64_t> checkpoint_interval;
    std::vector<double> fractions = kAblationFractions;
    std::size_t classes = 3;
    std::size_t per_class = 12;
    std::size_t size = 64;

    std::uint64_t effective_iterations() const {
        return iterations.value_or(preset == "paper224" ? 400000 : 300);
    }
    std::uint64_t effective_halving_period() const {
        return halving_period.value_or(preset == "paper224" ? kPaperHalvingPeriod : kDeskHalvingPeriod);
    }
    std::uint64_t effective_checkpoint_interval() const {
        return checkpoint_interval.value_or(preset == "paper224" ? 10000 : 100);
    }
};

/// Every key accepted in a config file; each is also a `--key` flag.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "preset", "data",  "k",   "seed", "iterations",   "batch",        "lr",          "momentum",
        "weight-decay", "halving-period", "augment", "mean", "std", "out", "log-interval", "checkpoint-interval",
        "fractions",    "classes",        "per-class", "size"};
    return keys;
}

/// Lower case, underscores as hyphens.
inline std::string canonical_key(std::string key) {
    for (char& c : key) c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return key;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end || text.empty()) throw ConfigError("invalid value '" + text + "' for " + key);
    return v;
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline std::array<float, 3> parse_triplet(const std::string& key, const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != 3) throw ConfigError(key + " needs three comma-separated values, got '" + text + "'");
    return {parse_number<float>(key, parts[0]), parse_number<float>(key, parts[1]), parse_number<float>(key, parts[2])};
}

inline bool parse_switch(const std::string& key, const std::string& text) {
    if (text == "on" || text == "true" || text == "1" || text == "yes") return true;
    if (text == "off" || text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("invalid value '" + text + "' for " + key + " (on|off)");
}

/// Shortest text that reads back to the same value.
template <typename T>
std::string shortest(T v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
    return std::string(buf, r.ptr);
}

inline std::string fmt_double(double v) { return shortest(v); }

} // namespace detail

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
inline std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = canonical_key(detail::trim(line.substr(0, eq)));
        if (std::ranges::find(config_keys(), key) == config_keys().end())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        out[key] = detail::trim(line.substr(eq + 1));
    }
    return out;
}

inline void apply_setting(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
    using detail::parse_number;
    const std::string key = canonical_key(raw_key);
    if (key == "preset") {
        if (value != "desk64" && value != "paper224") throw ConfigError("unknown preset '" + value + "' (desk64, paper224)");
        cfg.preset = value;
    } else if (key == "data") cfg.data = value;
    else if (key == "k") cfg.k = parse_number<std::size_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "iterations") cfg.iterations = parse_number<std::uint64_t>(key, value);
    else if (key == "batch") cfg.batch = parse_number<std::size_t>(key, value);
    else if (key == "lr") cfg.lr = parse_number<double>(key, value);
    else if (key == "momentum") cfg.momentum = parse_number<double>(key, value);
    else if (key == "weight-decay") cfg.weight_decay = parse_number<double>(key, value);
    else if (key == "halving-period") cfg.halving_period = parse_number<std::uint64_t>(key, value);
    else if (key == "augment") cfg.augment = detail::parse_switch(key, value);
    else if (key == "mean") cfg.mean = detail::parse_triplet(key, value);
    else if (key == "std") cfg.stdev = detail::parse_triplet(key, value);
    else if (key == "out") cfg.out = value;
    else if (key == "log-interval") cfg.log_interval = parse_number<std::size_t>(key, value);
    else if (key == "checkpoint-interval") cfg.checkpoint_interval = parse_number<std::uint64_t>(key, value);
    else if (key == "fractions") {
        cfg.fractions.clear();
        for (const std::string& f : detail::split_list(value)) cfg.fractions.push_back(parse_number<double>(key, f));
    } else if (key == "classes") cfg.classes = parse_number<std::size_t>(key, value);
    else if (key == "per-class") cfg.per_class = parse_number<std::size_t>(key, value);
    else if (key == "size") cfg.size = parse_number<std::size_t>(key, value);
    else throw ConfigError("unknown setting '" + raw_key + "'");
}

/// Defaults, then the config file's entries, then flag overrides.
inline RunConfig resolve_config(const std::map<std::string, std::string>& file_settings,
                                const std::map<std::string, std::string>& overrides) {
    RunConfig cfg;
    for (const auto& [k, v] : file_settings) apply_setting(cfg, k, v);
    for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
    if (cfg.batch < 1) throw ConfigError("batch must be at least 1");
    if (cfg.effective_iterations() < 1) throw ConfigError("iterations must be at least 1");
    if (cfg.log_interval < 1) throw ConfigError("log-interval must be at least 1");
    if (!(cfg.lr > 0)) throw ConfigError("lr must be positive");
    if (!(cfg.momentum >= 0 && cfg.momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(cfg.weight_decay >= 0)) throw ConfigError("weight-decay must be non-negative");
    for (float s : cfg.stdev)
        if (!(s > 0)) throw ConfigError("std entries must be positive");
    return cfg;
}

/// The effective configuration in config-file syntax; feeding it back reproduces the run.
inline std::string echo_config(const RunConfig& c) {
    std::ostringstream o;
    auto triplet = [](const std::array<float, 3>& t) {
        return detail::shortest(t[0]) + "," + detail::shortest(t[1]) + "," + detail::shortest(t[2]);
    };
    std::string fractions;
    for (double f : c.fractions) fractions += (fractions.empty() ? "" : ",") + detail::fmt_double(f);
    o << "preset = " << c.preset << '\n'
      << "data = " << c.data << '\n'
      << "k = " << c.k << '\n'
      << "seed = " << c.seed << '\n'
      << "iterations = " << c.effective_iterations() << '\n'
      << "batch = " << c.batch << '\n'
      << "lr = " << detail::fmt_double(c.lr) << '\n'
      << "momentum = " << detail::fmt_double(c.momentum) << '\n'
      << "weight-decay = " << detail::fmt_double(c.weight_decay) << '\n'
      << "halving-period = " << c.effective_halving_period() << '\n'
      << "augment = " << (c.augment ? "on" : "off") << '\n'
      << "mean = " << triplet(c.mean) << '\n'
      << "std = " << triplet(c.stdev) << '\n'
      << "out = " << c.out << '\n'
      << "log-interval = " << c.log_interval << '\n'
      << "checkpoint-interval = " << c.effective_checkpoint_interval() << '\n'
      << "fractions = " << fractions << '\n';
    return o.str();
}

inline TrainOptions train_options(const RunConfig& c) {
    TrainOptions t;
    t.iterations = c.effective_iterations();
    t.batch_size = c.batch;
    t.lr = c.lr;
    t.momentum = c.momentum;
    t.weight_decay = c.weight_decay;
    t.halving_period = c.effective_halving_period();
    t.augment = c.augment;
    t.seed = c.seed;
    t.log_interval = c.log_interval;
    t.norm = {c.mean, c.stdev};
    return t;
}

} // namespace plcnn
