#include "emrdm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emrdm/errors.hpp"

namespace emrdm {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            current = trim(t.substr(1, t.size() - 2));
            if (current.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section");
            cfg.set(current, "", "");  // materialize section
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (current.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key '" + key + "' outside any [section]");
        cfg.set(current, key, value);
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str());
}

std::string Config::serialize() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [name, section] : sections_) {
        if (!first) os << "\n";
        first = false;
        os << "[" << name << "]\n";
        for (const auto& [k, v] : section)
            if (!k.empty()) os << k << " = " << v << "\n";
    }
    return os.str();
}

void Config::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config file: " + path);
    out << serialize();
}

bool Config::has(const std::string& section, const std::string& key) const {
    for (const auto& [name, sec] : sections_)
        if (name == section)
            for (const auto& [k, v] : sec)
                if (k == key) return true;
    return false;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    for (const auto& [name, sec] : sections_)
        if (name == section)
            for (const auto& [k, v] : sec)
                if (k == key) return v;
    throw ConfigError("missing config key '" + section + "." + key + "'");
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + section + "." + key + "': '" + v +
                          "' is not a number");
    }
}

int Config::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(d);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + section + "." + key + "': '" + v +
                          "' is not an integer");
    }
}

uint64_t Config::get_u64(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<uint64_t>(d);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + section + "." + key + "': '" + v +
                          "' is not an unsigned integer");
    }
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + section + "." + key + "': '" + v + "' is not a bool");
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    for (auto& [name, sec] : sections_)
        if (name == section) {
            if (key.empty()) return;
            for (auto& [k, v] : sec)
                if (k == key) {
                    v = value;
                    return;
                }
            sec.emplace_back(key, value);
            return;
        }
    sections_.emplace_back(section, Section{});
    if (!key.empty()) sections_.back().second.emplace_back(key, value);
}

void Config::set_double(const std::string& section, const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    set(section, key, os.str());
}

void Config::merge(const Config& other) {
    for (const auto& [name, sec] : other.sections_)
        for (const auto& [k, v] : sec)
            if (!k.empty()) set(name, k, v);
}

Config default_config() {
    Config c;
    c.set("run", "seed", "0");
    c.set("run", "dataset", "data/toy");
    c.set("run", "out", "out");
    c.set("run", "checkpoint", "");
    c.set("run", "trace", "false");

    c.set("data", "n_images", "64");
    c.set("data", "n_test", "16");
    c.set("data", "height", "32");
    c.set("data", "width", "32");
    c.set("data", "seq_len", "1");
    c.set("data", "cloud_density", "0.5");
    c.set("data", "cloud_value", "0.95");
    c.set("data", "channels", "3");
    c.set("data", "aux_channels", "1");
    c.set("data", "seed", "7");

    c.set("schedule", "kind", "mean_reverting");
    c.set("schedule", "alpha", "3.0");

    c.set("precondition", "source", "manifest");  // manifest | config
    c.set("precondition", "sigma_data", "1.0");
    c.set("precondition", "sigma_mu", "1.0");
    c.set("precondition", "sigma_cov", "0.9");

    c.set("network", "kind", "multi");
    c.set("network", "width1", "16");
    c.set("network", "width2", "32");
    c.set("network", "heads", "4");
    c.set("network", "key_dim", "8");
    c.set("network", "init_seed", "1");
    c.set("network", "zero_cond", "false");

    c.set("trainer", "p_mean", "-1.2");
    c.set("trainer", "p_std", "1.2");
    c.set("trainer", "batch_size", "8");
    c.set("trainer", "epochs", "40");
    c.set("trainer", "learning_rate", "0.0001");
    c.set("trainer", "clip_norm", "1.0");
    c.set("trainer", "seed", "0");
    c.set("trainer", "val_images", "8");

    c.set("sampler", "n_steps", "5");
    c.set("sampler", "s_churn", "1.0");
    c.set("sampler", "s_tmin", "0.0");
    c.set("sampler", "s_tmax", "100.0");
    c.set("sampler", "s_noise", "1.0");
    c.set("sampler", "sigma_min", "0.001");
    c.set("sampler", "sigma_max", "100.0");
    c.set("sampler", "rho", "7.0");
    c.set("sampler", "seed", "0");
    return c;
}

}  // namespace emrdm
