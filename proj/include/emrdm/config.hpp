#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace emrdm {

// Structured key-value configuration: `[section]` headers and
// `key = value` lines. Order is preserved so parse -> serialize -> parse
// is the identity. One file fully determines a run; CLI flags
// (--section.key) override individual keys.
class Config {
public:
    using Section = std::vector<std::pair<std::string, std::string>>;

    static Config parse(const std::string& text);
    static Config load(const std::string& path);
    std::string serialize() const;
    void save(const std::string& path) const;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;

    double get_double(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    uint64_t get_u64(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_double(const std::string& section, const std::string& key, double value);

    // Applies every key of `other` on top of this config.
    void merge(const Config& other);

    const std::vector<std::pair<std::string, Section>>& sections() const { return sections_; }

private:
    std::vector<std::pair<std::string, Section>> sections_;
};

// Built-in defaults for every section/key the pipeline understands.
Config default_config();

}  // namespace emrdm
