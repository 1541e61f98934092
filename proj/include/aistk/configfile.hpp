#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "aistk/ais/types.hpp"

namespace aistk {

/// One `[kind]` or `[kind name]` block of a config file, holding its
/// `key = value` entries in file order.
struct ConfigSection {
    std::string kind;
    std::string name;  // empty for unnamed sections
    int line = 0;
    std::vector<std::pair<std::string, std::string>> entries;

    /// "kind" or "kind name", for error messages.
    std::string label() const;

    const std::string* find(const std::string& key) const;
    bool has(const std::string& key) const { return find(key) != nullptr; }

    /// Throw ConfigError if the key is absent (no-fallback overloads) or the
    /// value does not parse as the requested type.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    /// Throws ConfigError naming the first entry whose key is not listed.
    void check_keys(std::initializer_list<const char*> allowed) const;
};

struct ConfigDoc {
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& kind, const std::string& name = "") const;
    const ConfigSection& require(const std::string& kind, const std::string& name = "") const;
    std::vector<const ConfigSection*> all(const std::string& kind) const;
};

/// Parses the flat `[section]` / `key = value` format. `#` starts a comment,
/// blank lines are ignored. Throws ConfigError on syntax errors, keys outside
/// any section, or duplicate keys within one section.
ConfigDoc parse_config(std::istream& in);

/// Throws IoError if the file cannot be read.
ConfigDoc load_config(const std::string& path);

/// Reads a [roi]-shaped section (lat/lon bounds required; bin counts, sog_max
/// and dt optional) and finalizes it.
RoiConfig roi_from_section(const ConfigSection& s);

}  // namespace aistk
