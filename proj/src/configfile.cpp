#include "aistk/configfile.hpp"

#include <fstream>
#include <sstream>

#include "aistk/binio.hpp"
#include "aistk/errors.hpp"

namespace aistk {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::string ConfigSection::label() const {
    return name.empty() ? kind : kind + " " + name;
}

const std::string* ConfigSection::find(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return &v;
    return nullptr;
}

std::string ConfigSection::get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw ConfigError("[" + label() + "] is missing required key '" + key + "'");
    return *v;
}

std::string ConfigSection::get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

double ConfigSection::get_double(const std::string& key) const {
    try {
        return parse_double(get_string(key), "[" + label() + "] " + key);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
}

double ConfigSection::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int ConfigSection::get_int(const std::string& key) const {
    std::int64_t v;
    try {
        v = parse_int(get_string(key), "[" + label() + "] " + key);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    if (v < INT32_MIN || v > INT32_MAX)
        throw ConfigError("[" + label() + "] key '" + key + "' is out of range");
    return static_cast<int>(v);
}

int ConfigSection::get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::int64_t ConfigSection::get_i64(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    try {
        return parse_int(get_string(key), "[" + label() + "] " + key);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
}

std::uint64_t ConfigSection::get_u64(const std::string& key, std::uint64_t fallback) const {
    std::int64_t v = get_i64(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("[" + label() + "] key '" + key + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
}

void ConfigSection::check_keys(std::initializer_list<const char*> allowed) const {
    for (const auto& [k, v] : entries) {
        bool known = false;
        for (const char* a : allowed)
            if (k == a) known = true;
        if (!known) throw ConfigError("[" + label() + "] has unknown key '" + k + "'");
    }
}

const ConfigSection* ConfigDoc::find(const std::string& kind, const std::string& name) const {
    for (const auto& s : sections)
        if (s.kind == kind && s.name == name) return &s;
    return nullptr;
}

const ConfigSection& ConfigDoc::require(const std::string& kind, const std::string& name) const {
    const ConfigSection* s = find(kind, name);
    if (!s) {
        std::string what = name.empty() ? kind : kind + " " + name;
        throw ConfigError("missing required section [" + what + "]");
    }
    return *s;
}

std::vector<const ConfigSection*> ConfigDoc::all(const std::string& kind) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections)
        if (s.kind == kind) out.push_back(&s);
    return out;
}

ConfigDoc parse_config(std::istream& in) {
    ConfigDoc doc;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            std::string inner = trim(line.substr(1, line.size() - 2));
            if (inner.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section header");
            ConfigSection s;
            s.line = lineno;
            std::size_t sp = inner.find_first_of(" \t");
            if (sp == std::string::npos) {
                s.kind = inner;
            } else {
                s.kind = inner.substr(0, sp);
                s.name = trim(inner.substr(sp + 1));
            }
            doc.sections.push_back(std::move(s));
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (doc.sections.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                              "' appears before any [section]");
        ConfigSection& s = doc.sections.back();
        if (s.has(key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key +
                              "' in [" + s.label() + "]");
        s.entries.emplace_back(std::move(key), std::move(value));
    }
    return doc;
}

ConfigDoc load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_config(in);
}

RoiConfig roi_from_section(const ConfigSection& s) {
    s.check_keys({"lat_min", "lat_max", "lon_min", "lon_max", "lat_bins", "lon_bins", "sog_bins",
                  "cog_bins", "sog_max", "dt"});
    RoiConfig roi;
    roi.lat_min = s.get_double("lat_min");
    roi.lat_max = s.get_double("lat_max");
    roi.lon_min = s.get_double("lon_min");
    roi.lon_max = s.get_double("lon_max");
    roi.lat_bins = s.get_int("lat_bins", 0);
    roi.lon_bins = s.get_int("lon_bins", 0);
    roi.sog_bins = s.get_int("sog_bins", 0);
    roi.cog_bins = s.get_int("cog_bins", 0);
    roi.sog_max = s.get_double("sog_max", roi.sog_max);
    roi.dt = s.get_int("dt", roi.dt);
    roi.finalize();
    return roi;
}

}  // namespace aistk
