#include "t2v/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace t2v {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_text(const std::string& text, const std::set<std::string>& known,
                          const std::string& source_name) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source_name + ":" + std::to_string(lineno) + ": empty key");
        if (!known.count(key))
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path, const std::set<std::string>& known) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), known, path);
}

void Config::set(const std::string& key, const std::string& value,
                 const std::set<std::string>& known) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    char* end = nullptr;
    long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "' is not an integer: '" + it->second + "'");
    return v;
}

double Config::get_float(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "' is not a number: '" + it->second + "'");
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "' is not a boolean: '" + v + "'");
}

}  // namespace t2v
