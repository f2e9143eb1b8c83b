#pragma once

#include <map>
#include <set>
#include <string>

#include "t2v/error.hpp"

namespace t2v {

// Flat key=value configuration: '#' starts a comment, blank lines ignored,
// unknown keys rejected against the caller-supplied registry. Parse errors
// name their line number. Typed accessors validate on read.
class Config {
public:
    static Config parse_text(const std::string& text, const std::set<std::string>& known,
                             const std::string& source_name);
    static Config parse_file(const std::string& path, const std::set<std::string>& known);

    // Flag-style override; validates against the same registry.
    void set(const std::string& key, const std::string& value,
             const std::set<std::string>& known);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_float(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace t2v
