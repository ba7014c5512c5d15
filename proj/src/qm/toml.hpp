#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qm::toml {

// Minimal TOML subset, enough for flat run-configuration files:
//   - comments (#), blank lines
//   - [table] headers (one level, no arrays-of-tables)
//   - key = value with basic "strings", integers, floats, booleans
//   - flat arrays of the above scalar types
// Unsupported syntax raises parse_error with a line number.

struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct value {
    std::variant<std::string, int64_t, double, bool, std::vector<value>> v;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_int() const { return std::holds_alternative<int64_t>(v); }
    bool is_float() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_array() const { return std::holds_alternative<std::vector<value>>(v); }

    const std::string& as_string() const;
    int64_t as_int() const;
    double as_number() const;  // int or float
    bool as_bool() const;
    const std::vector<value>& as_array() const;
};

class document {
public:
    // key lookup: "table.key" or bare "key" for top-level entries
    const value* find(const std::string& dotted_key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_number(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_string_array(const std::string& key) const;
    std::vector<double> get_number_array(const std::string& key) const;
    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::map<std::string, value> entries;  // dotted keys
};

document parse(const std::string& text);
document parse_file(const std::string& path);

}  // namespace qm::toml
