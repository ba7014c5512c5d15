#include "qm/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace qm::toml {

const std::string& value::as_string() const {
    if (!is_string()) throw parse_error("toml: value is not a string");
    return std::get<std::string>(v);
}

int64_t value::as_int() const {
    if (!is_int()) throw parse_error("toml: value is not an integer");
    return std::get<int64_t>(v);
}

double value::as_number() const {
    if (is_int()) return static_cast<double>(std::get<int64_t>(v));
    if (is_float()) return std::get<double>(v);
    throw parse_error("toml: value is not a number");
}

bool value::as_bool() const {
    if (!is_bool()) throw parse_error("toml: value is not a boolean");
    return std::get<bool>(v);
}

const std::vector<value>& value::as_array() const {
    if (!is_array()) throw parse_error("toml: value is not an array");
    return std::get<std::vector<value>>(v);
}

namespace {

struct cursor {
    std::string_view s;
    size_t pos = 0;
    int line = 1;

    bool eof() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    char take() { return s[pos++]; }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw parse_error("toml parse error (line " + std::to_string(line) + "): " + msg);
    }
};

std::string parse_basic_string(cursor& c) {
    // opening quote already validated by caller
    c.take();
    std::string out;
    while (true) {
        if (c.eof()) c.fail("unterminated string");
        char ch = c.take();
        if (ch == '"') break;
        if (ch == '\n') c.fail("newline in string");
        if (ch == '\\') {
            if (c.eof()) c.fail("dangling escape");
            char esc = c.take();
            switch (esc) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: c.fail(std::string("unsupported escape \\") + esc);
            }
        } else {
            out.push_back(ch);
        }
    }
    return out;
}

value parse_scalar(cursor& c);

value parse_array(cursor& c) {
    c.take();  // '['
    std::vector<value> items;
    while (true) {
        c.skip_ws();
        while (!c.eof() && c.peek() == '\n') {  // arrays may span lines
            c.take();
            ++c.line;
            c.skip_ws();
        }
        if (c.eof()) c.fail("unterminated array");
        if (c.peek() == ']') {
            c.take();
            break;
        }
        items.push_back(parse_scalar(c));
        c.skip_ws();
        while (!c.eof() && c.peek() == '\n') {
            c.take();
            ++c.line;
            c.skip_ws();
        }
        if (c.eof()) c.fail("unterminated array");
        if (c.peek() == ',') {
            c.take();
            continue;
        }
        if (c.peek() == ']') {
            c.take();
            break;
        }
        c.fail("expected ',' or ']' in array");
    }
    return value{std::move(items)};
}

value parse_scalar(cursor& c) {
    c.skip_ws();
    if (c.eof()) c.fail("expected value");
    char ch = c.peek();
    if (ch == '"') return value{parse_basic_string(c)};
    if (ch == '[') return parse_array(c);

    size_t start = c.pos;
    while (!c.eof()) {
        char k = c.peek();
        if (k == ',' || k == ']' || k == '#' || k == '\n') break;
        c.take();
    }
    std::string_view tok = c.s.substr(start, c.pos - start);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
    if (tok.empty()) c.fail("expected value");

    if (tok == "true") return value{true};
    if (tok == "false") return value{false};

    bool looks_float = tok.find('.') != std::string_view::npos ||
                       tok.find('e') != std::string_view::npos ||
                       tok.find('E') != std::string_view::npos;
    if (!looks_float) {
        int64_t iv = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
        if (ec == std::errc() && p == tok.data() + tok.size()) return value{iv};
    }
    double dv = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), dv);
    if (ec == std::errc() && p == tok.data() + tok.size()) return value{dv};
    c.fail("cannot parse value '" + std::string(tok) + "'");
}

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

}  // namespace

document parse(const std::string& text) {
    document doc;
    cursor c{text};
    std::string table;

    while (!c.eof()) {
        c.skip_ws();
        if (c.eof()) break;
        char ch = c.peek();
        if (ch == '\n') {
            c.take();
            ++c.line;
            continue;
        }
        if (ch == '#') {
            while (!c.eof() && c.peek() != '\n') c.take();
            continue;
        }
        if (ch == '[') {
            c.take();
            std::string name;
            while (!c.eof() && c.peek() != ']' && c.peek() != '\n') name.push_back(c.take());
            if (c.eof() || c.peek() != ']') c.fail("unterminated table header");
            c.take();
            while (!name.empty() && (name.back() == ' ' || name.front() == ' ')) {
                if (name.back() == ' ') name.pop_back();
                if (!name.empty() && name.front() == ' ') name.erase(name.begin());
            }
            if (name.empty()) c.fail("empty table name");
            table = name;
            continue;
        }

        std::string key;
        while (!c.eof() && is_key_char(c.peek())) key.push_back(c.take());
        if (key.empty()) c.fail("expected key");
        c.skip_ws();
        if (c.eof() || c.peek() != '=') c.fail("expected '=' after key '" + key + "'");
        c.take();
        value val = parse_scalar(c);
        c.skip_ws();
        if (!c.eof() && c.peek() == '#') {
            while (!c.eof() && c.peek() != '\n') c.take();
        }
        if (!c.eof()) {
            if (c.peek() != '\n') c.fail("trailing characters after value for key '" + key + "'");
            c.take();
            ++c.line;
        }

        std::string full = table.empty() ? key : table + "." + key;
        if (doc.entries.count(full)) c.fail("duplicate key '" + full + "'");
        doc.entries.emplace(std::move(full), std::move(val));
    }
    return doc;
}

document parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const value* document::find(const std::string& dotted_key) const {
    auto it = entries.find(dotted_key);
    return it == entries.end() ? nullptr : &it->second;
}

std::string document::get_string(const std::string& key, const std::string& fallback) const {
    const value* v = find(key);
    return v ? v->as_string() : fallback;
}

std::string document::require_string(const std::string& key) const {
    const value* v = find(key);
    if (!v) throw parse_error("missing required config key '" + key + "'");
    return v->as_string();
}

int64_t document::get_int(const std::string& key, int64_t fallback) const {
    const value* v = find(key);
    return v ? v->as_int() : fallback;
}

double document::get_number(const std::string& key, double fallback) const {
    const value* v = find(key);
    return v ? v->as_number() : fallback;
}

bool document::get_bool(const std::string& key, bool fallback) const {
    const value* v = find(key);
    return v ? v->as_bool() : fallback;
}

std::vector<std::string> document::get_string_array(const std::string& key) const {
    const value* v = find(key);
    std::vector<std::string> out;
    if (!v) return out;
    for (const auto& item : v->as_array()) out.push_back(item.as_string());
    return out;
}

std::vector<double> document::get_number_array(const std::string& key) const {
    const value* v = find(key);
    std::vector<double> out;
    if (!v) return out;
    for (const auto& item : v->as_array()) out.push_back(item.as_number());
    return out;
}

}  // namespace qm::toml
