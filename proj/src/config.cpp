#include "berry/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace berry {
namespace {

struct Cursor {
    const std::string& s;
    std::size_t i = 0;
    int line = 1;
    const std::string& origin;

    bool done() const { return i >= s.size(); }
    char peek() const { return s[i]; }
    char take() {
        char c = s[i++];
        if (c == '\n') ++line;
        return c;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
    }
    void skip_ws_and_comments(bool stop_at_newline) {
        while (!done()) {
            char c = peek();
            if (c == '#') {
                while (!done() && peek() != '\n') take();
            } else if (c == '\n') {
                if (stop_at_newline) return;
                take();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                take();
            } else {
                return;
            }
        }
    }
};

ConfigValue parse_value(Cursor& c);

ConfigValue parse_array(Cursor& c) {
    ConfigValue v;
    v.kind = ConfigValue::Kind::Array;
    c.take(); // '['
    while (true) {
        c.skip_ws_and_comments(false);
        if (c.done()) c.fail("unterminated array");
        if (c.peek() == ']') {
            c.take();
            return v;
        }
        v.arr.push_back(parse_value(c));
        c.skip_ws_and_comments(false);
        if (c.done()) c.fail("unterminated array");
        if (c.peek() == ',') {
            c.take();
        } else if (c.peek() != ']') {
            c.fail("expected ',' or ']' in array");
        }
    }
}

ConfigValue parse_value(Cursor& c) {
    c.skip_ws_and_comments(false);
    if (c.done()) c.fail("expected a value");
    char ch = c.peek();
    ConfigValue v;
    if (ch == '[') return parse_array(c);
    if (ch == '"') {
        c.take();
        v.kind = ConfigValue::Kind::String;
        while (!c.done() && c.peek() != '"') {
            char x = c.take();
            if (x == '\\' && !c.done()) x = c.take();
            v.str.push_back(x);
        }
        if (c.done()) c.fail("unterminated string");
        c.take();
        return v;
    }
    // bare token: bool or number
    std::string tok;
    while (!c.done()) {
        char x = c.peek();
        if (x == ',' || x == ']' || x == '\n' || x == '#' ||
            std::isspace(static_cast<unsigned char>(x)))
            break;
        tok.push_back(c.take());
    }
    if (tok == "true" || tok == "false") {
        v.kind = ConfigValue::Kind::Bool;
        v.b = (tok == "true");
        return v;
    }
    char* end = nullptr;
    const double num = std::strtod(tok.c_str(), &end);
    if (end == nullptr || *end != '\0' || tok.empty())
        c.fail("cannot parse value '" + tok + "'");
    v.kind = ConfigValue::Kind::Number;
    v.num = num;
    return v;
}

std::string parse_key(Cursor& c) {
    std::string key;
    while (!c.done()) {
        char x = c.peek();
        if (x == '=' || std::isspace(static_cast<unsigned char>(x))) break;
        key.push_back(c.take());
    }
    if (key.empty()) c.fail("expected a key");
    return key;
}

} // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    Cursor c{text, 0, 1, cfg.origin_};
    std::string section;
    while (true) {
        c.skip_ws_and_comments(false);
        if (c.done()) break;
        if (c.peek() == '[') {
            c.take();
            section.clear();
            while (!c.done() && c.peek() != ']') section.push_back(c.take());
            if (c.done()) c.fail("unterminated section header");
            c.take();
        } else {
            const std::string key = parse_key(c);
            c.skip_ws_and_comments(true);
            if (c.done() || c.peek() != '=') c.fail("expected '=' after key '" + key + "'");
            c.take();
            ConfigValue v = parse_value(c);
            const std::string full = section.empty() ? key : section + "." + key;
            cfg.values_[full] = std::move(v);
        }
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

const ConfigValue& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return it->second;
}

double Config::get_num(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (v.kind != ConfigValue::Kind::Number)
        throw ConfigError(origin_ + ": key '" + key + "' is not a number");
    return v.num;
}

double Config::get_num(const std::string& key, double fallback) const {
    return has(key) ? get_num(key) : fallback;
}

long Config::get_int(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const double v = get_num(key);
    const long n = std::lround(v);
    if (std::abs(v - static_cast<double>(n)) > 1e-9)
        throw ConfigError(origin_ + ": key '" + key + "' is not an integer");
    return n;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& v = get(key);
    if (v.kind != ConfigValue::Kind::Bool)
        throw ConfigError(origin_ + ": key '" + key + "' is not a bool");
    return v.b;
}

std::string Config::get_str(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (v.kind != ConfigValue::Kind::String)
        throw ConfigError(origin_ + ": key '" + key + "' is not a string");
    return v.str;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_str(key) : fallback;
}

std::vector<std::string> Config::keys_under(const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string p = prefix + ".";
    for (const auto& kv : values_)
        if (kv.first.rfind(p, 0) == 0) out.push_back(kv.first);
    return out;
}

void Config::set_num(const std::string& key, double v) {
    ConfigValue cv;
    cv.kind = ConfigValue::Kind::Number;
    cv.num = v;
    values_[key] = cv;
}

void Config::set_str(const std::string& key, const std::string& v) {
    ConfigValue cv;
    cv.kind = ConfigValue::Kind::String;
    cv.str = v;
    values_[key] = cv;
}

} // namespace berry
