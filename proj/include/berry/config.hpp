#pragma once

#include <map>
#include <string>
#include <vector>

#include "berry/errors.hpp"

namespace berry {

// Minimal parser for the key-value config dialect used by the model and sweep
// files: [section.subsection] headers, `key = value` lines, `#` comments,
// strings, booleans, numbers, and (possibly nested, possibly multi-line)
// arrays. Keys are flattened to dotted paths.

struct ConfigValue {
    enum class Kind { None, Bool, Number, String, Array };
    Kind kind = Kind::None;
    bool b = false;
    double num = 0.0;
    std::string str;
    std::vector<ConfigValue> arr;
};

class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_num(const std::string& key) const;
    double get_num(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    const ConfigValue& get(const std::string& key) const;

    // Keys under a dotted prefix, e.g. prefix "model.params".
    std::vector<std::string> keys_under(const std::string& prefix) const;

    void set_num(const std::string& key, double v);
    void set_str(const std::string& key, const std::string& v);

  private:
    std::map<std::string, ConfigValue> values_;
    std::string origin_;
};

} // namespace berry
