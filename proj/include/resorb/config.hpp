#ifndef RESORB_CONFIG_HPP
#define RESORB_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

namespace resorb {

// Minimal TOML-style file: [section] headers, key = value pairs, # comments.
// Values: quoted strings, booleans, numbers, flat arrays of numbers/strings.
struct TomlValue {
    enum class Kind { Str, Num, Bool, Array } kind = Kind::Num;
    std::string str;
    double num = 0;
    bool boolean = false;
    std::vector<TomlValue> array;
};

class TomlTable {
  public:
    static TomlTable parse_file(const std::string& path);
    static TomlTable parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    const TomlValue& at(const std::string& key) const; // throws ConfigError

    double num(const std::string& key) const;
    double num_or(const std::string& key, double fallback) const;
    std::string str(const std::string& key) const;
    std::string str_or(const std::string& key, const std::string& fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::vector<double> num_array(const std::string& key) const;
    std::vector<std::string> str_array(const std::string& key) const;

    // All "section.key" paths, sorted; used for unknown-key validation.
    std::vector<std::string> keys() const;
    // Section names in file order.
    const std::vector<std::string>& sections() const { return sections_; }

  private:
    std::map<std::string, TomlValue> kv_;
    std::vector<std::string> sections_;
};

} // namespace resorb

#endif
