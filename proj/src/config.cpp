#include "resorb/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "resorb/errors.hpp"

namespace resorb {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Strip a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool in_quote = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_quote = !in_quote;
        if (s[i] == '#' && !in_quote) return s.substr(0, i);
    }
    return s;
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            return false;
    return true;
}

TomlValue parse_scalar(const std::string& tok, int line) {
    TomlValue v;
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
        v.kind = TomlValue::Kind::Str;
        v.str = tok.substr(1, tok.size() - 2);
        return v;
    }
    if (tok == "true" || tok == "false") {
        v.kind = TomlValue::Kind::Bool;
        v.boolean = (tok == "true");
        return v;
    }
    char* end = nullptr;
    v.num = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw ParseError("unparseable value '" + tok + "'", line);
    v.kind = TomlValue::Kind::Num;
    return v;
}

TomlValue parse_value(const std::string& raw, int line) {
    std::string tok = trim(raw);
    if (tok.empty()) throw ParseError("missing value", line);
    if (tok.front() == '[') {
        if (tok.back() != ']') throw ParseError("unterminated array", line);
        TomlValue v;
        v.kind = TomlValue::Kind::Array;
        std::string body = tok.substr(1, tok.size() - 2);
        std::string cur;
        bool in_quote = false;
        for (char c : body) {
            if (c == '"') in_quote = !in_quote;
            if (c == ',' && !in_quote) {
                v.array.push_back(parse_scalar(trim(cur), line));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) v.array.push_back(parse_scalar(trim(cur), line));
        return v;
    }
    return parse_scalar(tok, line);
}

} // namespace

TomlTable TomlTable::parse_string(const std::string& text) {
    TomlTable t;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError("unterminated section header", lineno);
            section = trim(s.substr(1, s.size() - 2));
            if (!valid_key(section)) throw ParseError("invalid section name", lineno);
            t.sections_.push_back(section);
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
        std::string key = trim(s.substr(0, eq));
        if (!valid_key(key)) throw ParseError("invalid key '" + key + "'", lineno);
        std::string path = section.empty() ? key : section + "." + key;
        if (t.kv_.count(path)) throw ParseError("duplicate key '" + path + "'", lineno);
        t.kv_[path] = parse_value(s.substr(eq + 1), lineno);
    }
    return t;
}

TomlTable TomlTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

const TomlValue& TomlTable::at(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

double TomlTable::num(const std::string& key) const {
    const TomlValue& v = at(key);
    if (v.kind != TomlValue::Kind::Num)
        throw ConfigError("config key is not a number: " + key);
    return v.num;
}

double TomlTable::num_or(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
}

std::string TomlTable::str(const std::string& key) const {
    const TomlValue& v = at(key);
    if (v.kind != TomlValue::Kind::Str)
        throw ConfigError("config key is not a string: " + key);
    return v.str;
}

std::string TomlTable::str_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
}

bool TomlTable::boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const TomlValue& v = at(key);
    if (v.kind != TomlValue::Kind::Bool)
        throw ConfigError("config key is not a boolean: " + key);
    return v.boolean;
}

std::vector<double> TomlTable::num_array(const std::string& key) const {
    const TomlValue& v = at(key);
    if (v.kind != TomlValue::Kind::Array)
        throw ConfigError("config key is not an array: " + key);
    std::vector<double> out;
    for (const auto& e : v.array) {
        if (e.kind != TomlValue::Kind::Num)
            throw ConfigError("array element is not a number in: " + key);
        out.push_back(e.num);
    }
    return out;
}

std::vector<std::string> TomlTable::str_array(const std::string& key) const {
    const TomlValue& v = at(key);
    if (v.kind != TomlValue::Kind::Array)
        throw ConfigError("config key is not an array: " + key);
    std::vector<std::string> out;
    for (const auto& e : v.array) {
        if (e.kind != TomlValue::Kind::Str)
            throw ConfigError("array element is not a string in: " + key);
        out.push_back(e.str);
    }
    return out;
}

std::vector<std::string> TomlTable::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv_) out.push_back(k);
    return out;
}

} // namespace resorb
