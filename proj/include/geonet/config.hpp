#pragma once

// Versioned key-value run configuration.
//
//   # comment
//   version = 1
//   seed = 1
//   gbrt.iterations = 200
//
// One `key = value` per line; keys are dotted lowercase identifiers. The
// `version` key is mandatory. Command-line flags override file values.

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace geonet {

inline constexpr int kConfigVersion = 1;

// Bad configuration or flag values: a usage problem, not a data problem.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Config {
public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& source = "<config>") {
        Config c;
        c.source_ = source;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto text = trim(line);
            if (text.empty()) continue;
            const auto eq = text.find('=');
            if (eq == std::string::npos) c.fail("expected 'key = value'", line_no);
            const auto key = trim(text.substr(0, eq));
            const auto value = trim(text.substr(eq + 1));
            if (!valid_key(key)) c.fail("invalid key '" + key + "'", line_no);
            if (!c.values_.emplace(key, value).second) c.fail("duplicate key '" + key + "'", line_no);
        }
        if (!c.has("version")) throw config_error(source + ": missing 'version' key");
        if (c.integer("version", 0) != kConfigVersion)
            throw config_error(source + ": unsupported config version '" + c.get("version") + "' (expected " +
                               std::to_string(kConfigVersion) + ")");
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config '" + path + "'");
        return parse(in, path);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    long long integer(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        long long v = 0;
        const auto& s = it->second;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size()) throw config_error(source_ + ": '" + key + "' must be an integer");
        return v;
    }

    double number(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw config_error(source_ + ": '" + key + "' must be a number");
        }
    }

    bool boolean(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw config_error(source_ + ": '" + key + "' must be true or false");
    }

    // Rejects keys outside `known`, which catches typos early.
    void require_known(const std::set<std::string>& known) const {
        for (const auto& [k, v] : values_)
            if (k != "version" && !known.count(k)) throw config_error(source_ + ": unknown key '" + k + "'");
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    }

    static bool valid_key(const std::string& k) {
        if (k.empty() || k.front() == '.' || k.back() == '.') return false;
        for (char ch : k)
            if (!((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_' || ch == '.')) return false;
        return true;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t line) const {
        throw config_error(source_ + ":" + std::to_string(line) + ": " + what);
    }

    std::map<std::string, std::string> values_;
    std::string source_ = "<config>";
};

}  // namespace geonet
