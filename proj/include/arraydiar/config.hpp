#pragma once

// Structured text config files: one `key = value` per line, `#` starts a
// comment. Values are JSON literals when they parse as JSON (numbers, arrays,
// objects, quoted strings); anything else is kept as a raw string, so paths
// can be written unquoted. Keys may repeat.

#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arraydiar/common.hpp"

namespace arraydiar {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      // A '#' inside a quoted JSON string is kept.
      if (hash != std::string::npos && line.find('"') == std::string::npos) line.erase(hash);
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (line[first] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(origin + ":" + std::to_string(line_no) + ": expected `key = value`");
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(origin + ":" + std::to_string(line_no) + ": empty key");
      cfg.entries_[key].push_back(to_json(value));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    return parse(in, path);
  }

  static KeyValueConfig from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  /// Replaces every value of `key`.
  void set(const std::string& key, std::vector<nlohmann::json> values) { entries_[key] = std::move(values); }

  /// Keys present in `other` replace this config's values for that key.
  void merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
  }

  bool empty() const { return entries_.empty(); }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  /// Last occurrence wins for scalar lookups.
  const nlohmann::json& at(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error("missing config key: " + key);
    return it->second.back();
  }

  const std::vector<nlohmann::json>& all(const std::string& key) const {
    static const std::vector<nlohmann::json> kEmpty;
    auto it = entries_.find(key);
    return it == entries_.end() ? kEmpty : it->second;
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return as_number(at(key), key);
  }

  double number(const std::string& key) const { return as_number(at(key), key); }

  std::string string(const std::string& key, const std::string& fallback = {}) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    return v.is_string() ? v.get<std::string>() : v.dump();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number()) return v.get<double>() != 0.0;
    std::string s = v.get<std::string>();
    if (s == "yes" || s == "on") return true;
    if (s == "no" || s == "off") return false;
    throw Error("config key " + key + " is not a boolean");
  }

  /// Accepts JSON numbers plus the strings inf/-inf/nan.
  static double as_number(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw Error("config key " + key + " is not a number");
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static nlohmann::json to_json(const std::string& text) {
    auto parsed = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) return nlohmann::json(text);
    return parsed;
  }

  std::map<std::string, std::vector<nlohmann::json>> entries_;
};

}  // namespace arraydiar
