#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtdtl/core/error.hpp"

namespace mtdtl::io {

/// Plain-text `key = value` configuration. Lines starting with '#' are comments.
class KeyValueConfig {
public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& is, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw IoError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw IoError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (cfg.values_.count(key)) throw IoError(origin + ": duplicate key '" + key + "'");
      cfg.order_.push_back(key);
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("missing file: " + path.string());
    return parse(is, path.string());
  }

  /// Throws if any key is not in `known`.
  void check_keys(const std::set<std::string>& known) const {
    for (const auto& k : order_)
      if (!known.count(k)) throw IoError("unknown config key '" + k + "'");
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw IoError("missing config key '" + key + "'");
    return it->second;
  }

  template <typename N>
  N get_number(const std::string& key, N fallback) const {
    return has(key) ? to_number<N>(key, get(key)) : fallback;
  }
  template <typename N>
  N get_number(const std::string& key) const {
    return to_number<N>(key, get(key));
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }

  std::string str() const {
    std::ostringstream os;
    for (const auto& k : order_) os << k << " = " << values_.at(k) << "\n";
    return os.str();
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << str();
  }

  const std::vector<std::string>& keys() const { return order_; }

private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  template <typename N>
  static N to_number(const std::string& key, const std::string& text) {
    std::istringstream is(text);
    N value{};
    is >> value;
    if (!is || !(is >> std::ws).eof()) throw IoError("config key '" + key + "' is not a number: '" + text + "'");
    return value;
  }

  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
};

} // namespace mtdtl::io
