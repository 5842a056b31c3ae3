#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gdt/error.hpp"
#include "gdt/format.hpp"

namespace gdt {

/// Flat `key = value` settings with dotted section keys.
///
/// `#` starts a comment; blank lines are ignored. Later assignments win, so
/// `--set` overrides are applied by calling set() after parsing the file.
/// Typed getters record which keys were read; unused() lists the rest so
/// typos can be reported.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>") {
    Config c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string_view body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos)
        throw ParseError(source + ": expected 'key = value', got '" + std::string(body) + "'", line_no);
      const std::string_view key = trim(body.substr(0, eq));
      if (key.empty()) throw ParseError(source + ": empty key", line_no);
      c.set(std::string(key), std::string(trim(body.substr(eq + 1))));
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in, path.string());
  }

  /// Applies a `key=value` override.
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty())
      throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
    set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
  }

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) throw ConfigError(key + ": required setting is missing");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    if (!parse_double(it->second, v)) throw ConfigError(key + ": expected a number, got '" + it->second + "'");
    return v;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    if (!parse_int(it->second, v))
      throw ConfigError(key + ": expected a non-negative integer, got '" + it->second + "'");
    return v;
  }

  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const std::string_view item : split_list(it->second)) {
      double v = 0.0;
      if (!parse_double(item, v)) throw ConfigError(key + ": bad list entry '" + std::string(item) + "'");
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::uint64_t> get_uint_list(const std::string& key, const std::vector<std::uint64_t>& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::uint64_t> out;
    for (const std::string_view item : split_list(it->second)) {
      std::uint64_t v = 0;
      if (!parse_int(item, v)) throw ConfigError(key + ": bad list entry '" + std::string(item) + "'");
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Canonical text form, one sorted `key = value` per line.
  std::string dump() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  static std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    for (;;) {
      const auto comma = s.find(',');
      const std::string_view item = trim(s.substr(0, comma));
      if (!item.empty()) out.push_back(item);
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
    }
    return out;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace gdt
