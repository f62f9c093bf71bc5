/* Copyright 2026 The CAFe Segmentation Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Flat `key = value` configuration text with `[section]` headers. Values
// remember their source line so errors can point at it.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/vocab.hpp"

namespace cafe {

class Ini {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;  // 0 = set programmatically
  };

  static Ini parse(std::istream& in, const std::string& origin = "<config>") {
    Ini ini;
    ini.origin_ = origin;
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = detail::trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        }
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                          "' appears before any [section]");
      }
      ini.data_[section][key] = {detail::trim(line.substr(eq + 1)), lineno};
    }
    return ini;
  }

  static Ini parse_string(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    return parse(in, origin);
  }

  static Ini load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    data_[section][key] = {value, 0};
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    return s != data_.end() && s->second.count(key);
  }

  // Formats a location prefix for diagnostics about section.key.
  std::string where(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    if (s != data_.end()) {
      auto k = s->second.find(key);
      if (k != s->second.end() && k->second.line) {
        return origin_ + ":" + std::to_string(k->second.line) + ": ";
      }
    }
    return origin_ + ": [" + section + "] " + key + ": ";
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
  }

  template <typename Int>
  Int get_int(const std::string& section, const std::string& key, Int fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    Int v{};
    const auto* first = e->value.data();
    const auto* last = first + e->value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError(where(section, key) + "'" + e->value + "' is not a valid integer");
    }
    return v;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(section, key) + "'" + e->value + "' is not a valid number");
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ConfigError(where(section, key) + "'" + e->value + "' is not a boolean");
  }

  // Rejects keys outside the allowed set so typos do not pass silently.
  void check_keys(const std::map<std::string, std::set<std::string>>& allowed) const {
    for (const auto& [section, keys] : data_) {
      auto s = allowed.find(section);
      if (s == allowed.end()) {
        const auto line = keys.empty() ? 0 : keys.begin()->second.line;
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": unknown section [" + section + "]");
      }
      for (const auto& [key, entry] : keys) {
        if (!s->second.count(key)) {
          throw ConfigError(where(section, key) + "unknown key '" + key + "' in [" + section + "]");
        }
      }
    }
  }

  std::string dump() const {
    std::ostringstream os;
    for (const auto& [section, keys] : data_) {
      os << '[' << section << "]\n";
      for (const auto& [key, entry] : keys) os << key << " = " << entry.value << '\n';
    }
    return os.str();
  }

  const std::string& origin() const { return origin_; }

 private:
  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    if (s == data_.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  std::string origin_ = "<config>";
  std::map<std::string, std::map<std::string, Entry>> data_;
};

}  // namespace cafe
