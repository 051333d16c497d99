#ifndef GEOBRIDGE_CONFIG_HPP_
#define GEOBRIDGE_CONFIG_HPP_

// Typed scenario configuration: an ordered table of dotted keys whose types
// are fixed by the scenario's defaults. TOML files and `key=value`
// overrides may only set known keys with compatible values.

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "geobridge/errors.hpp"

namespace geobridge {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string,
                                 std::vector<double>, std::vector<std::string>>;

inline const char* type_name(const ConfigValue& v) {
  static const char* names[] = {"boolean", "integer", "number", "string",
                                "number array", "string array"};
  return names[v.index()];
}

class Config {
 public:
  Config() = default;
  explicit Config(std::vector<std::pair<std::string, ConfigValue>> defaults)
      : entries_(std::move(defaults)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) index_[entries_[i].first] = i;
  }

  bool has(const std::string& key) const { return index_.count(key) > 0; }
  const std::vector<std::pair<std::string, ConfigValue>>& entries() const { return entries_; }

  // Replaces the value of a known key. Integers are accepted where numbers
  // are expected; integral numbers where integers are expected.
  void set(const std::string& key, ConfigValue value) {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    ConfigValue& slot = entries_[it->second].second;
    if (slot.index() == value.index()) {
      slot = std::move(value);
      return;
    }
    if (std::holds_alternative<double>(slot) && std::holds_alternative<std::int64_t>(value)) {
      slot = static_cast<double>(std::get<std::int64_t>(value));
      return;
    }
    if (std::holds_alternative<std::int64_t>(slot) && std::holds_alternative<double>(value)) {
      const double d = std::get<double>(value);
      if (std::floor(d) == d && std::abs(d) < 9e15) {
        slot = static_cast<std::int64_t>(d);
        return;
      }
    }
    if (std::holds_alternative<std::vector<double>>(slot) &&
        std::holds_alternative<std::vector<std::string>>(value) &&
        std::get<std::vector<std::string>>(value).empty()) {
      slot = std::vector<double>{};
      return;
    }
    throw ConfigError("config key '" + key + "' expects " + type_name(slot) + ", got " +
                      type_name(value));
  }

  // Parses `text` against the type of the key's default.
  void set_from_string(const std::string& key, const std::string& text) {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    const ConfigValue& slot = entries_[it->second].second;
    if (std::holds_alternative<std::string>(slot)) {
      std::string s = text;
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
      set(key, s);
      return;
    }
    std::string rhs = text;
    const bool is_array = std::holds_alternative<std::vector<double>>(slot) ||
                          std::holds_alternative<std::vector<std::string>>(slot);
    if (is_array && (rhs.empty() || rhs.front() != '[')) {
      if (std::holds_alternative<std::vector<std::string>>(slot)) {
        std::vector<std::string> items;
        std::stringstream ss(rhs);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) items.push_back(item);
        }
        set(key, items);
        return;
      }
      rhs = "[" + rhs + "]";
    }
    toml::table tbl;
    try {
      tbl = toml::parse("v = " + rhs);
    } catch (const toml::parse_error& e) {
      throw ConfigError("cannot parse value '" + text + "' for key '" + key +
                        "': " + std::string(e.description()));
    }
    set(key, from_toml(*tbl.get("v"), key));
  }

  // Applies every leaf of a TOML document; nested tables give dotted keys.
  // The top-level key "scenario" is returned rather than applied.
  std::string apply_toml(const toml::table& doc) {
    std::string scenario;
    apply_table(doc, "", scenario);
    return scenario;
  }

  template <class T>
  const T& get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    const ConfigValue& v = entries_[it->second].second;
    if (!std::holds_alternative<T>(v)) {
      throw ConfigError("config key '" + key + "' has type " + type_name(v));
    }
    return std::get<T>(v);
  }
  double number(const std::string& key) const { return get<double>(key); }
  int integer(const std::string& key) const {
    const auto v = get<std::int64_t>(key);
    if (v < -2147483647 || v > 2147483647) {
      throw ConfigError("config key '" + key + "' out of range");
    }
    return static_cast<int>(v);
  }
  bool flag(const std::string& key) const { return get<bool>(key); }
  const std::string& text(const std::string& key) const { return get<std::string>(key); }
  const std::vector<double>& numbers(const std::string& key) const {
    return get<std::vector<double>>(key);
  }
  const std::vector<std::string>& words(const std::string& key) const {
    return get<std::vector<std::string>>(key);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : entries_) {
      std::visit([&j, &k](const auto& x) { j[k] = x; }, v);
    }
    return j;
  }

 private:
  static ConfigValue from_toml(const toml::node& node, const std::string& key) {
    if (auto b = node.as_boolean()) return b->get();
    if (auto i = node.as_integer()) return i->get();
    if (auto f = node.as_floating_point()) return f->get();
    if (auto s = node.as_string()) return s->get();
    if (auto a = node.as_array()) {
      if (a->empty()) return std::vector<std::string>{};
      if (a->is_homogeneous(toml::node_type::string)) {
        std::vector<std::string> out;
        for (const auto& e : *a) out.push_back(e.as_string()->get());
        return out;
      }
      std::vector<double> out;
      for (const auto& e : *a) {
        if (auto i = e.as_integer()) {
          out.push_back(static_cast<double>(i->get()));
        } else if (auto f = e.as_floating_point()) {
          out.push_back(f->get());
        } else {
          throw ConfigError("config key '" + key + "': arrays must hold numbers or strings");
        }
      }
      return out;
    }
    throw ConfigError("config key '" + key + "': unsupported value type");
  }

  void apply_table(const toml::table& t, const std::string& prefix, std::string& scenario) {
    for (const auto& [k, v] : t) {
      const std::string key = prefix.empty() ? std::string(k.str())
                                             : prefix + "." + std::string(k.str());
      if (prefix.empty() && key == "scenario") {
        auto s = v.as_string();
        if (!s) throw ConfigError("'scenario' must be a string");
        scenario = s->get();
        continue;
      }
      if (auto sub = v.as_table()) {
        apply_table(*sub, key, scenario);
      } else {
        set(key, from_toml(v, key));
      }
    }
  }

  std::vector<std::pair<std::string, ConfigValue>> entries_;
  std::map<std::string, std::size_t> index_;
};

inline toml::table load_toml_file(const std::string& path) {
  try {
    return toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config file '" << path << "': " << e.description();
    if (e.source().begin.line > 0) msg << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
}

// Splits "key=value".
inline std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto pos = s.find('=');
  if (pos == std::string::npos || pos == 0) {
    throw ConfigError("override '" + s + "' is not of the form key=value");
  }
  return {s.substr(0, pos), s.substr(pos + 1)};
}

}  // namespace geobridge

#endif  // GEOBRIDGE_CONFIG_HPP_
