#pragma once

// Minimal TOML-like configuration: [section] headers, key = value lines,
// '#' comments. Values are numbers, "strings", true/false or flat [arrays].

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace ubsr {

struct ConfigValue {
  std::variant<double, std::string, bool, std::vector<ConfigValue>> v;
  int line = 0;
};

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "config");
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<double> number(const std::string& section, const std::string& key) const;
  std::optional<std::string> string(const std::string& section, const std::string& key) const;
  std::optional<bool> boolean(const std::string& section, const std::string& key) const;
  std::optional<std::vector<double>> numbers(const std::string& section, const std::string& key) const;
  std::optional<std::vector<std::string>> strings(const std::string& section, const std::string& key) const;

  // Throws Parse naming the first section or key outside the allowed sets.
  // allowed maps section name ("" for top level) to its keys.
  void reject_unknown(const std::map<std::string, std::set<std::string>>& allowed) const;

 private:
  const ConfigValue* find(const std::string& section, const std::string& key) const;
  [[noreturn]] void type_error(const std::string& section, const std::string& key, const char* want) const;
  std::map<std::string, std::map<std::string, ConfigValue>> data_;
  std::string origin_;
};

}  // namespace ubsr
