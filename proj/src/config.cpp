#include "ubsr/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ubsr/errors.hpp"

namespace ubsr {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// strips a trailing comment that is not inside quotes
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

struct Parser {
  const std::string& origin;
  int line;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::Parse, origin + ":" + std::to_string(line) + ": " + msg);
  }

  ConfigValue scalar(const std::string& raw) const {
    const std::string s = trim(raw);
    if (s.empty()) fail("missing value");
    if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') fail("unterminated string");
      return {s.substr(1, s.size() - 2), line};
    }
    if (s == "true") return {true, line};
    if (s == "false") return {false, line};
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (b != e && *b == '+') ++b;
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e || !std::isfinite(v)) fail("cannot parse value '" + s + "'");
    return {v, line};
  }

  ConfigValue value(const std::string& raw) const {
    const std::string s = trim(raw);
    if (!s.empty() && s.front() == '[') {
      if (s.back() != ']') fail("unterminated array");
      std::vector<ConfigValue> items;
      const std::string body = trim(s.substr(1, s.size() - 2));
      if (!body.empty()) {
        std::string cur;
        bool quoted = false;
        for (char c : body) {
          if (c == '"') quoted = !quoted;
          if (c == ',' && !quoted) {
            items.push_back(scalar(cur));
            cur.clear();
          } else {
            cur.push_back(c);
          }
        }
        if (!trim(cur).empty()) items.push_back(scalar(cur));
      }
      return {items, line};
    }
    return scalar(s);
  }
};

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  cfg.data_[section];
  Parser p{origin, 0};
  while (std::getline(in, raw)) {
    ++p.line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') p.fail("bad section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) p.fail("bad section name '" + section + "'");
      if (cfg.data_.count(section) && section != "") p.fail("duplicate section [" + section + "]");
      cfg.data_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) p.fail("expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) p.fail("bad key '" + key + "'");
    auto& sec = cfg.data_[section];
    if (sec.count(key)) p.fail("duplicate key '" + key + "'");
    sec[key] = p.value(s.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const ConfigValue* Config::find(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s == data_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

void Config::type_error(const std::string& section, const std::string& key, const char* want) const {
  const auto* v = find(section, key);
  throw Error(ErrorCode::Parse, origin_ + ":" + std::to_string(v ? v->line : 0) + ": " +
                                    (section.empty() ? "" : section + ".") + key + " must be " + want);
}

std::optional<double> Config::number(const std::string& section, const std::string& key) const {
  const auto* v = find(section, key);
  if (!v) return std::nullopt;
  if (const auto* d = std::get_if<double>(&v->v)) return *d;
  type_error(section, key, "a number");
}

std::optional<std::string> Config::string(const std::string& section, const std::string& key) const {
  const auto* v = find(section, key);
  if (!v) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&v->v)) return *s;
  type_error(section, key, "a string");
}

std::optional<bool> Config::boolean(const std::string& section, const std::string& key) const {
  const auto* v = find(section, key);
  if (!v) return std::nullopt;
  if (const auto* b = std::get_if<bool>(&v->v)) return *b;
  type_error(section, key, "true or false");
}

std::optional<std::vector<double>> Config::numbers(const std::string& section, const std::string& key) const {
  const auto* v = find(section, key);
  if (!v) return std::nullopt;
  if (const auto* d = std::get_if<double>(&v->v)) return std::vector<double>{*d};
  const auto* a = std::get_if<std::vector<ConfigValue>>(&v->v);
  if (!a) type_error(section, key, "a number array");
  std::vector<double> out;
  for (const auto& item : *a) {
    const auto* d = std::get_if<double>(&item.v);
    if (!d) type_error(section, key, "a number array");
    out.push_back(*d);
  }
  return out;
}

std::optional<std::vector<std::string>> Config::strings(const std::string& section, const std::string& key) const {
  const auto* v = find(section, key);
  if (!v) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&v->v)) return std::vector<std::string>{*s};
  const auto* a = std::get_if<std::vector<ConfigValue>>(&v->v);
  if (!a) type_error(section, key, "a string array");
  std::vector<std::string> out;
  for (const auto& item : *a) {
    const auto* s = std::get_if<std::string>(&item.v);
    if (!s) type_error(section, key, "a string array");
    out.push_back(*s);
  }
  return out;
}

void Config::reject_unknown(const std::map<std::string, std::set<std::string>>& allowed) const {
  for (const auto& [sec, keys] : data_) {
    const auto a = allowed.find(sec);
    if (a == allowed.end()) {
      if (keys.empty() && sec.empty()) continue;
      throw Error(ErrorCode::Parse, origin_ + ": unknown section [" + sec + "]");
    }
    for (const auto& [k, v] : keys) {
      if (!a->second.count(k)) {
        throw Error(ErrorCode::Parse, origin_ + ":" + std::to_string(v.line) + ": unknown key '" +
                                          (sec.empty() ? "" : sec + ".") + k + "'");
      }
    }
  }
}

}  // namespace ubsr
