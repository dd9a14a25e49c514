#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal INI-style configuration: [section] headers, key = value pairs,
// full-line # comments, whitespace-insensitive. Parse errors carry the line
// number; typed getters carry the section.key they failed on.

namespace cassi {
namespace config {

/// Malformed file or override, or a lookup/conversion failure.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline config_error at_line(const std::string& origin, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << what;
  return config_error(os.str());
}

}  // namespace detail

class ConfigFile {
 public:
  ConfigFile() = default;

  /// Parse INI-style text. `origin` names the source in error messages.
  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<config>") {
    ConfigFile cf;
    std::istringstream in(text);
    std::string raw, section;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = detail::trim(raw);
      if (line.empty() || line[0] == '#') continue;
      if (line[0] == '[') {
        if (line.back() != ']')
          throw detail::at_line(origin, lineno, "section header is missing the closing ']'");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw detail::at_line(origin, lineno, "section name is empty");
        continue;
      }
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw detail::at_line(origin, lineno, "expected 'key = value' or a [section] header");
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) throw detail::at_line(origin, lineno, "key name is empty");
      if (section.empty())
        throw detail::at_line(origin, lineno, "key '" + key + "' appears before any [section]");
      cf.values_[section + "." + key] = value;
    }
    return cf;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  /// Apply one command-line override of the form section.key=value.
  void apply_override(const std::string& spec) {
    std::size_t eq = spec.find('=');
    if (eq == std::string::npos)
      throw config_error("override '" + spec + "' must look like section.key=value");
    std::string path = detail::trim(spec.substr(0, eq));
    std::string value = detail::trim(spec.substr(eq + 1));
    std::size_t dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
      throw config_error("override '" + spec + "' must look like section.key=value");
    values_[path] = value;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    values_[section + "." + key] = value;
  }

  bool has(const std::string& section, const std::string& key) const {
    return values_.count(section + "." + key) != 0;
  }

  bool has_section(const std::string& section) const {
    std::string prefix = section + ".";
    auto it = values_.lower_bound(prefix);
    return it != values_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

  // ------------------------------------------------------------------
  // Typed getters. The no-default forms throw config_error when absent.
  // ------------------------------------------------------------------

  std::string get_string(const std::string& section, const std::string& key) const {
    auto it = values_.find(section + "." + key);
    if (it == values_.end())
      throw config_error("missing required key " + section + "." + key);
    return it->second;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    auto it = values_.find(section + "." + key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return to_double(get_string(section, key), section, key);
  }
  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  std::size_t get_size(const std::string& section, const std::string& key) const {
    return to_size(get_string(section, key), section, key);
  }
  std::size_t get_size(const std::string& section, const std::string& key,
                       std::size_t fallback) const {
    return has(section, key) ? get_size(section, key) : fallback;
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key) const {
    return static_cast<std::uint64_t>(to_size(get_string(section, key), section, key));
  }
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    return has(section, key) ? get_u64(section, key) : fallback;
  }

  bool get_bool(const std::string& section, const std::string& key) const {
    std::string v = get_string(section, key);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw config_error(section + "." + key + ": expected a boolean, got '" + v + "'");
  }
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    return has(section, key) ? get_bool(section, key) : fallback;
  }

  /// Comma- or whitespace-separated list of doubles; empty when absent.
  std::vector<double> get_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    if (!has(section, key)) return out;
    std::string v = get_string(section, key);
    for (char& ch : v)
      if (ch == ',') ch = ' ';
    std::istringstream in(v);
    std::string tok;
    while (in >> tok) out.push_back(to_double(tok, section, key));
    return out;
  }

 private:
  double to_double(const std::string& v, const std::string& section, const std::string& key) const {
    try {
      std::size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing characters");
      return d;
    } catch (const std::exception&) {
      throw config_error(section + "." + key + ": expected a number, got '" + v + "'");
    }
  }

  std::size_t to_size(const std::string& v, const std::string& section,
                      const std::string& key) const {
    try {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      std::size_t pos = 0;
      unsigned long long u = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing characters");
      return static_cast<std::size_t>(u);
    } catch (const std::exception&) {
      throw config_error(section + "." + key + ": expected a nonnegative integer, got '" + v + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace config
}  // namespace cassi
