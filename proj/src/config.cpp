#include "adbatch/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adbatch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    if (section.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": key outside any [section]");
    }
    cfg.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool Config::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::optional<std::string> Config::get(const std::string& section,
                                       const std::string& key) const {
  const auto it = sections_.find(section);
  if (it == sections_.end()) return std::nullopt;
  const auto kv = it->second.find(key);
  if (kv == it->second.end()) return std::nullopt;
  return kv->second;
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + section + "." + key + " is not a number: " + *v);
  }
}

long Config::get_long(const std::string& section, const std::string& key,
                      long fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    return std::stol(*v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + section + "." + key + " is not an integer: " + *v);
  }
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw std::invalid_argument("config: " + section + "." + key + " is not a boolean: " + *v);
}

std::vector<double> Config::get_list(const std::string& section,
                                     const std::string& key) const {
  std::vector<double> out;
  const auto v = get(section, key);
  if (!v) return out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  sections_[section][key] = value;
}

void Config::apply_override(const std::string& spec,
                            const std::map<std::string, std::vector<std::string>>& schema) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must look like key=value or section.key=value: " +
                                spec);
  }
  std::string key = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    set(key.substr(0, dot), key.substr(dot + 1), value);
    return;
  }
  // Bare key: resolve through the schema; must be unambiguous.
  std::vector<std::string> hits;
  for (const auto& [section, keys] : schema) {
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) hits.push_back(section);
  }
  if (hits.empty()) {
    throw std::invalid_argument("unknown override key: " + key);
  }
  if (hits.size() > 1) {
    std::string msg = "ambiguous override key '" + key + "'; qualify as one of:";
    for (const auto& s : hits) msg += " " + s + "." + key;
    throw std::invalid_argument(msg);
  }
  set(hits.front(), key, value);
}

void Config::validate_keys(
    const std::map<std::string, std::vector<std::string>>& schema) const {
  for (const auto& [section, kv] : sections_) {
    const auto it = schema.find(section);
    if (it == schema.end()) {
      throw std::invalid_argument("unknown config section: [" + section + "]");
    }
    for (const auto& [key, value] : kv) {
      (void)value;
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw std::invalid_argument("unknown config key: " + section + "." + key);
      }
    }
  }
}

std::string Config::serialize() const {
  std::ostringstream out;
  for (const auto& [section, kv] : sections_) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
    out << "\n";
  }
  return out.str();
}

}  // namespace adbatch
