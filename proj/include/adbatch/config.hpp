#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adbatch {

// Flat key-value sections in plain text:
//   [section]
//   key = value        # comment
class Config {
 public:
  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_long(const std::string& section, const std::string& key, long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // "section.key=value", or "key=value" when the key is unique in the schema.
  void apply_override(const std::string& spec,
                      const std::map<std::string, std::vector<std::string>>& schema);

  // Every present key must be declared in the schema.
  void validate_keys(const std::map<std::string, std::vector<std::string>>& schema) const;

  std::string serialize() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace adbatch
