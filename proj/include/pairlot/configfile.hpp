#pragma once

#include <map>
#include <string>
#include <vector>

namespace pairlot {

// Minimal hierarchical key-value config: [section] headers, key = value
// lines, '#' comments. Keys are addressed as "section.key"; an unsectioned
// key keeps its bare name. CLI overrides use the same dotted addressing.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);   // throws on IO/parse errors
  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  long get_long(const std::string& key, long fallback) const;
  unsigned long long get_u64(const std::string& key, unsigned long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma separated

  // "section.key=value" override; throws if the key is not a known key
  // (known = already present or listed in allowed_keys).
  void apply_override(const std::string& assignment, const std::vector<std::string>& allowed_keys);

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pairlot
