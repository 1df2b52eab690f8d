#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace patlm {

// Flat key/value configuration with one optional section per stage:
//
//   seed = 1            # global keys come before the first section
//   [mine]
//   f = 300
//
// Lookups check the stage section first, then the global keys.
class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<string>");
  static Config load(const std::string& path);

  // "section.key=value", or "key=value" for a global key.
  void apply_override(std::string_view assignment);
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::optional<std::string> find(const std::string& section, const std::string& key) const;
  bool has(const std::string& section, const std::string& key) const { return find(section, key).has_value(); }

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& section, const std::string& key) const;

  // Deterministic "section.key=value" lines, sorted; used for hashing.
  std::string canonical() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;  // "" holds global keys
};

}  // namespace patlm
