#include "patlm/config.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>

#include "patlm/error.hpp"

namespace patlm {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config config;
  std::string section;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || !valid_name(trim(line.substr(1, line.size() - 2)))) {
        throw ConfigError("config_syntax", where + ": bad section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("config_syntax", where + ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      if (!valid_name(key)) throw ConfigError("config_syntax", where + ": bad key");
      auto& slot = config.sections_[section];
      if (slot.count(std::string(key))) throw ConfigError("config_syntax", where + ": duplicate key");
      slot[std::string(key)] = std::string(trim(line.substr(eq + 1)));
    }
    if (end == text.size()) break;
  }
  return config;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("bad_override", "expected section.key=value");
  const auto lhs = trim(assignment.substr(0, eq));
  const auto dot = lhs.find('.');
  const auto section = dot == std::string_view::npos ? std::string_view{} : lhs.substr(0, dot);
  const auto key = dot == std::string_view::npos ? lhs : lhs.substr(dot + 1);
  if (!valid_name(key) || (dot != std::string_view::npos && !valid_name(section))) {
    throw ConfigError("bad_override", "bad key in '" + std::string(assignment) + "'");
  }
  set(std::string(section), std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::optional<std::string> Config::find(const std::string& section, const std::string& key) const {
  for (const auto* name : {&section, static_cast<const std::string*>(nullptr)}) {
    const auto it = sections_.find(name ? *name : std::string());
    if (it == sections_.end()) continue;
    const auto kv = it->second.find(key);
    if (kv != it->second.end()) return kv->second;
  }
  return std::nullopt;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  auto v = find(section, key);
  if (!v) throw ConfigError("missing_key", "config lacks " + (section.empty() ? key : section + "." + key));
  return *v;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  return find(section, key).value_or(fallback);
}

namespace {

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad_value", what + " = '" + text + "' is not a number");
  return value;
}

}  // namespace

std::int64_t Config::get_int(const std::string& section, const std::string& key) const {
  return parse_number<std::int64_t>(get_string(section, key), section + "." + key);
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const auto text = get_string(section, key);
  if (text == "inf") return std::numeric_limits<double>::infinity();
  return parse_number<double>(text, section + "." + key);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = find(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("bad_value", section + "." + key + " = '" + *v + "' is not a boolean");
}

std::vector<int> Config::get_int_list(const std::string& section, const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(get_string(section, key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = std::string(trim(item));
    if (!t.empty()) out.push_back(parse_number<int>(t, section + "." + key));
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [section, kv] : sections_) {
    for (const auto& [k, v] : kv) out += (section.empty() ? k : section + "." + k) + "=" + v + "\n";
  }
  return out;
}

}  // namespace patlm
