#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace s2h {

// Line-oriented `key = value` text, the format shared by scene specs, run
// configurations and (with brace-delimited lists) ENVI headers. Keys are
// case-sensitive, surrounding whitespace is trimmed, `#` starts a comment.
// Values wrapped in `{ ... }` may span several lines.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  void set(const std::string& key, std::string value);
  void erase(const std::string& key) { values_.erase(key); }

  // Keys are emitted in sorted order so serialization is deterministic.
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');
std::vector<double> parse_double_list(std::string_view s);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);
bool parse_bool(std::string_view s);
std::string format_double(double v);

}  // namespace s2h
