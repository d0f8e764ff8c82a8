#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace stance {

// Flat key-value run configuration. File format: one `key = value` per line,
// `#` starts a comment, blank lines ignored. Flag overrides are applied by
// the caller via set(), which always wins over file contents.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // Serialized `key = value` lines in sorted key order.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace stance
