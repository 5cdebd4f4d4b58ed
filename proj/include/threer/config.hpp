#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "threer/errors.hpp"

namespace threer {

// Line-oriented `key = value` files with '#' comments. Parse errors carry
// file and line number. Lists are comma-separated.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::vector<std::string> keys() const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_list(const std::string& key, const std::vector<double>& values);
  void write_file(const std::string& path) const;
  std::string to_string() const;

 private:
  [[noreturn]] void bad_value(const std::string& key, const std::string& what) const;

  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string origin_;
  std::vector<std::string> order_;
};

}  // namespace threer
