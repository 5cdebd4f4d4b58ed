#include "threer/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace threer {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_string(text.str(), path);
}

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (kv.values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    kv.values_[key] = value;
    kv.lines_[key] = lineno;
    kv.order_.push_back(key);
  }
  return kv;
}

std::vector<std::string> KeyValueFile::keys() const {
  return order_;
}

void KeyValueFile::bad_value(const std::string& key, const std::string& what) const {
  const auto it = lines_.find(key);
  const std::string where =
      origin_.empty() ? key : origin_ + ":" + std::to_string(it == lines_.end() ? 0 : it->second);
  throw ConfigError(where + ": invalid value for '" + key + "' (" + what + ")");
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) bad_value(key, "not a number");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, "not a number");
  }
}

std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) bad_value(key, "not an integer");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, "not an integer");
  }
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) bad_value(key, "not an unsigned integer");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, "not an unsigned integer");
  }
}

std::vector<double> KeyValueFile::get_list(const std::string& key,
                                           const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, "empty list element");
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) bad_value(key, "not a number: " + item);
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      bad_value(key, "not a number: " + item);
    }
  }
  return out;
}

std::vector<int> KeyValueFile::get_int_list(const std::string& key,
                                            const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<int> out;
  for (double v : get_list(key, {})) out.push_back(static_cast<int>(v));
  return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) order_.push_back(key);
  values_[key] = value;
}

void KeyValueFile::set_double(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  set(key, buf);
}

void KeyValueFile::set_list(const std::string& key, const std::vector<double>& values) {
  std::string s;
  char buf[64];
  for (size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    if (i) s += ",";
    s += buf;
  }
  set(key, s);
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& key : order_) {
    out += key + " = " + values_.at(key) + "\n";
  }
  return out;
}

void KeyValueFile::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path);
  out << to_string();
}

}  // namespace threer
