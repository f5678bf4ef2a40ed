// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "avsr/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "avsr/error.hpp"

namespace avsr {

namespace {

constexpr int kMaxIncludeDepth = 16;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

KvConfig KvConfig::parse(const std::string& text, const std::string& source_name,
                         const std::filesystem::path& base_dir) {
  KvConfig cfg;
  cfg.parse_into(text, source_name, base_dir, 0);
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  KvConfig cfg;
  cfg.parse_into(read_file(path), path.string(), path.parent_path(), 0);
  return cfg;
}

void KvConfig::parse_into(const std::string& text, const std::string& source_name,
                          const std::filesystem::path& base_dir, int depth) {
  if (depth > kMaxIncludeDepth) {
    throw ConfigParseError(source_name, 0, "include nesting too deep (cycle?)");
  }
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigParseError(source_name, line_no, "expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigParseError(source_name, line_no, "empty key");
    if (key == "include") {
      const std::filesystem::path inc = base_dir / value;
      std::string inc_text;
      try {
        inc_text = read_file(inc);
      } catch (const DataError&) {
        throw ConfigParseError(source_name, line_no, "cannot include '" + value + "'");
      }
      parse_into(inc_text, inc.string(), inc.parent_path(), depth + 1);
      continue;
    }
    entries_[key] = Entry{value, source_name, line_no};
  }
}

void KvConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = Entry{value, "<override>", 0};
}

const KvConfig::Entry& KvConfig::require(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigParseError("<config>", 0, "missing key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_string(const std::string& key) const { return require(key).value; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

long long KvConfig::get_int(const std::string& key) const {
  const Entry& e = require(key);
  long long v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigParseError(e.file, e.line, "'" + key + "' expects an integer, got '" + e.value + "'");
  }
  return v;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KvConfig::get_double(const std::string& key) const {
  const Entry& e = require(key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigParseError(e.file, e.line, "'" + key + "' expects a number, got '" + e.value + "'");
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Entry& e = require(key);
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigParseError(e.file, e.line, "'" + key + "' expects a boolean, got '" + e.value + "'");
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& item : split(get_string(key), ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

KvConfig KvConfig::subtree(const std::string& prefix) const {
  KvConfig out;
  const std::string p = prefix + ".";
  for (const auto& [key, entry] : entries_) {
    if (key.rfind(p, 0) == 0) out.entries_[key.substr(p.size())] = entry;
  }
  return out;
}

std::string KvConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [key, entry] : entries_) out << key << " = " << entry.value << '\n';
  return out.str();
}

}  // namespace avsr
