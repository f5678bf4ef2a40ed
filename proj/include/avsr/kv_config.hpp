// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avsr {

/// Plain-text `key = value` configuration. Lines starting with '#' are
/// comments; `include = path` splices another file (relative to the
/// including file) at that point. Later assignments override earlier ones.
class KvConfig {
 public:
  struct Entry {
    std::string value;
    std::string file;
    int line = 0;
  };

  static KvConfig parse(const std::string& text, const std::string& source_name = "<text>",
                        const std::filesystem::path& base_dir = {});
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list, whitespace trimmed, empty items dropped.
  std::vector<std::string> get_list(const std::string& key) const;

  /// Entries whose key starts with `prefix.`, with the prefix stripped.
  KvConfig subtree(const std::string& prefix) const;

  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  /// Canonical fully-resolved text: sorted `key = value` lines.
  std::string to_text() const;

 private:
  void parse_into(const std::string& text, const std::string& source_name,
                  const std::filesystem::path& base_dir, int depth);
  const Entry& require(const std::string& key) const;

  std::map<std::string, Entry> entries_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace avsr
