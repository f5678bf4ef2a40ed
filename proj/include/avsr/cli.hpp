// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "avsr/error.hpp"

namespace avsr {

// Exit codes of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

int exit_code_for(ErrorCategory category);

/// Default evaluation SNR list of eval-noise.
inline constexpr const char* kDefaultSnrList = "clean,20,10,5,0,-5";
/// Noise schedule used by `train --modality audiovisual_attention` when the
/// config names none.
inline constexpr const char* kDefaultNoiseSchedule = "clean:3,20:3,10:3,0:10";

inline constexpr int kRunRecordVersion = 1;
inline constexpr int kNoiseCsvVersion = 1;

/// What a command did, written next to its outputs as JSON. The resolved
/// config text plus the inputs and seed are enough to rerun it.
struct RunRecord {
  std::string run_id;  // hash of command, config, inputs and seed
  std::string command;
  std::string config;  // fully resolved `key = value` text
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, double> metrics;

  /// Derives run_id from the other fields except outputs and metrics.
  void assign_id();
  std::string to_json() const;
  static RunRecord from_json(const std::string& text, const std::string& name);
  static RunRecord load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Runs one command. `args` excludes the program name. Errors are reported
/// on `err` and mapped to the exit codes above.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avsr
