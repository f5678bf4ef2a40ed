// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace avsr {

/// Broad failure class; the CLI maps each category to an exit code.
enum class ErrorCategory { usage, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Tensor shapes disagree.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorCategory::usage, "dimension error: " + what) {}
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ErrorCategory::usage, "parameter error: " + what) {}
};

/// NaN/Inf produced or consumed.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCategory::numeric, "numeric error: " + what) {}
};

/// Malformed, corrupt, missing or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorCategory::data, what) {}
};

class InputTooShortError : public DataError {
 public:
  explicit InputTooShortError(const std::string& what)
      : DataError("input too short: " + what) {}
};

class DegenerateInputError : public DataError {
 public:
  explicit DegenerateInputError(const std::string& what)
      : DataError("degenerate input: " + what) {}
};

class CorruptFileError : public DataError {
 public:
  explicit CorruptFileError(const std::string& what)
      : DataError("corrupt file: " + what) {}
};

class UnsupportedVersionError : public DataError {
 public:
  explicit UnsupportedVersionError(const std::string& what)
      : DataError("unsupported version: " + what) {}
};

class ConfigMismatchError : public DataError {
 public:
  explicit ConfigMismatchError(const std::string& what)
      : DataError("config mismatch: " + what) {}
};

class MissingPrerequisiteError : public DataError {
 public:
  explicit MissingPrerequisiteError(const std::string& what)
      : DataError("missing prerequisite: " + what) {}
};

/// Malformed config text; carries the file and line where parsing failed.
class ConfigParseError : public Error {
 public:
  ConfigParseError(const std::string& file, int line, const std::string& what)
      : Error(ErrorCategory::usage,
              file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::string file_;
  int line_;
};

}  // namespace avsr
