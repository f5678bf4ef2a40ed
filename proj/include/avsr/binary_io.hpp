// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avsr {

/// 64-bit FNV-1a; used for asset checksums and cache keys (not cryptographic).
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view s);
  template <class T>
  void update_value(const T& v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    update(std::span<const std::uint8_t>(buf, sizeof(T)));
  }
  std::uint64_t digest() const noexcept { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);

/// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::string_view s);
  void raw(std::span<const std::uint8_t> s);
  void str(std::string_view s);  // u32 length + bytes

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; throws CorruptFileError on overrun.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, std::string name);
  static ByteReader from_file(const std::filesystem::path& path);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string raw(std::size_t n);
  std::string str();
  std::span<const std::uint8_t> bytes(std::size_t n);

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> consumed() const noexcept {
    return std::span<const std::uint8_t>(bytes_).first(pos_);
  }
  const std::string& name() const noexcept { return name_; }

 private:
  void need(std::size_t n) const;

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string name_;
};

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace avsr
