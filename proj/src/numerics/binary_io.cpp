// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "avsr/binary_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "avsr/error.hpp"

namespace avsr {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

void Fnv1a::update(std::span<const std::uint8_t> bytes) {
  for (std::uint8_t b : bytes) {
    h_ ^= b;
    h_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::update(std::string_view s) {
  update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string Fnv1a::hex() const { return to_hex(h_); }

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

namespace {

template <class T>
void append_pod(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) { append_pod(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { append_pod(bytes_, v); }
void ByteWriter::f32(float v) { append_pod(bytes_, v); }
void ByteWriter::f64(double v) { append_pod(bytes_, v); }

void ByteWriter::raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

void ByteWriter::raw(std::span<const std::uint8_t> s) {
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s);
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling temp file and rename so readers never see a partial file.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes_.data()),
              static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw DataError("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ByteReader::ByteReader(std::vector<std::uint8_t> bytes, std::string name)
    : bytes_(std::move(bytes)), name_(std::move(name)) {}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  return ByteReader(read_binary_file(path), path.string());
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    throw CorruptFileError(name_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                           std::to_string(pos_) + ", " + std::to_string(remaining()) + " left)");
  }
}

namespace {

template <class T>
T read_pod(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  return read_pod<std::uint32_t>(bytes_, pos_);
}

std::uint64_t ByteReader::u64() {
  need(8);
  return read_pod<std::uint64_t>(bytes_, pos_);
}

float ByteReader::f32() {
  need(4);
  return read_pod<float>(bytes_, pos_);
}

double ByteReader::f64() {
  need(8);
  return read_pod<double>(bytes_, pos_);
}

std::string ByteReader::raw(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::string ByteReader::str() { return raw(u32()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto s = std::span<const std::uint8_t>(bytes_).subspan(pos_, n);
  pos_ += n;
  return s;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  ByteWriter w;
  w.raw(text);
  w.write_file(path);
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  ByteWriter w;
  w.raw(bytes);
  w.write_file(path);
}

}  // namespace avsr
