// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>

#include "avsr/binary_io.hpp"
#include "avsr/error.hpp"
#include "avsr/signal.hpp"

namespace avsr {

AudioClip parse_wav(std::span<const std::uint8_t> bytes, const std::string& name) {
  ByteReader r(std::vector<std::uint8_t>(bytes.begin(), bytes.end()), name);
  if (r.raw(4) != "RIFF") throw CorruptFileError(name + ": not a RIFF file");
  r.u32();
  if (r.raw(4) != "WAVE") throw CorruptFileError(name + ": not a WAVE file");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (r.remaining() >= 8) {
    const std::string id = r.raw(4);
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      auto chunk = r.bytes(size);
      if (size < 16) throw CorruptFileError(name + ": short fmt chunk");
      std::uint16_t format;
      std::memcpy(&format, chunk.data(), 2);
      std::memcpy(&channels, chunk.data() + 2, 2);
      std::memcpy(&rate, chunk.data() + 4, 4);
      std::memcpy(&bits, chunk.data() + 14, 2);
      if (format != 1) throw DataError(name + ": only PCM WAV is supported");
      if (channels != 1) throw DataError(name + ": only mono WAV is supported");
      if (bits != 16) throw DataError(name + ": only 16-bit WAV is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw CorruptFileError(name + ": data chunk before fmt chunk");
      auto data = r.bytes(size);
      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        std::int16_t s;
        std::memcpy(&s, data.data() + 2 * i, 2);
        clip.samples[i] = static_cast<double>(s) / 32768.0;
      }
      if (clip.samples.empty()) throw DataError(name + ": empty data chunk");
      return clip;
    } else {
      r.bytes(size + (size & 1));
    }
  }
  throw CorruptFileError(name + ": no data chunk");
}

AudioClip read_wav(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  return parse_wav(bytes, path.string());
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  ByteWriter w;
  w.raw("RIFF");
  w.u32(36 + 2 * n);
  w.raw("WAVE");
  w.raw("fmt ");
  w.u32(16);
  w.u8(1), w.u8(0);  // PCM
  w.u8(1), w.u8(0);  // mono
  w.u32(rate);
  w.u32(rate * 2);
  w.u8(2), w.u8(0);   // block align
  w.u8(16), w.u8(0);  // bits per sample
  w.raw("data");
  w.u32(2 * n);
  for (double s : clip.samples) {
    const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    const auto v = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    w.u8(static_cast<std::uint8_t>(v & 0xFF));
    w.u8(static_cast<std::uint8_t>(v >> 8));
  }
  w.write_file(path);
}

void round_to_float(Tensor& t) {
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

void write_feature_cache(const std::filesystem::path& path, const FeatureSequence& seq) {
  ByteWriter w;
  w.raw("AVFC");
  w.u32(kFeatureCacheVersion);
  w.u32(static_cast<std::uint32_t>(seq.length()));
  w.u32(static_cast<std::uint32_t>(seq.frames.dim(1)));
  w.f64(seq.hop);
  for (double v : seq.frames.data()) w.f32(static_cast<float>(v));
  w.write_file(path);
}

FeatureSequence read_feature_cache(const std::filesystem::path& path) {
  auto r = ByteReader::from_file(path);
  if (r.raw(4) != "AVFC") throw CorruptFileError(path.string() + ": bad feature-cache magic");
  const auto version = r.u32();
  if (version != kFeatureCacheVersion) {
    throw CorruptFileError(path.string() + ": unsupported feature-cache version " +
                           std::to_string(version));
  }
  const std::size_t len = r.u32();
  const std::size_t dim = r.u32();
  FeatureSequence seq;
  seq.hop = r.f64();
  seq.frames = Tensor({len, dim});
  for (double& v : seq.frames.data()) v = r.f32();
  if (r.remaining() != 0) throw CorruptFileError(path.string() + ": trailing bytes");
  // Frame centres assume the default 25 ms window; the cache stores only the hop.
  const double half_window = MfccConfig{}.window_seconds / 2.0;
  seq.frame_times.resize(len);
  for (std::size_t t = 0; t < len; ++t) seq.frame_times[t] = static_cast<double>(t) * seq.hop + half_window;
  return seq;
}

}  // namespace avsr
