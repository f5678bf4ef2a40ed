// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "avsr/binary_io.hpp"
#include "avsr/corpus.hpp"
#include "avsr/error.hpp"

namespace avsr {

Tensor ImageSequence::frames(const std::vector<std::size_t>& indices) const {
  Tensor out({indices.size(), height, width});
  const std::size_t n = width * height;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= frame_count()) {
      throw DimensionError("frame " + std::to_string(indices[k]) + " of a " + std::to_string(frame_count()) +
                           "-frame sequence");
    }
    const std::uint8_t* src = pixels.data() + indices[k] * n;
    for (std::size_t i = 0; i < n; ++i) out[k * n + i] = src[i] / 255.0;
  }
  return out;
}

std::vector<std::uint8_t> encode_avic(const ImageSequence& seq) {
  if (seq.width == 0 || seq.height == 0 || seq.pixels.size() % (seq.width * seq.height) != 0) {
    throw DimensionError("image sequence pixel count is not a whole number of frames");
  }
  ByteWriter w;
  w.raw(std::string_view("AVIC"));
  w.u32(kImageContainerVersion);
  w.u32(static_cast<std::uint32_t>(seq.width));
  w.u32(static_cast<std::uint32_t>(seq.height));
  w.f64(seq.fps);
  w.u32(static_cast<std::uint32_t>(seq.frame_count()));
  w.raw(std::span<const std::uint8_t>(seq.pixels));
  return w.bytes();
}

ImageSequence decode_avic(std::span<const std::uint8_t> bytes, const std::string& name) {
  ByteReader r(std::vector<std::uint8_t>(bytes.begin(), bytes.end()), name);
  if (r.remaining() < 4 || r.raw(4) != "AVIC") throw CorruptFileError(name + ": not an image container");
  const std::uint32_t version = r.u32();
  if (version != kImageContainerVersion) {
    throw UnsupportedVersionError(name + ": image container version " + std::to_string(version));
  }
  ImageSequence seq;
  seq.width = r.u32();
  seq.height = r.u32();
  seq.fps = r.f64();
  const std::size_t frames = r.u32();
  if (seq.width == 0 || seq.height == 0 || !(seq.fps > 0.0) || !std::isfinite(seq.fps)) {
    throw CorruptFileError(name + ": bad image container header");
  }
  const std::size_t n = frames * seq.width * seq.height;
  if (r.remaining() != n) {
    throw CorruptFileError(name + ": expected " + std::to_string(n) + " pixel bytes, found " +
                           std::to_string(r.remaining()));
  }
  const auto px = r.bytes(n);
  seq.pixels.assign(px.begin(), px.end());
  return seq;
}

void write_avic(const std::filesystem::path& path, const ImageSequence& seq) {
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(encode_avic(seq)));
  w.write_file(path);
}

ImageSequence read_avic(const std::filesystem::path& path) {
  return decode_avic(read_binary_file(path), path.string());
}

}  // namespace avsr
