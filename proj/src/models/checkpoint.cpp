// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "avsr/binary_io.hpp"
#include "avsr/error.hpp"
#include "avsr/models.hpp"

namespace avsr {

namespace {

constexpr std::string_view kMagic = "AVSRCKPT";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelGraph& graph, const std::string& metadata) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.str(graph.config.to_text());
  w.str(metadata);
  const ParamList params = const_cast<ModelGraph&>(graph).params();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor->rank()));
    for (std::size_t d : p.tensor->shape()) w.u64(d);
    for (double v : p.tensor->data()) w.f64(v);
  }
  Fnv1a h;
  h.update(std::span<const std::uint8_t>(w.bytes()));
  w.u64(h.digest());
  w.write_file(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingPrerequisiteError("checkpoint " + path.string());
  ByteReader r = ByteReader::from_file(path);
  if (r.remaining() < kMagic.size() || r.raw(kMagic.size()) != kMagic) {
    throw CorruptFileError(path.string() + ": not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw UnsupportedVersionError(path.string() + ": checkpoint version " + std::to_string(version) +
                                  ", this build reads " + std::to_string(kCheckpointVersion));
  }
  const std::string config_text = r.str();
  Checkpoint ck;
  ck.metadata = r.str();
  ModelConfig config;
  try {
    config = ModelConfig::parse(config_text, path.string() + "#config");
  } catch (const ConfigParseError& e) {
    throw CorruptFileError(std::string("embedded config: ") + e.what());
  }
  Rng scratch(0);
  ck.graph = build_model(config, scratch);
  ParamList params = ck.graph.params();
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw CorruptFileError(path.string() + ": " + std::to_string(count) + " tensors, config implies " +
                           std::to_string(params.size()));
  }
  for (auto& p : params) {
    const std::string name = r.str();
    if (name != p.name) throw CorruptFileError(path.string() + ": expected tensor " + p.name + ", found " + name);
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != p.tensor->shape()) {
      throw CorruptFileError(path.string() + ": tensor " + name + " has shape " + shape_string(shape));
    }
    for (double& v : p.tensor->data()) v = r.f64();
  }
  Fnv1a h;
  h.update(r.consumed());
  const std::uint64_t stored = r.u64();
  if (stored != h.digest()) throw CorruptFileError(path.string() + ": checksum mismatch");
  if (r.remaining() != 0) throw CorruptFileError(path.string() + ": trailing bytes");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.graph.config == expected)) {
    throw ConfigMismatchError(path.string() + " holds\n" + ck.graph.config.to_text() + "but expected\n" +
                              expected.to_text());
  }
  return ck;
}

}  // namespace avsr
