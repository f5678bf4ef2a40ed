// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <sstream>

#include "avsr/error.hpp"
#include "avsr/models.hpp"

namespace avsr {

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::dense: return "dense";
    case Modality::acoustic: return "acoustic";
    case Modality::visual: return "visual";
    case Modality::audiovisual: return "audiovisual";
    case Modality::audiovisual_attention: return "audiovisual_attention";
  }
  return "acoustic";
}

Modality parse_modality(const std::string& name) {
  for (Modality m : {Modality::dense, Modality::acoustic, Modality::visual, Modality::audiovisual,
                     Modality::audiovisual_attention}) {
    if (modality_name(m) == name) return m;
  }
  throw ParameterError("unknown modality '" + name + "'");
}

namespace {

std::size_t parse_count(const std::string& token, const std::string& what) {
  std::size_t used = 0;
  long long v = -1;
  try {
    v = std::stoll(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || v < 0) throw ParameterError(what + ": expected a count, got '" + token + "'");
  return static_cast<std::size_t>(v);
}

std::string join_counts(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

}  // namespace

std::vector<StackOp> parse_conv_stack(const std::string& text) {
  std::vector<StackOp> ops;
  for (const auto& raw : split(text, ';')) {
    const std::string tok = trim(raw);
    if (tok.empty()) continue;
    const auto parts = split(tok, ':');
    StackOp op;
    if (parts[0] == "conv" && parts.size() == 5) {
      op.kind = StackOp::Kind::conv;
      op.channels = parse_count(parts[1], tok);
      op.kernel = parse_count(parts[2], tok);
      op.stride = parse_count(parts[3], tok);
      op.padding = parse_count(parts[4], tok);
    } else if (parts[0] == "pool" && parts.size() == 3) {
      op.kind = StackOp::Kind::pool;
      op.kernel = parse_count(parts[1], tok);
      op.stride = parse_count(parts[2], tok);
    } else {
      throw ParameterError("bad stack element '" + tok + "' (want conv:C:K:S:P or pool:K:S)");
    }
    ops.push_back(op);
  }
  return ops;
}

std::string format_conv_stack(const std::vector<StackOp>& ops) {
  std::string out;
  for (const auto& op : ops) {
    if (!out.empty()) out += ";";
    if (op.kind == StackOp::Kind::conv) {
      out += "conv:" + std::to_string(op.channels) + ":" + std::to_string(op.kernel) + ":" +
             std::to_string(op.stride) + ":" + std::to_string(op.padding);
    } else {
      out += "pool:" + std::to_string(op.kernel) + ":" + std::to_string(op.stride);
    }
  }
  return out;
}

std::vector<StackOp> default_conv_stack() {
  return parse_conv_stack("conv:16:3:1:1;pool:2:2;conv:32:3:1:1;pool:2:2;conv:64:3:1:1;pool:2:2");
}

namespace {

const std::set<std::string>& allowed_keys(Modality m) {
  static const std::set<std::string> dense{"modality", "input_dim", "widths"};
  static const std::set<std::string> acoustic{"modality", "layers", "hidden", "input_dim", "classes", "head"};
  static const std::set<std::string> visual{"modality",   "layers",     "hidden",     "classes",
                                            "head",       "image_size", "conv_stack", "bottleneck",
                                            "bottleneck_width"};
  static const std::set<std::string> fused{"modality", "head", "attention"};
  switch (m) {
    case Modality::dense: return dense;
    case Modality::acoustic: return acoustic;
    case Modality::visual: return visual;
    default: return fused;
  }
}

std::vector<std::size_t> get_counts(const KvConfig& kv, const std::string& key,
                                    const std::vector<std::size_t>& fallback) {
  if (!kv.has(key)) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : kv.get_list(key)) out.push_back(parse_count(item, key));
  return out;
}

std::size_t get_count(const KvConfig& kv, const std::string& key, std::size_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 0) {
    const auto& e = kv.entries().at(key);
    throw ConfigParseError(e.file, e.line, "'" + key + "' must be non-negative");
  }
  return static_cast<std::size_t>(v);
}

void emit(const ModelConfig& c, const std::string& prefix, KvConfig& kv) {
  kv.set(prefix + "modality", modality_name(c.modality));
  switch (c.modality) {
    case Modality::dense:
      kv.set(prefix + "input_dim", std::to_string(c.input_dim));
      kv.set(prefix + "widths", join_counts(c.widths));
      return;
    case Modality::acoustic:
      kv.set(prefix + "input_dim", std::to_string(c.input_dim));
      break;
    case Modality::visual:
      kv.set(prefix + "image_size", std::to_string(c.image_size));
      kv.set(prefix + "conv_stack", format_conv_stack(c.conv_stack));
      kv.set(prefix + "bottleneck", c.use_fc_bottleneck ? "true" : "false");
      if (c.use_fc_bottleneck) kv.set(prefix + "bottleneck_width", std::to_string(c.bottleneck_width));
      break;
    default:
      kv.set(prefix + "head", join_counts(c.head));
      if (c.modality == Modality::audiovisual_attention) kv.set(prefix + "attention", join_counts(c.attention));
      if (c.acoustic) emit(*c.acoustic, prefix + "acoustic.", kv);
      if (c.visual) emit(*c.visual, prefix + "visual.", kv);
      return;
  }
  kv.set(prefix + "layers", std::to_string(c.layers));
  kv.set(prefix + "hidden", std::to_string(c.hidden));
  kv.set(prefix + "classes", std::to_string(c.class_count));
  kv.set(prefix + "head", join_counts(c.head));
}

}  // namespace

ModelConfig ModelConfig::from_kv(const KvConfig& kv) {
  ModelConfig c;
  const std::string mod = kv.get_string("modality", "acoustic");
  try {
    c.modality = parse_modality(mod);
  } catch (const ParameterError& e) {
    const auto& entry = kv.entries().at("modality");
    throw ConfigParseError(entry.file, entry.line, e.what());
  }
  const auto& allowed = allowed_keys(c.modality);
  for (const auto& [key, entry] : kv.entries()) {
    const bool sub = is_fused(c.modality) && (key.rfind("acoustic.", 0) == 0 || key.rfind("visual.", 0) == 0);
    if (!sub && !allowed.count(key)) {
      throw ConfigParseError(entry.file, entry.line,
                             "unknown key '" + key + "' for modality " + modality_name(c.modality));
    }
  }
  try {
    c.layers = get_count(kv, "layers", c.layers);
    c.hidden = get_count(kv, "hidden", c.hidden);
    c.input_dim = get_count(kv, "input_dim", c.input_dim);
    c.class_count = get_count(kv, "classes", c.class_count);
    c.image_size = get_count(kv, "image_size", c.image_size);
    c.bottleneck_width = get_count(kv, "bottleneck_width", c.bottleneck_width);
    c.use_fc_bottleneck = kv.get_bool("bottleneck", c.use_fc_bottleneck);
    if (kv.has("conv_stack")) c.conv_stack = parse_conv_stack(kv.get_string("conv_stack"));
    c.widths = get_counts(kv, "widths", {});
    c.attention = get_counts(kv, "attention", c.attention);
    c.head = get_counts(kv, "head", is_fused(c.modality) ? std::vector<std::size_t>{512, 512, 512}
                                                         : std::vector<std::size_t>{});
  } catch (const ParameterError& e) {
    throw ConfigParseError("<config>", 0, e.what());
  }
  if (is_fused(c.modality)) {
    const KvConfig a = kv.subtree("acoustic"), v = kv.subtree("visual");
    if (a.entries().empty() || v.entries().empty()) {
      throw ConfigParseError("<config>", 0, "audio-visual configs need acoustic.* and visual.* sub-configs");
    }
    c.acoustic = std::make_shared<const ModelConfig>(from_kv(a));
    c.visual = std::make_shared<const ModelConfig>(from_kv(v));
    c.class_count = c.acoustic->class_count;
  }
  if (c.modality == Modality::dense) c.class_count = c.output_size();
  c.validate();
  return c;
}

ModelConfig ModelConfig::parse(const std::string& text, const std::string& name) {
  return from_kv(KvConfig::parse(text, name));
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) { return from_kv(KvConfig::load(path)); }

std::string ModelConfig::to_text() const {
  KvConfig kv;
  emit(*this, "", kv);
  return kv.to_text();
}

std::size_t ModelConfig::conv_feature_count() const {
  std::size_t channels = 1, size = image_size;
  for (const auto& op : conv_stack) {
    if (op.kind == StackOp::Kind::conv) {
      if (op.channels == 0) throw ParameterError("conv layer with zero channels");
      size = conv_output_extent(size, op.kernel, op.stride, op.padding);
      channels = op.channels;
    } else {
      size = conv_output_extent(size, op.kernel, op.stride, 0);
    }
  }
  return channels * size * size;
}

std::size_t ModelConfig::output_size() const {
  if (modality == Modality::dense) return widths.empty() ? input_dim : widths.back();
  return class_count;
}

void ModelConfig::validate() const {
  for (std::size_t w : head)
    if (w == 0) throw ParameterError("head widths must be positive");
  switch (modality) {
    case Modality::dense:
      if (input_dim == 0) throw ParameterError("input_dim must be positive");
      for (std::size_t w : widths)
        if (w == 0) throw ParameterError("dense widths must be positive");
      return;
    case Modality::acoustic:
    case Modality::visual:
      if (layers < 1) throw ParameterError("N_L must be >= 1");
      if (hidden < 1) throw ParameterError("N_h must be >= 1");
      if (class_count < 2) throw ParameterError("class_count must be >= 2");
      if (modality == Modality::acoustic && input_dim == 0) throw ParameterError("input_dim must be positive");
      if (modality == Modality::visual) {
        if (image_size == 0) throw ParameterError("image_size must be positive");
        conv_feature_count();
        if (use_fc_bottleneck && bottleneck_width == 0) throw ParameterError("bottleneck width must be positive");
      }
      return;
    default:
      if (!acoustic || !visual) throw ParameterError("audio-visual config lacks a sub-config");
      if (acoustic->modality != Modality::acoustic) throw ParameterError("acoustic sub-config has wrong modality");
      if (visual->modality != Modality::visual) throw ParameterError("visual sub-config has wrong modality");
      acoustic->validate();
      visual->validate();
      if (class_count != acoustic->class_count) throw ParameterError("fused classes must match acoustic classes");
      for (std::size_t w : attention)
        if (w == 0) throw ParameterError("attention widths must be positive");
      return;
  }
}

ModelConfig make_fused_config(const ModelConfig& acoustic, const ModelConfig& visual, bool attention) {
  ModelConfig c;
  c.modality = attention ? Modality::audiovisual_attention : Modality::audiovisual;
  c.head = {512, 512, 512};
  c.acoustic = std::make_shared<const ModelConfig>(acoustic);
  c.visual = std::make_shared<const ModelConfig>(visual);
  c.class_count = acoustic.class_count;
  c.validate();
  return c;
}

}  // namespace avsr
