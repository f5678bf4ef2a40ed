// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "avsr/kv_config.hpp"
#include "avsr/layers.hpp"

namespace avsr {

// `dense` is a plain FC stack used for cost-model checks; the other four are
// the recognition families.
enum class Modality { dense, acoustic, visual, audiovisual, audiovisual_attention };

std::string modality_name(Modality m);
Modality parse_modality(const std::string& name);
inline bool is_fused(Modality m) {
  return m == Modality::audiovisual || m == Modality::audiovisual_attention;
}

/// One step of a visual front-end. Text form: `conv:C:K:S:P` or `pool:K:S`.
struct StackOp {
  enum class Kind { conv, pool };
  Kind kind = Kind::conv;
  std::size_t channels = 0;  // conv output channels
  std::size_t kernel = 3;    // conv kernel or pool window
  std::size_t stride = 1;
  std::size_t padding = 0;

  bool operator==(const StackOp&) const = default;
};

/// Semicolon-separated StackOp list.
std::vector<StackOp> parse_conv_stack(const std::string& text);
std::string format_conv_stack(const std::vector<StackOp>& ops);

/// conv3x3(16)-pool2-conv3x3(32)-pool2-conv3x3(64)-pool2, same padding.
std::vector<StackOp> default_conv_stack();

/// Architecture description, stored as `key = value` text. Audio-visual
/// configs carry their sub-networks under `acoustic.` and `visual.` keys.
struct ModelConfig {
  Modality modality = Modality::acoustic;
  std::size_t layers = 2;     // N_L
  std::size_t hidden = 256;   // N_h
  std::size_t input_dim = 39;
  std::size_t class_count = 39;
  std::vector<std::size_t> head;  // relu FC widths before the class layer

  std::size_t image_size = 120;
  std::vector<StackOp> conv_stack = default_conv_stack();
  bool use_fc_bottleneck = true;
  std::size_t bottleneck_width = 39;

  std::vector<std::size_t> attention = {512, 512, 512};
  std::shared_ptr<const ModelConfig> acoustic;
  std::shared_ptr<const ModelConfig> visual;

  std::vector<std::size_t> widths;  // dense only

  static ModelConfig from_kv(const KvConfig& kv);
  static ModelConfig parse(const std::string& text, const std::string& name = "<config>");
  static ModelConfig load(const std::filesystem::path& path);

  /// Canonical text holding exactly the keys that matter for the modality.
  std::string to_text() const;
  /// Throws ParameterError / DimensionError on an unusable architecture.
  void validate() const;

  /// Width of the visual front-end output for one image.
  std::size_t conv_feature_count() const;
  /// Output width of the whole graph.
  std::size_t output_size() const;

  bool operator==(const ModelConfig& o) const { return to_text() == o.to_text(); }
};

/// Fused config over two sub-configs with the default 3x512 head.
ModelConfig make_fused_config(const ModelConfig& acoustic, const ModelConfig& visual, bool attention);

struct DenseNet {
  std::vector<FcLayer> layers;
};

struct AcousticNet {
  std::vector<BiLstmLayer> lstm;
  std::vector<FcLayer> head;
  FcLayer out;
};

using StackLayer = std::variant<ConvLayer, PoolLayer>;

struct VisualNet {
  std::vector<StackLayer> stack;
  std::optional<FcLayer> bottleneck;
  std::vector<BiLstmLayer> lstm;
  std::vector<FcLayer> head;
  FcLayer out;
};

struct FusionNet {
  AcousticNet acoustic;
  VisualNet visual;
  std::optional<AttentionBlock> attention;
  std::vector<FcLayer> head;
  FcLayer out;
};

struct ModelGraph {
  ModelConfig config;
  std::variant<DenseNet, AcousticNet, VisualNet, FusionNet> net;

  void collect(const std::string& prefix, ParamList& out);
  ParamList params();
  std::size_t param_count() const;
};

ModelGraph build_model(const ModelConfig& config, Rng& rng);
ModelGraph build_acoustic(const ModelConfig& config, Rng& rng);
ModelGraph build_visual(const ModelConfig& config, Rng& rng);
/// Sub-networks are copied from the given graphs; fusion layers are fresh.
/// When every head layer has at least two units per class-aligned stream
/// logit, the head starts out emitting the gated sum of those logits, so a
/// pretrained fused model begins where its sub-networks left off.
ModelGraph build_audiovisual(const ModelConfig& config, const ModelGraph& acoustic, const ModelGraph& visual,
                             Rng& rng);
/// Loads both sub-networks from checkpoints; a missing file raises
/// MissingPrerequisiteError, a config differing from the sub-config raises
/// ConfigMismatchError.
ModelGraph build_audiovisual(const ModelConfig& config, const std::filesystem::path& acoustic_ckpt,
                             const std::filesystem::path& visual_ckpt, Rng& rng);

/// One utterance as seen by the networks.
struct Example {
  Tensor audio;                            // L x input_dim feature frames
  Tensor images;                           // M x S x S greyscale in [0, 1], one per interval
  std::vector<std::size_t> audio_mid;      // audio frame at each interval midpoint
  std::vector<std::size_t> frame_labels;   // class per audio frame
  std::vector<std::size_t> labels;         // class per interval
};

struct GraphOutput {
  Tensor logits;   // rows x classes, pre-softmax
  Tensor weights;  // M x 2 stream weights; empty unless fused with attention
};

/// Rows are audio frames for acoustic and dense graphs, intervals otherwise.
GraphOutput forward(const ModelGraph& graph, const Example& ex, const ForcedWeights& forced = {});
/// Same computation, counting multiply-accumulates separately for the audio
/// path (acoustic net, or a dense graph) and the per-image path (visual net,
/// attention block and fusion head).
GraphOutput forward_counted(const ModelGraph& graph, const Example& ex, CountingMac& audio,
                            CountingMac& image, const ForcedWeights& forced = {});

/// Applies the fusion head (hidden relu layers and class layer) to an
/// already fused M x (Ka + Kv) feature matrix.
Tensor fusion_head_logits(const FusionNet& net, const Tensor& fused);

/// Class probabilities, one row per output row.
Tensor probabilities(const GraphOutput& out);

/// Top class at every interval midpoint (every frame for dense graphs).
std::vector<std::size_t> predict(const ModelGraph& graph, const Example& ex, const ForcedWeights& forced = {});
/// Gold classes aligned with predict().
const std::vector<std::size_t>& decode_targets(const ModelGraph& graph, const Example& ex);

struct LossResult {
  double loss = 0.0;         // training objective (cross-entropy)
  std::size_t correct = 0;   // decoded hits at interval midpoints
  std::size_t count = 0;
  Tensor weights;            // stream weights when present
};

/// Acoustic and dense graphs are trained on every frame; visual and fused
/// graphs on interval midpoints.
LossResult evaluate_loss(const ModelGraph& graph, const Example& ex, const ForcedWeights& forced = {});
/// Accumulates gradients into `grad`, which must share the graph's shapes.
LossResult loss_and_gradients(const ModelGraph& graph, const Example& ex, ModelGraph& grad);

// Checkpoint: "AVSRCKPT" | u32 version | str config | str metadata JSON |
// u32 tensor count | per tensor (str name | u32 rank | u64 dims | f64 data) |
// u64 FNV-1a of everything before it. Little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelGraph graph;
  std::string metadata = "{}";
};

void save_checkpoint(const std::filesystem::path& path, const ModelGraph& graph,
                     const std::string& metadata = "{}");
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also rejects a stored config different from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace avsr
