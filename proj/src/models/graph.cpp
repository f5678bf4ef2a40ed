// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "avsr/error.hpp"
#include "avsr/models.hpp"

namespace avsr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void collect_fcs(std::vector<FcLayer>& layers, const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + std::to_string(i) + ".", out);
}

void collect_lstms(std::vector<BiLstmLayer>& layers, const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + std::to_string(i) + ".", out);
}

void collect_net(AcousticNet& n, const std::string& p, ParamList& out) {
  collect_lstms(n.lstm, p + "lstm", out);
  collect_fcs(n.head, p + "head", out);
  n.out.collect(p + "out.", out);
}

void collect_net(VisualNet& n, const std::string& p, ParamList& out) {
  for (std::size_t i = 0; i < n.stack.size(); ++i)
    if (auto* c = std::get_if<ConvLayer>(&n.stack[i])) c->collect(p + "conv" + std::to_string(i) + ".", out);
  if (n.bottleneck) n.bottleneck->collect(p + "bottleneck.", out);
  collect_lstms(n.lstm, p + "lstm", out);
  collect_fcs(n.head, p + "head", out);
  n.out.collect(p + "out.", out);
}

std::vector<FcLayer> make_head(std::size_t in, const std::vector<std::size_t>& widths, Rng& rng) {
  std::vector<FcLayer> head;
  for (std::size_t w : widths) {
    head.push_back(FcLayer::create(in, w, Activation::relu, rng));
    in = w;
  }
  return head;
}

std::size_t head_out(std::size_t in, const std::vector<std::size_t>& widths) {
  return widths.empty() ? in : widths.back();
}

AcousticNet make_acoustic(const ModelConfig& c, Rng& rng) {
  AcousticNet n;
  for (std::size_t l = 0; l < c.layers; ++l) n.lstm.push_back(BiLstmLayer::create(l ? c.hidden : c.input_dim, c.hidden, rng));
  n.head = make_head(c.hidden, c.head, rng);
  n.out = FcLayer::create(head_out(c.hidden, c.head), c.class_count, Activation::identity, rng);
  return n;
}

VisualNet make_visual(const ModelConfig& c, Rng& rng) {
  VisualNet n;
  std::size_t channels = 1;
  for (const auto& op : c.conv_stack) {
    if (op.kind == StackOp::Kind::conv) {
      n.stack.emplace_back(
          ConvLayer::create(channels, op.channels, op.kernel, op.stride, op.padding, Activation::relu, rng));
      channels = op.channels;
    } else {
      n.stack.emplace_back(PoolLayer{op.kernel, op.stride});
    }
  }
  std::size_t width = c.conv_feature_count();
  if (c.use_fc_bottleneck) {
    n.bottleneck = FcLayer::create(width, c.bottleneck_width, Activation::softmax, rng);
    width = c.bottleneck_width;
  }
  for (std::size_t l = 0; l < c.layers; ++l) n.lstm.push_back(BiLstmLayer::create(l ? c.hidden : width, c.hidden, rng));
  n.head = make_head(c.hidden, c.head, rng);
  n.out = FcLayer::create(head_out(c.hidden, c.head), c.class_count, Activation::identity, rng);
  return n;
}

// Routes each class-aligned stream's logits through the head so the fused
// output starts as their (gated) sum. Hidden layers carry every routed logit
// as a relu pair (x, -x) in their leading units; the remaining units keep
// their random weights but start with zero weight into the class layer.
void init_logit_passthrough(FusionNet& n, const ModelConfig& c) {
  const std::size_t k = c.class_count;
  std::vector<std::size_t> offsets;
  if (c.acoustic->output_size() == k) offsets.push_back(0);
  if (c.visual->output_size() == k) offsets.push_back(c.acoustic->output_size());
  const std::size_t routed = offsets.size() * k;
  if (routed == 0) return;
  for (const auto& layer : n.head)
    if (layer.out_size() < 2 * routed) return;

  for (std::size_t l = 0; l < n.head.size(); ++l) {
    FcLayer& layer = n.head[l];
    for (std::size_t r = 0; r < 2 * routed; ++r) {
      for (std::size_t j = 0; j < layer.in_size(); ++j) layer.weight(r, j) = 0.0;
      layer.bias[r] = 0.0;
      if (l > 0) {
        layer.weight(r, r) = 1.0;
      } else {
        const std::size_t s = r / (2 * k), cls = (r / 2) % k;
        layer.weight(r, offsets[s] + cls) = r % 2 ? -1.0 : 1.0;
      }
    }
  }
  n.out.weight.fill(0.0);
  n.out.bias.fill(0.0);
  for (std::size_t s = 0; s < offsets.size(); ++s)
    for (std::size_t cls = 0; cls < k; ++cls) {
      if (n.head.empty()) {
        n.out.weight(cls, offsets[s] + cls) = 1.0;
      } else {
        const std::size_t r = 2 * (s * k + cls);
        n.out.weight(cls, r) = 1.0;
        n.out.weight(cls, r + 1) = -1.0;
      }
    }
}

void attach_fusion(FusionNet& n, const ModelConfig& c, Rng& rng) {
  const std::size_t in = c.acoustic->output_size() + c.visual->output_size();
  if (c.modality == Modality::audiovisual_attention) n.attention = AttentionBlock::create(in, c.attention, rng);
  n.head = make_head(in, c.head, rng);
  n.out = FcLayer::create(head_out(in, c.head), c.class_count, Activation::identity, rng);
  init_logit_passthrough(n, c);
}

}  // namespace

void ModelGraph::collect(const std::string& prefix, ParamList& out) {
  std::visit(overloaded{
                 [&](DenseNet& n) { collect_fcs(n.layers, prefix + "fc", out); },
                 [&](AcousticNet& n) { collect_net(n, prefix, out); },
                 [&](VisualNet& n) { collect_net(n, prefix, out); },
                 [&](FusionNet& n) {
                   collect_net(n.acoustic, prefix + "acoustic.", out);
                   collect_net(n.visual, prefix + "visual.", out);
                   if (n.attention) n.attention->collect(prefix + "attention.", out);
                   collect_fcs(n.head, prefix + "fusion.head", out);
                   n.out.collect(prefix + "fusion.out.", out);
                 },
             },
             net);
}

ParamList ModelGraph::params() {
  ParamList out;
  collect("", out);
  return out;
}

std::size_t ModelGraph::param_count() const {
  std::size_t n = 0;
  for (const auto& p : const_cast<ModelGraph*>(this)->params()) n += p.tensor->size();
  return n;
}

ModelGraph build_acoustic(const ModelConfig& config, Rng& rng) {
  if (config.modality != Modality::acoustic) throw ParameterError("build_acoustic needs an acoustic config");
  config.validate();
  return ModelGraph{config, make_acoustic(config, rng)};
}

ModelGraph build_visual(const ModelConfig& config, Rng& rng) {
  if (config.modality != Modality::visual) throw ParameterError("build_visual needs a visual config");
  config.validate();
  return ModelGraph{config, make_visual(config, rng)};
}

ModelGraph build_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  switch (config.modality) {
    case Modality::dense: {
      DenseNet n;
      std::size_t in = config.input_dim;
      for (std::size_t i = 0; i < config.widths.size(); ++i) {
        const bool last = i + 1 == config.widths.size();
        n.layers.push_back(
            FcLayer::create(in, config.widths[i], last ? Activation::identity : Activation::relu, rng));
        in = config.widths[i];
      }
      return ModelGraph{config, n};
    }
    case Modality::acoustic: return build_acoustic(config, rng);
    case Modality::visual: return build_visual(config, rng);
    default: {
      FusionNet n;
      n.acoustic = make_acoustic(*config.acoustic, rng);
      n.visual = make_visual(*config.visual, rng);
      attach_fusion(n, config, rng);
      return ModelGraph{config, n};
    }
  }
}

ModelGraph build_audiovisual(const ModelConfig& config, const ModelGraph& acoustic, const ModelGraph& visual,
                             Rng& rng) {
  if (!is_fused(config.modality)) throw ParameterError("build_audiovisual needs an audio-visual config");
  config.validate();
  if (!(acoustic.config == *config.acoustic)) {
    throw ConfigMismatchError("acoustic network does not match the acoustic sub-config");
  }
  if (!(visual.config == *config.visual)) {
    throw ConfigMismatchError("visual network does not match the visual sub-config");
  }
  FusionNet n;
  n.acoustic = std::get<AcousticNet>(acoustic.net);
  n.visual = std::get<VisualNet>(visual.net);
  attach_fusion(n, config, rng);
  return ModelGraph{config, n};
}

ModelGraph build_audiovisual(const ModelConfig& config, const std::filesystem::path& acoustic_ckpt,
                             const std::filesystem::path& visual_ckpt, Rng& rng) {
  if (!is_fused(config.modality)) throw ParameterError("build_audiovisual needs an audio-visual config");
  for (const auto& p : {acoustic_ckpt, visual_ckpt}) {
    if (!std::filesystem::exists(p)) throw MissingPrerequisiteError("pretrained checkpoint " + p.string());
  }
  const Checkpoint a = load_checkpoint(acoustic_ckpt, *config.acoustic);
  const Checkpoint v = load_checkpoint(visual_ckpt, *config.visual);
  return build_audiovisual(config, a.graph, v.graph, rng);
}

// ---------------------------------------------------------------------------
// Forward and backward passes.

namespace {

struct AcousticCache {
  std::vector<BiLstmCache> lstm;
  std::vector<FcCache> head;
  FcCache out;
};

using StackCache = std::variant<ConvCache, PoolCache>;

struct VisualCache {
  std::vector<std::vector<StackCache>> images;
  Shape feature_shape;
  std::optional<FcCache> bottleneck;
  std::vector<BiLstmCache> lstm;
  std::vector<FcCache> head;
  FcCache out;
};

struct GraphCache {
  std::vector<FcCache> dense;
  AcousticCache acoustic;
  VisualCache visual;
  AttentionCache attention;
  std::vector<FcCache> head;
  FcCache out;
};

template <class Mac>
Tensor run_head(const std::vector<FcLayer>& head, const FcLayer& out, Tensor x, std::vector<FcCache>* hc,
                FcCache* oc, Mac& m) {
  if (hc) hc->resize(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) x = fc_forward(head[i], x, hc ? &(*hc)[i] : nullptr, m);
  return fc_forward(out, x, oc, m);
}

Tensor back_head(const std::vector<FcLayer>& head, const FcLayer& out, const std::vector<FcCache>& hc,
                 const FcCache& oc, const Tensor& d_logits, std::vector<FcLayer>& gh, FcLayer& go) {
  Tensor d = fc_backward(out, oc, d_logits, go);
  for (std::size_t i = head.size(); i-- > 0;) d = fc_backward(head[i], hc[i], d, gh[i]);
  return d;
}

template <class Mac>
Tensor acoustic_forward(const AcousticNet& n, const Tensor& audio, AcousticCache* cache, Mac& m) {
  Tensor x = audio;
  if (cache) cache->lstm.resize(n.lstm.size());
  for (std::size_t l = 0; l < n.lstm.size(); ++l) x = bilstm_forward(n.lstm[l], x, cache ? &cache->lstm[l] : nullptr, m);
  return run_head(n.head, n.out, std::move(x), cache ? &cache->head : nullptr, cache ? &cache->out : nullptr, m);
}

void acoustic_backward(const AcousticNet& n, const AcousticCache& cache, const Tensor& d_logits, AcousticNet& g) {
  Tensor d = back_head(n.head, n.out, cache.head, cache.out, d_logits, g.head, g.out);
  for (std::size_t l = n.lstm.size(); l-- > 0;) d = bilstm_backward(n.lstm[l], cache.lstm[l], d, g.lstm[l]);
}

template <class Mac>
Tensor visual_forward(const VisualNet& n, const ModelConfig& cfg, const Tensor& images, VisualCache* cache,
                      Mac& m) {
  const std::size_t s = cfg.image_size;
  if (images.rank() != 3 || images.dim(1) != s || images.dim(2) != s) {
    throw DimensionError("visual input " + shape_string(images.shape()) + ", expected M x " + std::to_string(s) +
                         " x " + std::to_string(s));
  }
  const std::size_t frames = images.dim(0);
  if (frames == 0) throw DimensionError("visual input has no frames");
  const std::size_t width = cfg.conv_feature_count();
  Tensor features({frames, width});
  if (cache) cache->images.assign(frames, {});
  for (std::size_t f = 0; f < frames; ++f) {
    Tensor x({1, s, s}, std::vector<double>(images.row(f).begin(), images.row(f).end()));
    for (const auto& layer : n.stack) {
      if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
        ConvCache c;
        x = conv_forward(*conv, x, cache ? &c : nullptr, m);
        if (cache) cache->images[f].emplace_back(std::move(c));
      } else {
        PoolCache c;
        x = pool_forward(std::get<PoolLayer>(layer), x, cache ? &c : nullptr);
        if (cache) cache->images[f].emplace_back(std::move(c));
      }
    }
    if (cache) cache->feature_shape = x.shape();
    std::copy(x.data().begin(), x.data().end(), features.row(f).begin());
  }
  if (n.bottleneck) {
    if (cache) cache->bottleneck.emplace();
    features = fc_forward(*n.bottleneck, features, cache ? &*cache->bottleneck : nullptr, m);
  }
  if (cache) cache->lstm.resize(n.lstm.size());
  for (std::size_t l = 0; l < n.lstm.size(); ++l)
    features = bilstm_forward(n.lstm[l], features, cache ? &cache->lstm[l] : nullptr, m);
  return run_head(n.head, n.out, std::move(features), cache ? &cache->head : nullptr, cache ? &cache->out : nullptr,
                  m);
}

void visual_backward(const VisualNet& n, const VisualCache& cache, const Tensor& d_logits, VisualNet& g) {
  Tensor d = back_head(n.head, n.out, cache.head, cache.out, d_logits, g.head, g.out);
  for (std::size_t l = n.lstm.size(); l-- > 0;) d = bilstm_backward(n.lstm[l], cache.lstm[l], d, g.lstm[l]);
  if (n.bottleneck) d = fc_backward(*n.bottleneck, *cache.bottleneck, d, *g.bottleneck);
  for (std::size_t f = 0; f < cache.images.size(); ++f) {
    Tensor x(cache.feature_shape, std::vector<double>(d.row(f).begin(), d.row(f).end()));
    for (std::size_t i = n.stack.size(); i-- > 0;) {
      if (const auto* conv = std::get_if<ConvLayer>(&n.stack[i])) {
        x = conv_backward(*conv, std::get<ConvCache>(cache.images[f][i]), x, std::get<ConvLayer>(g.stack[i]));
      } else {
        x = pool_backward(std::get<PoolLayer>(n.stack[i]), std::get<PoolCache>(cache.images[f][i]), x);
      }
    }
  }
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size(), t.dim(1)});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.dim(0)) {
      throw DimensionError("midpoint frame " + std::to_string(rows[i]) + " outside " + std::to_string(t.dim(0)) +
                           " audio frames");
    }
    std::copy(t.row(rows[i]).begin(), t.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

void check_example(const ModelConfig& cfg, const Example& ex) {
  const bool needs_audio = cfg.modality != Modality::visual;
  if (needs_audio && (ex.audio.rank() != 2 || ex.audio.dim(0) == 0)) throw DimensionError("example has no audio frames");
  if (is_fused(cfg.modality) && ex.audio_mid.size() != ex.images.dim(0)) {
    throw DimensionError("example has " + std::to_string(ex.audio_mid.size()) + " midpoints but " +
                         std::to_string(ex.images.dim(0)) + " images");
  }
}

template <class Mac>
GraphOutput forward_impl(const ModelGraph& g, const Example& ex, GraphCache* cache, Mac& audio_mac, Mac& image_mac,
                         const ForcedWeights& forced) {
  check_example(g.config, ex);
  GraphOutput out;
  std::visit(overloaded{
                 [&](const DenseNet& n) {
                   Tensor x = ex.audio;
                   if (cache) cache->dense.resize(n.layers.size());
                   for (std::size_t i = 0; i < n.layers.size(); ++i)
                     x = fc_forward(n.layers[i], x, cache ? &cache->dense[i] : nullptr, audio_mac);
                   out.logits = std::move(x);
                 },
                 [&](const AcousticNet& n) {
                   out.logits = acoustic_forward(n, ex.audio, cache ? &cache->acoustic : nullptr, audio_mac);
                 },
                 [&](const VisualNet& n) {
                   out.logits = visual_forward(n, g.config, ex.images, cache ? &cache->visual : nullptr, image_mac);
                 },
                 [&](const FusionNet& n) {
                   const Tensor a_all =
                       acoustic_forward(n.acoustic, ex.audio, cache ? &cache->acoustic : nullptr, audio_mac);
                   const Tensor a = gather_rows(a_all, ex.audio_mid);
                   const Tensor v =
                       visual_forward(n.visual, *g.config.visual, ex.images, cache ? &cache->visual : nullptr, image_mac);
                   Tensor fused;
                   if (n.attention || forced) {
                     static const AttentionBlock kNone;
                     FusionResult r = attention_fuse(n.attention ? *n.attention : kNone, a, v,
                                                     cache ? &cache->attention : nullptr, forced, image_mac);
                     fused = std::move(r.fused);
                     if (n.attention) out.weights = std::move(r.weights);
                   } else {
                     fused = concat_columns(a, v);
                     if (cache) {
                       cache->attention.a = a;
                       cache->attention.v = v;
                     }
                   }
                   out.logits = run_head(n.head, n.out, std::move(fused), cache ? &cache->head : nullptr,
                                         cache ? &cache->out : nullptr, image_mac);
                 },
             },
             g.net);
  out.logits.require_finite("model output");
  return out;
}

void backward_impl(const ModelGraph& g, const Example& ex, const GraphCache& cache, const Tensor& d_logits,
                   ModelGraph& grad) {
  std::visit(overloaded{
                 [&](const DenseNet& n) {
                   auto& gn = std::get<DenseNet>(grad.net);
                   Tensor d = d_logits;
                   for (std::size_t i = n.layers.size(); i-- > 0;) d = fc_backward(n.layers[i], cache.dense[i], d, gn.layers[i]);
                 },
                 [&](const AcousticNet& n) {
                   acoustic_backward(n, cache.acoustic, d_logits, std::get<AcousticNet>(grad.net));
                 },
                 [&](const VisualNet& n) {
                   visual_backward(n, cache.visual, d_logits, std::get<VisualNet>(grad.net));
                 },
                 [&](const FusionNet& n) {
                   auto& gn = std::get<FusionNet>(grad.net);
                   const Tensor d_fused = back_head(n.head, n.out, cache.head, cache.out, d_logits, gn.head, gn.out);
                   const std::size_t ka = cache.attention.a.dim(1), kv = cache.attention.v.dim(1);
                   FusionGrad fg;
                   if (n.attention) {
                     fg = attention_backward(*n.attention, cache.attention, d_fused, *gn.attention);
                   } else {
                     fg.d_a = Tensor({d_fused.dim(0), ka});
                     fg.d_v = Tensor({d_fused.dim(0), kv});
                     for (std::size_t r = 0; r < d_fused.dim(0); ++r) {
                       for (std::size_t j = 0; j < ka; ++j) fg.d_a(r, j) = d_fused(r, j);
                       for (std::size_t j = 0; j < kv; ++j) fg.d_v(r, j) = d_fused(r, ka + j);
                     }
                   }
                   Tensor d_all({ex.audio.dim(0), ka});
                   for (std::size_t i = 0; i < ex.audio_mid.size(); ++i)
                     for (std::size_t j = 0; j < ka; ++j) d_all(ex.audio_mid[i], j) += fg.d_a(i, j);
                   acoustic_backward(n.acoustic, cache.acoustic, d_all, gn.acoustic);
                   visual_backward(n.visual, cache.visual, fg.d_v, gn.visual);
                 },
             },
             g.net);
}

bool frame_level(const ModelGraph& g) {
  return g.config.modality == Modality::acoustic || g.config.modality == Modality::dense;
}

const std::vector<std::size_t>& training_targets(const ModelGraph& g, const Example& ex) {
  return frame_level(g) ? ex.frame_labels : ex.labels;
}

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  const auto row = t.row(r);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<std::size_t> decode(const ModelGraph& g, const Example& ex, const Tensor& logits) {
  std::vector<std::size_t> out;
  if (g.config.modality == Modality::acoustic) {
    for (std::size_t f : ex.audio_mid) {
      if (f >= logits.dim(0)) throw DimensionError("midpoint frame outside the audio");
      out.push_back(argmax_row(logits, f));
    }
  } else {
    for (std::size_t r = 0; r < logits.dim(0); ++r) out.push_back(argmax_row(logits, r));
  }
  return out;
}

LossResult score(const ModelGraph& g, const Example& ex, const GraphOutput& out, XentResult* xent_out) {
  const auto& targets = training_targets(g, ex);
  XentResult x = softmax_xent(out.logits, targets);
  LossResult r;
  r.loss = x.loss;
  const auto preds = decode(g, ex, out.logits);
  const auto& gold = decode_targets(g, ex);
  if (preds.size() != gold.size()) throw DimensionError("predictions and gold labels differ in length");
  for (std::size_t i = 0; i < preds.size(); ++i) r.correct += preds[i] == gold[i];
  r.count = preds.size();
  r.weights = out.weights;
  if (xent_out) *xent_out = std::move(x);
  return r;
}

}  // namespace

GraphOutput forward(const ModelGraph& graph, const Example& ex, const ForcedWeights& forced) {
  PlainMac a, i;
  return forward_impl(graph, ex, nullptr, a, i, forced);
}

GraphOutput forward_counted(const ModelGraph& graph, const Example& ex, CountingMac& audio, CountingMac& image,
                            const ForcedWeights& forced) {
  return forward_impl(graph, ex, nullptr, audio, image, forced);
}

Tensor fusion_head_logits(const FusionNet& net, const Tensor& fused) {
  PlainMac m;
  return run_head(net.head, net.out, fused, nullptr, nullptr, m);
}

Tensor probabilities(const GraphOutput& out) { return softmax_rows(out.logits); }

std::vector<std::size_t> predict(const ModelGraph& graph, const Example& ex, const ForcedWeights& forced) {
  return decode(graph, ex, forward(graph, ex, forced).logits);
}

const std::vector<std::size_t>& decode_targets(const ModelGraph& graph, const Example& ex) {
  return graph.config.modality == Modality::dense ? ex.frame_labels : ex.labels;
}

LossResult evaluate_loss(const ModelGraph& graph, const Example& ex, const ForcedWeights& forced) {
  return score(graph, ex, forward(graph, ex, forced), nullptr);
}

LossResult loss_and_gradients(const ModelGraph& graph, const Example& ex, ModelGraph& grad) {
  GraphCache cache;
  PlainMac a, i;
  const GraphOutput out = forward_impl(graph, ex, &cache, a, i, {});
  XentResult x;
  LossResult r = score(graph, ex, out, &x);
  backward_impl(graph, ex, cache, x.d_logits, grad);
  return r;
}

}  // namespace avsr
