// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avsr/numerics.hpp"
#include "avsr/rng.hpp"
#include "avsr/tensor.hpp"

namespace avsr {

enum class Activation { identity, relu, softmax };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Non-owning view of a named parameter tensor.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};
using ParamList = std::vector<NamedTensor>;

// ---------------------------------------------------------------------------
// Fully connected: y = act(W x + b) for every row of a batch.

struct FcLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Activation activation = Activation::identity;

  /// Weights uniform(-1/sqrt(in), 1/sqrt(in)), biases zero.
  static FcLayer create(std::size_t in, std::size_t out, Activation act, Rng& rng);

  std::size_t in_size() const { return weight.dim(1); }
  std::size_t out_size() const { return weight.dim(0); }
  void collect(const std::string& prefix, ParamList& out);
};

struct FcCache {
  Tensor input;
  Tensor output;
};

Tensor fc_forward(const FcLayer& layer, const Tensor& x, FcCache* cache = nullptr);
Tensor fc_forward(const FcLayer& layer, const Tensor& x, FcCache* cache, PlainMac& mac);
Tensor fc_forward(const FcLayer& layer, const Tensor& x, FcCache* cache, CountingMac& mac);
/// Accumulates parameter gradients into `grad` and returns dL/dx.
Tensor fc_backward(const FcLayer& layer, const FcCache& cache, const Tensor& d_out, FcLayer& grad);

// ---------------------------------------------------------------------------
// Softmax and cross-entropy.

Tensor softmax_rows(const Tensor& logits);

struct XentResult {
  double loss = 0.0;  // mean over rows of -log softmax(logits)[label]
  Tensor d_logits;    // (softmax - onehot) / rows
};

XentResult softmax_xent(const Tensor& logits, std::span<const std::size_t> labels);

// ---------------------------------------------------------------------------
// LSTM without peepholes. Stacked gate rows are ordered input, forget,
// candidate, output; each block is hidden x (input + hidden) acting on [x_t; h_{t-1}].

struct LstmLayer {
  Tensor weight;  // 4H x (in + H)
  Tensor bias;    // 4H

  /// Weights uniform(-s, s), s = 1/sqrt(in + H); forget-gate bias 1, others 0.
  static LstmLayer create(std::size_t in, std::size_t hidden, Rng& rng);

  std::size_t hidden_size() const { return weight.dim(0) / 4; }
  std::size_t input_size() const { return weight.dim(1) - hidden_size(); }
  void collect(const std::string& prefix, ParamList& out);
};

struct LstmCache {
  Tensor xs;       // L x in
  Tensor h0, c0;   // H
  Tensor gates;    // L x 4H, post-activation
  Tensor cells;    // L x H
  Tensor hiddens;  // L x H
};

struct LstmStateGrad {
  Tensor h0, c0;
};

/// h0/c0 default to zeros. Returns L x H hidden states.
Tensor lstm_forward(const LstmLayer& layer, const Tensor& xs, const Tensor* h0 = nullptr,
                    const Tensor* c0 = nullptr, LstmCache* cache = nullptr);
Tensor lstm_forward(const LstmLayer& layer, const Tensor& xs, const Tensor* h0, const Tensor* c0,
                    LstmCache* cache, PlainMac& mac);
Tensor lstm_forward(const LstmLayer& layer, const Tensor& xs, const Tensor* h0, const Tensor* c0,
                    LstmCache* cache, CountingMac& mac);
/// Full backpropagation through time. Returns dL/dxs.
Tensor lstm_backward(const LstmLayer& layer, const LstmCache& cache, const Tensor& d_hs, LstmLayer& grad,
                     LstmStateGrad* d_init = nullptr);

// ---------------------------------------------------------------------------
// Bidirectional LSTM; out_t = h_fwd_t + h_bwd_t, the backward sublayer
// running over the reversed sequence.

struct BiLstmLayer {
  LstmLayer forward;
  LstmLayer backward;

  static BiLstmLayer create(std::size_t in, std::size_t hidden, Rng& rng);

  std::size_t hidden_size() const { return forward.hidden_size(); }
  std::size_t input_size() const { return forward.input_size(); }
  void collect(const std::string& prefix, ParamList& out);
};

struct BiLstmCache {
  LstmCache fwd;
  LstmCache bwd;
};

Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache = nullptr);
Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache, PlainMac& mac);
Tensor bilstm_forward(const BiLstmLayer& layer, const Tensor& xs, BiLstmCache* cache, CountingMac& mac);
Tensor bilstm_backward(const BiLstmLayer& layer, const BiLstmCache& cache, const Tensor& d_out,
                       BiLstmLayer& grad);

Tensor reverse_rows(const Tensor& t);

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation) and max pooling on C x H x W images.

/// floor((in + 2 pad - k) / stride) + 1; throws DimensionError when < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

struct ConvLayer {
  Tensor kernels;  // outC x inC x kH x kW
  Tensor bias;     // outC
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::relu;

  static ConvLayer create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding, Activation act, Rng& rng);

  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t kernel_h() const { return kernels.dim(2); }
  std::size_t kernel_w() const { return kernels.dim(3); }
  void collect(const std::string& prefix, ParamList& out);
};

struct ConvCache {
  Tensor padded;  // C x (H + 2p) x (W + 2p)
  Tensor output;  // post-activation
  Shape input_shape;
};

Tensor conv_forward(const ConvLayer& layer, const Tensor& image, ConvCache* cache = nullptr);
Tensor conv_forward(const ConvLayer& layer, const Tensor& image, ConvCache* cache, PlainMac& mac);
Tensor conv_forward(const ConvLayer& layer, const Tensor& image, ConvCache* cache, CountingMac& mac);
Tensor conv_backward(const ConvLayer& layer, const ConvCache& cache, const Tensor& d_out, ConvLayer& grad);

struct PoolLayer {
  std::size_t window = 2;
  std::size_t stride = 2;
};

struct PoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Max pooling; ties route to the first maximum in row-major window order.
Tensor pool_forward(const PoolLayer& layer, const Tensor& image, PoolCache* cache = nullptr);
Tensor pool_backward(const PoolLayer& layer, const PoolCache& cache, const Tensor& d_out);

// ---------------------------------------------------------------------------
// Attention fusion. An MLP over concat(a, v) yields two logits whose softmax
// (w_a, w_v) scales each stream before concatenation:
//   fused = concat(w_a * a, w_v * v).

struct AttentionBlock {
  std::vector<FcLayer> hidden;  // relu layers
  FcLayer output;               // -> 2 logits

  static AttentionBlock create(std::size_t input, const std::vector<std::size_t>& widths, Rng& rng);

  std::size_t input_size() const {
    return hidden.empty() ? output.in_size() : hidden.front().in_size();
  }
  void collect(const std::string& prefix, ParamList& out);
};

struct AttentionCache {
  Tensor a, v;
  std::vector<FcCache> hidden;
  FcCache output;
  Tensor weights;  // M x 2
  bool forced = false;
};

struct FusionResult {
  Tensor fused;    // M x (da + dv)
  Tensor weights;  // M x 2: (w_a, w_v) per row
};

/// Fixed stream weights bypassing the attention network.
using ForcedWeights = std::optional<std::array<double, 2>>;

FusionResult attention_fuse(const AttentionBlock& block, const Tensor& a, const Tensor& v,
                            AttentionCache* cache = nullptr, const ForcedWeights& forced = {});
FusionResult attention_fuse(const AttentionBlock& block, const Tensor& a, const Tensor& v,
                            AttentionCache* cache, const ForcedWeights& forced, PlainMac& mac);
FusionResult attention_fuse(const AttentionBlock& block, const Tensor& a, const Tensor& v,
                            AttentionCache* cache, const ForcedWeights& forced, CountingMac& mac);

struct FusionGrad {
  Tensor d_a;
  Tensor d_v;
};

FusionGrad attention_backward(const AttentionBlock& block, const AttentionCache& cache,
                              const Tensor& d_fused, AttentionBlock& grad);

/// Row-wise concatenation [a | b].
Tensor concat_columns(const Tensor& a, const Tensor& b);

/// Copy of `layer` with every parameter tensor zeroed (gradient accumulator).
template <class Layer>
Layer zeroed_copy(const Layer& layer) {
  Layer out = layer;
  ParamList params;
  out.collect("", params);
  for (auto& p : params) p.tensor->fill(0.0);
  return out;
}

}  // namespace avsr
