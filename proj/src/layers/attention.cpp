// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "avsr/error.hpp"
#include "avsr/layers.hpp"

namespace avsr {

AttentionBlock AttentionBlock::create(std::size_t input, const std::vector<std::size_t>& widths, Rng& rng) {
  if (input == 0) throw ParameterError("attention input width must be positive");
  AttentionBlock block;
  std::size_t prev = input;
  for (std::size_t w : widths) {
    block.hidden.push_back(FcLayer::create(prev, w, Activation::relu, rng));
    prev = w;
  }
  block.output = FcLayer::create(prev, 2, Activation::identity, rng);
  return block;
}

void AttentionBlock::collect(const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i].collect(prefix + "h" + std::to_string(i) + ".", out);
  output.collect(prefix + "out.", out);
}

namespace {

template <class Mac>
FusionResult fuse_impl(const AttentionBlock& block, const Tensor& a, const Tensor& v, AttentionCache* cache,
                       const ForcedWeights& forced, Mac& m) {
  if (a.rank() != 2 || v.rank() != 2 || a.dim(0) != v.dim(0)) {
    throw DimensionError("attention_fuse: streams " + shape_string(a.shape()) + " and " +
                         shape_string(v.shape()));
  }
  const std::size_t rows = a.dim(0), da = a.dim(1), dv = v.dim(1);
  Tensor weights({rows, 2});
  if (forced) {
    const auto [wa, wv] = *forced;
    if (!(wa >= 0.0 && wv >= 0.0) || std::abs(wa + wv - 1.0) > 1e-9) {
      throw ParameterError("forced stream weights must be non-negative and sum to 1");
    }
    for (std::size_t r = 0; r < rows; ++r) weights(r, 0) = wa, weights(r, 1) = wv;
  } else {
    if (block.input_size() != da + dv) {
      throw DimensionError("attention_fuse: block expects " + std::to_string(block.input_size()) +
                           " inputs, got " + std::to_string(da + dv));
    }
    Tensor h = concat_columns(a, v);
    if (cache) cache->hidden.resize(block.hidden.size());
    for (std::size_t i = 0; i < block.hidden.size(); ++i) {
      h = fc_forward(block.hidden[i], h, cache ? &cache->hidden[i] : nullptr, m);
    }
    weights = softmax_rows(fc_forward(block.output, h, cache ? &cache->output : nullptr, m));
  }
  // Gating is a scaling, not counted as multiply-accumulate work.
  FusionResult res{Tensor({rows, da + dv}), weights};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < da; ++j) res.fused(r, j) = weights(r, 0) * a(r, j);
    for (std::size_t j = 0; j < dv; ++j) res.fused(r, da + j) = weights(r, 1) * v(r, j);
  }
  if (cache) {
    cache->a = a;
    cache->v = v;
    cache->weights = weights;
    cache->forced = forced.has_value();
  }
  return res;
}

}  // namespace

FusionResult attention_fuse(const AttentionBlock& block, const Tensor& a, const Tensor& v, AttentionCache* cache,
                            const ForcedWeights& forced) {
  PlainMac m;
  return fuse_impl(block, a, v, cache, forced, m);
}
FusionResult attention_fuse(const AttentionBlock& block, const Tensor& a, const Tensor& v, AttentionCache* cache,
                            const ForcedWeights& forced, PlainMac& mac) {
  return fuse_impl(block, a, v, cache, forced, mac);
}
FusionResult attention_fuse(const AttentionBlock& block, const Tensor& a, const Tensor& v, AttentionCache* cache,
                            const ForcedWeights& forced, CountingMac& mac) {
  return fuse_impl(block, a, v, cache, forced, mac);
}

FusionGrad attention_backward(const AttentionBlock& block, const AttentionCache& cache, const Tensor& d_fused,
                              AttentionBlock& grad) {
  const std::size_t rows = cache.a.dim(0), da = cache.a.dim(1), dv = cache.v.dim(1);
  if (d_fused.rank() != 2 || d_fused.dim(0) != rows || d_fused.dim(1) != da + dv) {
    throw DimensionError("attention_backward: gradient " + shape_string(d_fused.shape()));
  }
  FusionGrad g{Tensor({rows, da}), Tensor({rows, dv})};
  Tensor d_w({rows, 2});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < da; ++j) {
      g.d_a(r, j) = cache.weights(r, 0) * d_fused(r, j);
      d_w(r, 0) += cache.a(r, j) * d_fused(r, j);
    }
    for (std::size_t j = 0; j < dv; ++j) {
      g.d_v(r, j) = cache.weights(r, 1) * d_fused(r, da + j);
      d_w(r, 1) += cache.v(r, j) * d_fused(r, da + j);
    }
  }
  if (cache.forced) return g;

  // Softmax Jacobian over the two logits.
  Tensor d_logits({rows, 2});
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = cache.weights(r, 0) * d_w(r, 0) + cache.weights(r, 1) * d_w(r, 1);
    d_logits(r, 0) = cache.weights(r, 0) * (d_w(r, 0) - s);
    d_logits(r, 1) = cache.weights(r, 1) * (d_w(r, 1) - s);
  }
  Tensor d = fc_backward(block.output, cache.output, d_logits, grad.output);
  for (std::size_t i = block.hidden.size(); i-- > 0;) {
    d = fc_backward(block.hidden[i], cache.hidden[i], d, grad.hidden[i]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < da; ++j) g.d_a(r, j) += d(r, j);
    for (std::size_t j = 0; j < dv; ++j) g.d_v(r, j) += d(r, da + j);
  }
  return g;
}

}  // namespace avsr
