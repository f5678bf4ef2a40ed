// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "avsr/error.hpp"
#include "avsr/layers.hpp"

namespace avsr {

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || kernel == 0) throw DimensionError("kernel and stride must be positive");
  const std::size_t span = in + 2 * pad;
  if (span < kernel) {
    throw DimensionError("window " + std::to_string(kernel) + " larger than padded input " +
                         std::to_string(span));
  }
  return (span - kernel) / stride + 1;
}

ConvLayer ConvLayer::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride, std::size_t padding, Activation act, Rng& rng) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
    throw ParameterError("conv geometry must be positive");
  }
  if (act == Activation::softmax) throw ParameterError("conv layers support identity or relu");
  const double s = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  ConvLayer layer;
  layer.kernels = rng_uniform(rng, {out_channels, in_channels, kernel, kernel}, -s, s);
  layer.bias = Tensor({out_channels});
  layer.stride = stride;
  layer.padding = padding;
  layer.activation = act;
  return layer;
}

void ConvLayer::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + "kernels", &kernels});
  out.push_back({prefix + "bias", &bias});
}

namespace {

Tensor pad_image(const Tensor& image, std::size_t pad) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (pad == 0) return image;
  Tensor out({c, h + 2 * pad, w + 2 * pad});
  const std::size_t pw = w + 2 * pad, ph = h + 2 * pad;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out[(ch * ph + y + pad) * pw + x + pad] = image[(ch * h + y) * w + x];
  return out;
}

template <class Mac>
Tensor conv_forward_impl(const ConvLayer& layer, const Tensor& image, ConvCache* cache, Mac& m) {
  if (image.rank() != 3 || image.dim(0) != layer.in_channels()) {
    throw DimensionError("conv_forward: image " + shape_string(image.shape()) + " vs " +
                         std::to_string(layer.in_channels()) + " input channels");
  }
  const std::size_t kh = layer.kernel_h(), kw = layer.kernel_w(), s = layer.stride;
  const std::size_t oh = conv_output_extent(image.dim(1), kh, s, layer.padding);
  const std::size_t ow = conv_output_extent(image.dim(2), kw, s, layer.padding);
  // Zero padding is materialised so that every tap is a real multiply-accumulate.
  Tensor padded = pad_image(image, layer.padding);
  const std::size_t ic = layer.in_channels(), oc = layer.out_channels();
  const std::size_t ph = padded.dim(1), pw = padded.dim(2);
  Tensor out({oc, oh, ow});
  const double* p = padded.data().data();
  for (std::size_t o = 0; o < oc; ++o) {
    const double* k = layer.kernels.data().data() + o * ic * kh * kw;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        mac(m, acc, layer.bias[o], 1.0);
        for (std::size_t c = 0; c < ic; ++c)
          for (std::size_t dy = 0; dy < kh; ++dy) {
            const double* prow = p + (c * ph + y * s + dy) * pw + x * s;
            const double* krow = k + (c * kh + dy) * kw;
            acc += dot(m, krow, prow, kw);
          }
        out[(o * oh + y) * ow + x] = (layer.activation == Activation::relu && acc < 0.0) ? 0.0 : acc;
      }
    }
  }
  if (cache) {
    cache->input_shape = image.shape();
    cache->padded = std::move(padded);
    cache->output = out;
  }
  return out;
}

}  // namespace

Tensor conv_forward(const ConvLayer& layer, const Tensor& image, ConvCache* cache) {
  PlainMac m;
  return conv_forward_impl(layer, image, cache, m);
}
Tensor conv_forward(const ConvLayer& layer, const Tensor& image, ConvCache* cache, PlainMac& mac) {
  return conv_forward_impl(layer, image, cache, mac);
}
Tensor conv_forward(const ConvLayer& layer, const Tensor& image, ConvCache* cache, CountingMac& mac) {
  return conv_forward_impl(layer, image, cache, mac);
}

Tensor conv_backward(const ConvLayer& layer, const ConvCache& cache, const Tensor& d_out, ConvLayer& grad) {
  require_same_shape(cache.output, d_out, "conv_backward");
  const std::size_t kh = layer.kernel_h(), kw = layer.kernel_w(), s = layer.stride;
  const std::size_t ic = layer.in_channels(), oc = layer.out_channels();
  const std::size_t oh = d_out.dim(1), ow = d_out.dim(2);
  const std::size_t ph = cache.padded.dim(1), pw = cache.padded.dim(2);
  Tensor d_padded(cache.padded.shape());
  const double* p = cache.padded.data().data();
  double* dp = d_padded.data().data();
  for (std::size_t o = 0; o < oc; ++o) {
    const double* k = layer.kernels.data().data() + o * ic * kh * kw;
    double* gk = grad.kernels.data().data() + o * ic * kh * kw;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t idx = (o * oh + y) * ow + x;
        double g = d_out[idx];
        if (layer.activation == Activation::relu && cache.output[idx] <= 0.0) g = 0.0;
        if (g == 0.0) continue;
        grad.bias[o] += g;
        for (std::size_t c = 0; c < ic; ++c)
          for (std::size_t dy = 0; dy < kh; ++dy) {
            const std::size_t base = (c * ph + y * s + dy) * pw + x * s;
            const std::size_t kbase = (c * kh + dy) * kw;
            for (std::size_t dx = 0; dx < kw; ++dx) {
              gk[kbase + dx] += g * p[base + dx];
              dp[base + dx] += g * k[kbase + dx];
            }
          }
      }
    }
  }
  if (layer.padding == 0) return d_padded;
  const std::size_t h = cache.input_shape[1], w = cache.input_shape[2], pad = layer.padding;
  Tensor dx(cache.input_shape);
  for (std::size_t c = 0; c < ic; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) dx[(c * h + y) * w + x] = dp[(c * ph + y + pad) * pw + x + pad];
  return dx;
}

Tensor pool_forward(const PoolLayer& layer, const Tensor& image, PoolCache* cache) {
  if (image.rank() != 3) throw DimensionError("pool_forward expects C x H x W");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t oh = conv_output_extent(h, layer.window, layer.stride, 0);
  const std::size_t ow = conv_output_extent(w, layer.window, layer.stride, 0);
  Tensor out({c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t dy = 0; dy < layer.window; ++dy)
          for (std::size_t dx = 0; dx < layer.window; ++dx) {
            const std::size_t idx = (ch * h + y * layer.stride + dy) * w + x * layer.stride + dx;
            if (image[idx] > best) {
              best = image[idx];
              best_idx = idx;
            }
          }
        const std::size_t o = (ch * oh + y) * ow + x;
        out[o] = best;
        argmax[o] = best_idx;
      }
  if (cache) {
    cache->input_shape = image.shape();
    cache->argmax = std::move(argmax);
  }
  return out;
}

Tensor pool_backward(const PoolLayer&, const PoolCache& cache, const Tensor& d_out) {
  if (d_out.size() != cache.argmax.size()) throw DimensionError("pool_backward: gradient size");
  Tensor dx(cache.input_shape);
  for (std::size_t o = 0; o < d_out.size(); ++o) dx[cache.argmax[o]] += d_out[o];
  return dx;
}

}  // namespace avsr
