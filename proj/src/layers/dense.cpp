// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "avsr/error.hpp"
#include "avsr/layers.hpp"

namespace avsr {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "softmax") return Activation::softmax;
  throw ParameterError("unknown activation '" + name + "'");
}

FcLayer FcLayer::create(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  if (in == 0 || out == 0) throw ParameterError("FC layer sizes must be positive");
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  return FcLayer{rng_uniform(rng, {out, in}, -s, s), Tensor({out}), act};
}

void FcLayer::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + "weight", &weight});
  out.push_back({prefix + "bias", &bias});
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax expects a rank-2 tensor");
  Tensor out = logits;
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return out;
}

namespace {

void apply_activation(Activation act, Tensor& y) {
  switch (act) {
    case Activation::identity: break;
    case Activation::relu:
      for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::softmax: y = softmax_rows(y); break;
  }
}

// Gradient w.r.t. pre-activations given the post-activation output y.
Tensor activation_backward(Activation act, const Tensor& y, const Tensor& d_out) {
  Tensor d = d_out;
  switch (act) {
    case Activation::identity: break;
    case Activation::relu:
      for (std::size_t i = 0; i < d.size(); ++i)
        if (y[i] <= 0.0) d[i] = 0.0;
      break;
    case Activation::softmax:
      for (std::size_t r = 0; r < d.dim(0); ++r) {
        const auto yr = y.row(r);
        auto dr = d.row(r);
        double dotp = 0.0;
        for (std::size_t j = 0; j < yr.size(); ++j) dotp += yr[j] * d_out(r, j);
        for (std::size_t j = 0; j < yr.size(); ++j) dr[j] = yr[j] * (d_out(r, j) - dotp);
      }
      break;
  }
  return d;
}

template <class Mac>
Tensor fc_forward_impl(const FcLayer& layer, const Tensor& x, FcCache* cache, Mac& m) {
  if (x.rank() != 2 || x.dim(1) != layer.in_size()) {
    throw DimensionError("fc_forward: input " + shape_string(x.shape()) + " vs layer in " +
                         std::to_string(layer.in_size()));
  }
  const std::size_t batch = x.dim(0), in = layer.in_size(), out = layer.out_size();
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = x.data().data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      mac(m, acc, layer.bias[o], 1.0);
      acc += dot(m, layer.weight.data().data() + o * in, xr, in);
      y(b, o) = acc;
    }
  }
  apply_activation(layer.activation, y);
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

}  // namespace

Tensor fc_forward(const FcLayer& layer, const Tensor& x, FcCache* cache) {
  PlainMac m;
  return fc_forward_impl(layer, x, cache, m);
}
Tensor fc_forward(const FcLayer& layer, const Tensor& x, FcCache* cache, PlainMac& mac) {
  return fc_forward_impl(layer, x, cache, mac);
}
Tensor fc_forward(const FcLayer& layer, const Tensor& x, FcCache* cache, CountingMac& mac) {
  return fc_forward_impl(layer, x, cache, mac);
}

Tensor fc_backward(const FcLayer& layer, const FcCache& cache, const Tensor& d_out, FcLayer& grad) {
  require_same_shape(cache.output, d_out, "fc_backward");
  const Tensor d_pre = activation_backward(layer.activation, cache.output, d_out);
  const std::size_t batch = d_pre.dim(0), in = layer.in_size(), out = layer.out_size();
  Tensor dx({batch, in});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = cache.input.data().data() + b * in;
    double* dxr = dx.data().data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = d_pre(b, o);
      if (g == 0.0) continue;
      grad.bias[o] += g;
      double* gw = grad.weight.data().data() + o * in;
      const double* w = layer.weight.data().data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += g * xr[i];
        dxr[i] += g * w[i];
      }
    }
  }
  return dx;
}

XentResult softmax_xent(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("softmax_xent: logits " + shape_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ParameterError("softmax_xent: empty batch");
  const std::size_t classes = logits.dim(1);
  XentResult r;
  r.d_logits = softmax_rows(logits);
  const double inv = 1.0 / static_cast<double>(labels.size());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] >= classes) {
      throw ParameterError("label " + std::to_string(labels[b]) + " outside [0, " +
                           std::to_string(classes) + ")");
    }
    // log-sum-exp form stays exact when one logit dominates.
    const auto row = logits.row(b);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    r.loss += (mx + std::log(z) - row[labels[b]]) * inv;
    auto d = r.d_logits.row(b);
    d[labels[b]] -= 1.0;
    for (double& v : d) v *= inv;
  }
  if (!std::isfinite(r.loss)) throw NumericError("cross-entropy loss is not finite");
  return r;
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_columns: " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), out.row(r).begin());
    std::copy(b.row(r).begin(), b.row(r).end(), out.row(r).begin() + static_cast<long>(ca));
  }
  return out;
}

}  // namespace avsr
